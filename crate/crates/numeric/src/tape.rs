//! Reverse-mode differentiation over a dynamically recorded operation tape.
//!
//! Every forward operation appends a node holding its value; `backward`
//! walks the tape in reverse and accumulates vector-Jacobian products into
//! the parameter leaves. Composite losses (row-wise KL, focal BCE) store their
//! local Jacobian at forward time so the reverse sweep is a single scale.

use std::rc::Rc;

use crate::error::{arg, NumericError, Result};
use crate::ops::{focal_term, softmax_in_place};
use crate::tensor::{gemm, Tensor2D};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Constant,
    Param(usize),
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Scale(Var, f64),
    ScaleRows(Var, Rc<[f64]>),
    SliceRows(Var, usize),
    ConcatCols(Vec<Var>),
    Gather(Var, Rc<[usize]>),
    ScatterAdd(Var, Rc<[usize]>),
    Sum(Var),
    Mean(Var),
    SoftmaxRows(Var),
    /// Scalar loss with a precomputed local gradient w.r.t. its input.
    Loss(Var, Tensor2D),
}

struct Node {
    value: Tensor2D,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Parameter gradients collected by [`Tape::backward`], indexed by the ids
/// passed to [`Tape::param`].
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    by_param: Vec<Option<Tensor2D>>,
}

impl Gradients {
    pub fn get(&self, param: usize) -> Option<&Tensor2D> {
        self.by_param.get(param).and_then(Option::as_ref)
    }

    /// Dense gradients for parameters of the given shapes; unreached
    /// parameters receive zeros.
    pub fn dense(&self, shapes: &[(usize, usize)]) -> Vec<Tensor2D> {
        shapes
            .iter()
            .enumerate()
            .map(|(i, &(r, c))| {
                self.get(i)
                    .cloned()
                    .unwrap_or_else(|| Tensor2D::zeros(r, c))
            })
            .collect()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor2D {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> Result<f64> {
        self.value(v).item()
    }

    fn push(&mut self, value: Tensor2D, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn constant(&mut self, value: Tensor2D) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Registers a differentiable leaf whose gradient is reported under `id`.
    pub fn param(&mut self, id: usize, value: Tensor2D) -> Var {
        self.push(value, Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::MatMul(a, b), needs))
    }

    /// `a + b` with the single row `b` broadcast over the rows of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        if self.shape(b) != (1, cols) {
            return Err(NumericError::Shape(format!(
                "row broadcast of {:?} onto {rows}x{cols}",
                self.shape(b)
            )));
        }
        let mut out = self.value(a).clone();
        let bias = self.value(b).as_slice().to_vec();
        for r in 0..rows {
            for (o, bb) in out.row_mut(r).iter_mut().zip(&bias) {
                *o += bb;
            }
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::AddRow(a, b), needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(NumericError::Shape(format!(
                "add {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Add(a, b), needs))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        out.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        let needs = self.needs(a);
        self.push(out, Op::Relu(a), needs)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        out.as_mut_slice().iter_mut().for_each(|v| *v = sigmoid(*v));
        let needs = self.needs(a);
        self.push(out, Op::Sigmoid(a), needs)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let mut out = self.value(a).clone();
        out.scale(factor);
        let needs = self.needs(a);
        self.push(out, Op::Scale(a, factor), needs)
    }

    /// Multiplies row `r` of `a` by `factors[r]`.
    pub fn scale_rows(&mut self, a: Var, factors: Rc<[f64]>) -> Result<Var> {
        let (rows, _) = self.shape(a);
        if factors.len() != rows {
            return arg(format!("{} row factors for {rows} rows", factors.len()));
        }
        let mut out = self.value(a).clone();
        for (r, f) in factors.iter().enumerate() {
            out.row_mut(r).iter_mut().for_each(|v| *v *= f);
        }
        let needs = self.needs(a);
        Ok(self.push(out, Op::ScaleRows(a, factors), needs))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        if start + len > rows {
            return arg(format!("row slice {start}..{} of {rows} rows", start + len));
        }
        let data = self.value(a).as_slice()[start * cols..(start + len) * cols].to_vec();
        let needs = self.needs(a);
        Ok(self.push(
            Tensor2D::raw(len, cols, data),
            Op::SliceRows(a, start),
            needs,
        ))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return arg("concat of zero tensors");
        };
        let rows = self.shape(first).0;
        if parts.iter().any(|&p| self.shape(p).0 != rows) {
            return Err(NumericError::Shape("concat_cols row mismatch".into()));
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut out = Tensor2D::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                out.row_mut(r)[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), needs))
    }

    /// Row `i` of the output is row `index[i]` of `a`.
    pub fn gather_rows(&mut self, a: Var, index: Rc<[usize]>) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        if let Some(&bad) = index.iter().find(|&&i| i >= rows) {
            return arg(format!("gather index {bad} out of {rows} rows"));
        }
        let src = self.value(a);
        let mut data = Vec::with_capacity(index.len() * cols);
        for &i in index.iter() {
            data.extend_from_slice(src.row(i));
        }
        let needs = self.needs(a);
        Ok(self.push(
            Tensor2D::raw(index.len(), cols, data),
            Op::Gather(a, index),
            needs,
        ))
    }

    /// Sums row `i` of `a` into output row `index[i]`; output has `out_rows` rows.
    pub fn scatter_add_rows(&mut self, a: Var, index: Rc<[usize]>, out_rows: usize) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        if index.len() != rows {
            return arg(format!("{} scatter targets for {rows} rows", index.len()));
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= out_rows) {
            return arg(format!("scatter target {bad} out of {out_rows} rows"));
        }
        let mut out = Tensor2D::zeros(out_rows, cols);
        let src = self.value(a);
        for (r, &t) in index.iter().enumerate() {
            for (o, s) in out.row_mut(t).iter_mut().zip(src.row(r)) {
                *o += s;
            }
        }
        let needs = self.needs(a);
        Ok(self.push(out, Op::ScatterAdd(a, index), needs))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).as_slice().iter().sum();
        let needs = self.needs(a);
        self.push(Tensor2D::scalar(s), Op::Sum(a), needs)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.is_empty() {
            return arg("mean of an empty tensor");
        }
        let m = t.as_slice().iter().sum::<f64>() / t.len() as f64;
        let needs = self.needs(a);
        Ok(self.push(Tensor2D::scalar(m), Op::Mean(a), needs))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        if cols == 0 {
            return arg("softmax over zero columns");
        }
        let mut out = self.value(a).clone();
        for r in 0..rows {
            softmax_in_place(out.row_mut(r));
        }
        let needs = self.needs(a);
        Ok(self.push(out, Op::SoftmaxRows(a), needs))
    }

    /// Mean over rows of `KL(softmax(a_r) || softmax(t_r))` where `targets`
    /// holds constant logits, either one row per input row or a single row
    /// shared by all of them.
    pub fn kl_rows_mean(&mut self, a: Var, targets: &Tensor2D) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        if rows == 0 {
            return arg("KL over zero rows");
        }
        if targets.cols() != cols || (targets.rows() != rows && targets.rows() != 1) {
            return Err(NumericError::Shape(format!(
                "KL targets {:?} for inputs {rows}x{cols}",
                targets.shape()
            )));
        }
        let broadcast = targets.rows() == 1 && rows != 1;
        let mut target_log = Vec::with_capacity(targets.rows());
        for r in 0..targets.rows() {
            target_log.push(crate::ops::log_softmax(targets.row(r))?);
        }
        let input = self.value(a);
        let mut local = Tensor2D::zeros(rows, cols);
        let mut total = 0.0;
        let inv = 1.0 / rows as f64;
        for r in 0..rows {
            let log_p = crate::ops::log_softmax(input.row(r))?;
            let log_q = &target_log[if broadcast { 0 } else { r }];
            let mut kl = 0.0;
            for c in 0..cols {
                kl += log_p[c].exp() * (log_p[c] - log_q[c]);
            }
            total += kl;
            for c in 0..cols {
                let p = log_p[c].exp();
                local.set(r, c, inv * p * ((log_p[c] - log_q[c]) - kl));
            }
        }
        let needs = self.needs(a);
        Ok(self.push(Tensor2D::scalar(total * inv), Op::Loss(a, local), needs))
    }

    /// Mean focal binary cross-entropy of probabilities `a` (any shape)
    /// against 0/1 `targets` in row-major order.
    pub fn focal_bce_mean(&mut self, a: Var, targets: &[bool], gamma: f64) -> Result<Var> {
        let input = self.value(a);
        if input.len() != targets.len() {
            return arg(format!(
                "{} targets for {} predictions",
                targets.len(),
                input.len()
            ));
        }
        if input.is_empty() {
            return arg("focal loss over zero predictions");
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return arg(format!("focal gamma must be >= 0, got {gamma}"));
        }
        let inv = 1.0 / targets.len() as f64;
        let (rows, cols) = input.shape();
        let mut local = Tensor2D::zeros(rows, cols);
        let mut total = 0.0;
        for (i, (&p, &t)) in input.as_slice().iter().zip(targets).enumerate() {
            let (loss, d) = focal_term(p, t, gamma);
            total += loss;
            local.as_mut_slice()[i] = d * inv;
        }
        let needs = self.needs(a);
        Ok(self.push(Tensor2D::scalar(total * inv), Op::Loss(a, local), needs))
    }

    /// Back-propagates from the scalar `loss` and returns parameter gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            return arg(format!(
                "backward needs a scalar loss, got {:?}",
                self.shape(loss)
            ));
        }
        let mut grads: Vec<Option<Tensor2D>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor2D::scalar(1.0));
        let mut by_param: Vec<Option<Tensor2D>> = Vec::new();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    if by_param.len() <= *id {
                        by_param.resize(id + 1, None);
                    }
                    accumulate(&mut by_param[*id], g);
                }
                Op::MatMul(a, b) => {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    let (n, k) = av.shape();
                    let m = bv.cols();
                    if self.needs(*a) {
                        let mut da = vec![0.0; n * k];
                        gemm(
                            n,
                            m,
                            k,
                            (g.as_slice(), m, 1),
                            (bv.as_slice(), 1, m),
                            &mut da,
                            0.0,
                        );
                        accumulate(&mut grads[a.0], Tensor2D::raw(n, k, da));
                    }
                    if self.needs(*b) {
                        let mut db = vec![0.0; k * m];
                        gemm(
                            k,
                            n,
                            m,
                            (av.as_slice(), 1, k),
                            (g.as_slice(), m, 1),
                            &mut db,
                            0.0,
                        );
                        accumulate(&mut grads[b.0], Tensor2D::raw(k, m, db));
                    }
                }
                Op::AddRow(a, b) => {
                    if self.needs(*b) {
                        let (rows, cols) = g.shape();
                        let mut db = vec![0.0; cols];
                        for r in 0..rows {
                            for (d, v) in db.iter_mut().zip(g.row(r)) {
                                *d += v;
                            }
                        }
                        accumulate(&mut grads[b.0], Tensor2D::raw(1, cols, db));
                    }
                    if self.needs(*a) {
                        accumulate(&mut grads[a.0], g);
                    }
                }
                Op::Add(a, b) => {
                    if self.needs(*b) {
                        accumulate(&mut grads[b.0], g.clone());
                    }
                    if self.needs(*a) {
                        accumulate(&mut grads[a.0], g);
                    }
                }
                Op::Relu(a) => {
                    let mut d = g;
                    for (dv, out) in d.as_mut_slice().iter_mut().zip(node.value.as_slice()) {
                        if *out <= 0.0 {
                            *dv = 0.0;
                        }
                    }
                    accumulate(&mut grads[a.0], d);
                }
                Op::Sigmoid(a) => {
                    let mut d = g;
                    for (dv, s) in d.as_mut_slice().iter_mut().zip(node.value.as_slice()) {
                        *dv *= s * (1.0 - s);
                    }
                    accumulate(&mut grads[a.0], d);
                }
                Op::Scale(a, f) => {
                    let mut d = g;
                    d.scale(*f);
                    accumulate(&mut grads[a.0], d);
                }
                Op::ScaleRows(a, factors) => {
                    let mut d = g;
                    for (r, f) in factors.iter().enumerate() {
                        d.row_mut(r).iter_mut().for_each(|v| *v *= f);
                    }
                    accumulate(&mut grads[a.0], d);
                }
                Op::SliceRows(a, start) => {
                    let (rows, cols) = self.shape(*a);
                    let mut d = Tensor2D::zeros(rows, cols);
                    let len = g.len();
                    d.as_mut_slice()[start * cols..start * cols + len]
                        .copy_from_slice(g.as_slice());
                    accumulate(&mut grads[a.0], d);
                }
                Op::ConcatCols(parts) => {
                    let rows = g.rows();
                    let mut offset = 0;
                    for p in parts {
                        let cols = self.shape(*p).1;
                        if self.needs(*p) {
                            let mut d = Tensor2D::zeros(rows, cols);
                            for r in 0..rows {
                                d.row_mut(r)
                                    .copy_from_slice(&g.row(r)[offset..offset + cols]);
                            }
                            accumulate(&mut grads[p.0], d);
                        }
                        offset += cols;
                    }
                }
                Op::Gather(a, index) => {
                    let (rows, cols) = self.shape(*a);
                    let mut d = Tensor2D::zeros(rows, cols);
                    for (r, &src) in index.iter().enumerate() {
                        for (o, v) in d.row_mut(src).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads[a.0], d);
                }
                Op::ScatterAdd(a, index) => {
                    let cols = g.cols();
                    let mut data = Vec::with_capacity(index.len() * cols);
                    for &t in index.iter() {
                        data.extend_from_slice(g.row(t));
                    }
                    accumulate(&mut grads[a.0], Tensor2D::raw(index.len(), cols, data));
                }
                Op::Sum(a) => {
                    let (r, c) = self.shape(*a);
                    accumulate(&mut grads[a.0], Tensor2D::filled(r, c, g.as_slice()[0]));
                }
                Op::Mean(a) => {
                    let (r, c) = self.shape(*a);
                    let v = g.as_slice()[0] / (r * c) as f64;
                    accumulate(&mut grads[a.0], Tensor2D::filled(r, c, v));
                }
                Op::SoftmaxRows(a) => {
                    let (rows, _) = node.value.shape();
                    let mut d = g;
                    for r in 0..rows {
                        let p = node.value.row(r);
                        let dot: f64 = d.row(r).iter().zip(p).map(|(x, y)| x * y).sum();
                        for (dv, pv) in d.row_mut(r).iter_mut().zip(p) {
                            *dv = pv * (*dv - dot);
                        }
                    }
                    accumulate(&mut grads[a.0], d);
                }
                Op::Loss(a, local) => {
                    let mut d = local.clone();
                    d.scale(g.as_slice()[0]);
                    accumulate(&mut grads[a.0], d);
                }
            }
        }
        Ok(Gradients { by_param })
    }
}

fn accumulate(slot: &mut Option<Tensor2D>, g: Tensor2D) {
    match slot {
        Some(existing) => existing.add_assign(&g),
        None => *slot = Some(g),
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
