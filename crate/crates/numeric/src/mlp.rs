//! Dense multi-layer perceptrons, usable either directly or bound to a tape.

use std::rc::Rc;

use rand::Rng;

use crate::error::{NumericError, Result};
use crate::tape::{sigmoid, Tape, Var};
use crate::tensor::Tensor2D;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
    Sigmoid,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            "sigmoid" => Some(Activation::Sigmoid),
            _ => None,
        }
    }

    fn apply_in_place(self, t: &mut Tensor2D) {
        match self {
            Activation::Relu => t.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Identity => {}
            Activation::Sigmoid => t.as_mut_slice().iter_mut().for_each(|v| *v = sigmoid(*v)),
        }
    }

    fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Identity => x,
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }
}

/// One affine layer `act(x W + b)`; `weight` is `in x out`, `bias` is `1 x out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Tensor2D,
    pub bias: Tensor2D,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weight: Tensor2D, bias: Tensor2D, activation: Activation) -> Result<Self> {
        if bias.shape() != (1, weight.cols()) {
            return Err(NumericError::Shape(format!(
                "bias {:?} for weight {:?}",
                bias.shape(),
                weight.shape()
            )));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(NumericError::Argument(
                "an MLP needs at least one layer".into(),
            ));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(NumericError::Shape(format!(
                    "layer output {} feeds layer input {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Variance-preserving uniform initialisation: weights in `±sqrt(6/fan_in)`
    /// before a ReLU and `±sqrt(3/fan_in)` otherwise, biases in
    /// `±1/sqrt(fan_in)`. `dims` has one more entry than `activations`.
    pub fn init<R: Rng + ?Sized>(
        dims: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() != activations.len() + 1 || activations.is_empty() {
            return Err(NumericError::Argument(format!(
                "{} dims for {} activations",
                dims.len(),
                activations.len()
            )));
        }
        let mut layers = Vec::with_capacity(activations.len());
        for (w, &act) in dims.windows(2).zip(activations) {
            let (fan_in, fan_out) = (w[0], w[1]);
            if fan_in == 0 || fan_out == 0 {
                return Err(NumericError::Argument("zero-width layer".into()));
            }
            let gain: f64 = if act == Activation::Relu { 6.0 } else { 3.0 };
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut draw =
                |n: usize, b: f64| (0..n).map(|_| rng.random_range(-b..=b)).collect::<Vec<_>>();
            let weight =
                Tensor2D::raw(fan_in, fan_out, draw(fan_in * fan_out, gain.sqrt() * bound));
            let bias = Tensor2D::raw(1, fan_out, draw(fan_out, bound));
            layers.push(Layer {
                weight,
                bias,
                activation: act,
            });
        }
        Ok(Self { layers })
    }

    pub fn zeros(dims: &[usize], activations: &[Activation]) -> Result<Self> {
        if dims.len() != activations.len() + 1 || activations.is_empty() {
            return Err(NumericError::Argument("dims/activations mismatch".into()));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| Layer {
                weight: Tensor2D::zeros(w[0], w[1]),
                bias: Tensor2D::zeros(1, w[1]),
                activation: act,
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_tensors(&self) -> usize {
        2 * self.layers.len()
    }

    /// Plain (tape-free) forward pass.
    pub fn forward(&self, x: &Tensor2D) -> Result<Tensor2D> {
        if x.cols() != self.in_dim() {
            return Err(NumericError::Argument(format!(
                "input has {} columns, MLP expects {}",
                x.cols(),
                self.in_dim()
            )));
        }
        let mut h = x.clone();
        for layer in &self.layers {
            let mut next = h.matmul(&layer.weight)?;
            for r in 0..next.rows() {
                for (v, b) in next.row_mut(r).iter_mut().zip(layer.bias.as_slice()) {
                    *v += b;
                }
            }
            layer.activation.apply_in_place(&mut next);
            h = next;
        }
        Ok(h)
    }

    /// Named tensors in the canonical order used for binding and checkpoints.
    pub fn named_tensors(&self, prefix: &str) -> Vec<(String, &Tensor2D)> {
        let mut out = Vec::with_capacity(self.num_tensors());
        for (i, layer) in self.layers.iter().enumerate() {
            out.push((format!("{prefix}.layer{i}.weight"), &layer.weight));
            out.push((format!("{prefix}.layer{i}.bias"), &layer.bias));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor2D> {
        let mut out = Vec::with_capacity(self.num_tensors());
        for layer in &mut self.layers {
            out.push(&mut layer.weight);
            out.push(&mut layer.bias);
        }
        out
    }

    /// Registers every tensor on `tape` as a parameter, consuming ids from
    /// `next_id` in [`Mlp::named_tensors`] order.
    pub fn bind(&self, tape: &mut Tape, next_id: &mut usize) -> BoundMlp {
        let layers = self
            .layers
            .iter()
            .map(|layer| {
                let weight = tape.param(*next_id, layer.weight.clone());
                let bias = tape.param(*next_id + 1, layer.bias.clone());
                *next_id += 2;
                BoundLayer {
                    weight,
                    bias,
                    activation: layer.activation,
                    in_dim: layer.in_dim(),
                }
            })
            .collect();
        BoundMlp { layers }
    }
}

#[derive(Clone, Debug)]
struct BoundLayer {
    weight: Var,
    bias: Var,
    activation: Activation,
    in_dim: usize,
}

/// An [`Mlp`] whose tensors live on a tape.
#[derive(Clone, Debug)]
pub struct BoundMlp {
    layers: Vec<BoundLayer>,
}

/// One column block of a split first-layer input. When `rows` is set the
/// block is evaluated on the source rows and then gathered.
pub struct InputPart {
    pub input: Var,
    pub rows: Option<Rc<[usize]>>,
}

impl BoundMlp {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        self.forward_parts(
            tape,
            &[InputPart {
                input: x,
                rows: None,
            }],
        )
    }

    /// Forward pass whose first-layer input is the column concatenation of
    /// `parts`, each optionally row-gathered. Evaluates `gather(x) W` as
    /// `gather(x W)` so per-node products are computed once per node rather
    /// than once per edge.
    pub fn forward_parts(&self, tape: &mut Tape, parts: &[InputPart]) -> Result<Var> {
        let first = &self.layers[0];
        let total: usize = parts.iter().map(|p| tape.value(p.input).cols()).sum();
        if total != first.in_dim {
            return Err(NumericError::Argument(format!(
                "input has {total} columns, MLP expects {}",
                first.in_dim
            )));
        }
        let mut offset = 0;
        let mut acc: Option<Var> = None;
        for part in parts {
            let cols = tape.value(part.input).cols();
            let w = if parts.len() == 1 {
                first.weight
            } else {
                tape.slice_rows(first.weight, offset, cols)?
            };
            offset += cols;
            let mut term = tape.matmul(part.input, w)?;
            if let Some(rows) = &part.rows {
                term = tape.gather_rows(term, rows.clone())?;
            }
            acc = Some(match acc {
                None => term,
                Some(prev) => tape.add(prev, term)?,
            });
        }
        let pre = tape.add_row(acc.expect("at least one part"), first.bias)?;
        let mut h = first.activation.apply(tape, pre);
        for layer in &self.layers[1..] {
            let z = tape.matmul(h, layer.weight)?;
            let z = tape.add_row(z, layer.bias)?;
            h = layer.activation.apply(tape, z);
        }
        Ok(h)
    }
}
