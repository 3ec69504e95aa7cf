//! Scalar-valued probability primitives shared by the losses.

use crate::error::{arg, Result};

/// Lower/upper clamp applied to probabilities before taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

pub fn softmax(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return arg("softmax of an empty vector");
    }
    if values.iter().any(|v| !v.is_finite()) {
        return arg("softmax input must be finite");
    }
    let mut out = values.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// Numerically stable softmax over a nonempty finite slice.
pub(crate) fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
}

/// `log(softmax(values))`, computed without forming the exponentials' ratio.
pub fn log_softmax(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return arg("log_softmax of an empty vector");
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    Ok(values.iter().map(|v| v - lse).collect())
}

/// `sum p * ln(p / q)` over two strictly positive probability vectors.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return arg(format!("length mismatch {} vs {}", p.len(), q.len()));
    }
    if p.is_empty() {
        return arg("empty distributions");
    }
    for (name, dist) in [("p", p), ("q", q)] {
        if dist.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return arg(format!("{name} has a nonpositive entry"));
        }
        let total: f64 = dist.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return arg(format!("{name} sums to {total}"));
        }
    }
    let kl: f64 = p.iter().zip(q).map(|(a, b)| a * (a / b).ln()).sum();
    // Rounding can leave a tiny negative residue for p == q.
    Ok(kl.max(0.0))
}

/// Focal binary cross-entropy `-(1 - p_t)^gamma * ln p_t`.
pub fn focal_bce(pred: f64, target: bool, gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return arg(format!("focal gamma must be >= 0, got {gamma}"));
    }
    if !pred.is_finite() {
        return arg("prediction must be finite");
    }
    Ok(focal_term(pred, target, gamma).0)
}

/// Loss and derivative with respect to the unclamped prediction.
pub(crate) fn focal_term(pred: f64, target: bool, gamma: f64) -> (f64, f64) {
    let clamped = pred.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let inside = clamped == pred;
    let (pt, sign) = if target {
        (clamped, 1.0)
    } else {
        (1.0 - clamped, -1.0)
    };
    let log_pt = pt.ln();
    let q = 1.0 - pt;
    let weight = if gamma == 0.0 { 1.0 } else { q.powf(gamma) };
    let loss = -weight * log_pt;
    if !inside {
        return (loss, 0.0);
    }
    let mut dpt = -weight / pt;
    if gamma != 0.0 {
        dpt += gamma * q.powf(gamma - 1.0) * log_pt;
    }
    (loss, sign * dpt)
}
