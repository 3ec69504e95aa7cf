//! Loss formulas evaluated term by term.

/// `exp(x_i) / sum_j exp(x_j)` with no shifting; inputs must stay moderate.
pub fn softmax_direct(x: &[f64]) -> Vec<f64> {
    let total: f64 = x.iter().map(|v| v.exp()).sum();
    x.iter().map(|v| v.exp() / total).collect()
}

/// `sum_i p_i ln(p_i / q_i)` over softmaxes of the two logit rows.
pub fn kl_direct(a: &[f64], b: &[f64]) -> f64 {
    let (p, q) = (softmax_direct(a), softmax_direct(b));
    p.iter().zip(&q).map(|(p, q)| p * (p / q).ln()).sum()
}

/// Mean KL of each row against its own target row.
pub fn mean_kl(rows: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    rows.iter()
        .zip(targets)
        .map(|(r, t)| kl_direct(r, t))
        .sum::<f64>()
        / rows.len() as f64
}

/// Focal binary cross-entropy `-(1 - p_t)^gamma ln p_t`.
pub fn focal(p: f64, target: bool, gamma: f64) -> f64 {
    let pt = if target { p } else { 1.0 - p };
    -(1.0 - pt).powf(gamma) * pt.ln()
}
