//! Central finite differences over every model parameter.

use langtrack::model::ModelParams;
use langtrack::numeric::Tensor2D;

/// `|fd - analytic| / max(|fd|, |analytic|)` over all entries jointly, with
/// `fd` from central differences of `loss` at step `eps`. Only tensors whose
/// index passes `select` are perturbed and compared.
pub fn relative_error(
    params: &ModelParams,
    analytic: &[Tensor2D],
    eps: f64,
    select: &dyn Fn(usize) -> bool,
    loss: &dyn Fn(&ModelParams) -> f64,
) -> f64 {
    let (mut diff, mut fd_norm, mut an_norm) = (0.0, 0.0, 0.0);
    let count = params.shapes().len();
    for t in (0..count).filter(|&t| select(t)) {
        let len = analytic[t].len();
        for j in 0..len {
            let mut plus = params.clone();
            plus.tensors_mut()[t].as_mut_slice()[j] += eps;
            let mut minus = params.clone();
            minus.tensors_mut()[t].as_mut_slice()[j] -= eps;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * eps);
            let an = analytic[t].as_slice()[j];
            diff += (fd - an) * (fd - an);
            fd_norm += fd * fd;
            an_norm += an * an;
        }
    }
    diff.sqrt() / fd_norm.sqrt().max(an_norm.sqrt()).max(1e-12)
}
