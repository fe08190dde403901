//! Dense tensors, reverse-mode gradients and the Adam optimizer.

mod adam;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use tape::{sigmoid, Tape, Var};
pub use tensor::Tensor;

/// Central finite-difference estimate of `∂f/∂params[i][j]` for every scalar.
///
/// `f` must be a pure function of the parameter values; it is evaluated twice
/// per scalar.
pub fn finite_difference_grads(
    params: &mut [Tensor],
    step: f64,
    mut f: impl FnMut(&[Tensor]) -> f64,
) -> Vec<Tensor> {
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let mut g = Tensor::zeros(params[i].shape());
        for j in 0..params[i].numel() {
            let orig = params[i].data()[j];
            params[i].data_mut()[j] = orig + step;
            let up = f(params);
            params[i].data_mut()[j] = orig - step;
            let down = f(params);
            params[i].data_mut()[j] = orig;
            g.data_mut()[j] = (up - down) / (2.0 * step);
        }
        out.push(g);
    }
    out
}

/// Relative error used by gradient checks: `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
