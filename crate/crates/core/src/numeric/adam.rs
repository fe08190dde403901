use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Moment accumulators for bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &[Tensor], beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            step: 0,
            beta1,
            beta2,
            epsilon,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn with_defaults(params: &[Tensor]) -> Self {
        Self::new(params, 0.9, 0.999, 1e-8)
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.second
    }
}

/// One Adam update in place. `grads[i]` may be `None` for a parameter that
/// received no gradient this step; it is treated as zero.
pub fn adam_step(
    params: &mut [Tensor],
    grads: &[Option<Tensor>],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::Shape(format!(
            "adam over {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != state.first[i].shape() || g.as_ref().is_some_and(|g| g.shape() != p.shape())
        {
            return Err(Error::Shape(format!("adam parameter {i} {:?}", p.shape())));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first.iter_mut().zip(state.second.iter_mut()))
    {
        let gd = g.as_ref().map(|g| g.data());
        for j in 0..p.numel() {
            let gj = gd.map_or(0.0, |d| d[j]);
            let mj = b1 * m.data()[j] + (1.0 - b1) * gj;
            let vj = b2 * v.data()[j] + (1.0 - b2) * gj * gj;
            m.data_mut()[j] = mj;
            v.data_mut()[j] = vj;
            if lr != 0.0 {
                let update = lr * (mj / c1) / ((vj / c2).sqrt() + eps);
                p.data_mut()[j] -= update;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(v: f64) -> Vec<Tensor> {
        vec![Tensor::scalar(v)]
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = one(0.5);
        let mut st = AdamState::with_defaults(&p);
        adam_step(&mut p, &[Some(Tensor::scalar(1.0))], &mut st, 1e-3).unwrap();
        // m̂ = 1, v̂ = 1 → Δ = −lr / (1 + ε)
        let expected = 0.5 - 1e-3 / (1.0 + 1e-8);
        assert!((p[0].data()[0] - expected).abs() < 1e-15);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = one(2.0);
        let mut st = AdamState::with_defaults(&p);
        adam_step(&mut p, &[Some(Tensor::scalar(0.0))], &mut st, 1e-2).unwrap();
        adam_step(&mut p, &[None], &mut st, 1e-2).unwrap();
        assert_eq!(p[0].data()[0], 2.0);
        assert_eq!(st.step, 2);
    }

    #[test]
    fn constant_gradient_moves_monotonically() {
        let mut p = one(0.0);
        let mut st = AdamState::with_defaults(&p);
        let mut prev = 0.0;
        for _ in 0..2 {
            adam_step(&mut p, &[Some(Tensor::scalar(-3.0))], &mut st, 0.1).unwrap();
            let now = p[0].data()[0];
            assert!(now > prev);
            prev = now;
        }
        // both bias-corrected steps equal lr·g/|g| exactly up to ε
        assert!((prev - 0.2).abs() < 1e-8);
    }

    #[test]
    fn rejects_mismatched_grad() {
        let mut p = one(0.0);
        let mut st = AdamState::with_defaults(&p);
        let bad = Some(Tensor::zeros(&[2]));
        assert!(adam_step(&mut p, &[bad], &mut st, 0.1).is_err());
    }
}
