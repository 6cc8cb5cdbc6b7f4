//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::numkernel::Tensor;
use crate::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let ok = |b: f64| (0.0..1.0).contains(&b);
        if !ok(self.beta1) || !ok(self.beta2) || !(self.epsilon > 0.0) {
            return Err(TrainError::Config(format!(
                "adam needs betas in [0, 1) and epsilon > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// First and second moments per parameter tensor plus the step count.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(shapes: &[&[usize]]) -> Self {
        let zeros = || shapes.iter().map(|s| Tensor::zeros(s)).collect::<Vec<_>>();
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    pub fn for_params(params: &[&Tensor<T>]) -> Self {
        let shapes: Vec<&[usize]> = params.iter().map(|p| p.shape()).collect();
        Self::new(&shapes)
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[Tensor<T>] {
        &self.m
    }

    pub fn second_moment(&self) -> &[Tensor<T>] {
        &self.v
    }
}

/// One Adam update of `params` in place.
///
/// `θ ← θ − η·m̂/(√v̂ + ε)` with `m̂ = m/(1−β₁ᵗ)`, `v̂ = v/(1−β₂ᵗ)`.
pub fn adam_step<T: Scalar>(
    params: &mut [&mut Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
    lr: T,
    cfg: &AdamConfig,
) -> Result<(), TrainError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(TrainError::Optimizer(format!(
            "{} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(TrainError::Optimizer(format!(
                "parameter {i}: shape {:?}, gradient {:?}, state {:?}",
                p.shape(),
                g.shape(),
                state.m[i].shape()
            )));
        }
        if g.data().iter().any(|v| !v.is_finite()) {
            return Err(TrainError::Optimizer(format!(
                "non-finite gradient in parameter {i}"
            )));
        }
    }

    state.step += 1;
    let b1 = T::lit(cfg.beta1);
    let b2 = T::lit(cfg.beta2);
    let eps = T::lit(cfg.epsilon);
    let t = i32::try_from(state.step).unwrap_or(i32::MAX);
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        let g = grads[i].data();
        let m = state.m[i].data_mut();
        for (mj, &gj) in m.iter_mut().zip(g) {
            *mj = b1 * *mj + (T::one() - b1) * gj;
        }
        let v = state.v[i].data_mut();
        for (vj, &gj) in v.iter_mut().zip(g) {
            *vj = b2 * *vj + (T::one() - b2) * gj * gj;
        }
        let (m, v) = (state.m[i].data(), state.v[i].data());
        for (j, x) in p.data_mut().iter_mut().enumerate() {
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            *x = *x - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(v: f64) -> Tensor<f64> {
        Tensor::vector(vec![v]).unwrap()
    }

    #[test]
    fn first_step_matches_hand_formula() {
        let cfg = AdamConfig::default();
        for g in [0.3, -2.0, 1e-6] {
            let mut p = one(1.0);
            let mut state = AdamState::<f64>::new(&[&[1]]);
            adam_step(&mut [&mut p], &[one(g)], &mut state, 0.01, &cfg).unwrap();
            // m̂ = g and v̂ = g² after one step
            let expected = 1.0 - 0.01 * g / (g.abs() + 1e-8);
            assert!((p.data()[0] - expected).abs() < 1e-15, "{g}");
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let cfg = AdamConfig::default();
        let mut p = one(2.0);
        let mut state = AdamState::<f64>::new(&[&[1]]);
        adam_step(&mut [&mut p], &[one(1.0)], &mut state, 0.1, &cfg).unwrap();
        let after_one = p.data()[0];
        let (m, v) = (
            state.first_moment()[0].data()[0],
            state.second_moment()[0].data()[0],
        );
        adam_step(&mut [&mut p], &[one(0.0)], &mut state, 0.1, &cfg).unwrap();
        assert!((state.first_moment()[0].data()[0] - 0.9 * m).abs() < 1e-15);
        assert!((state.second_moment()[0].data()[0] - 0.999 * v).abs() < 1e-15);
        // the moment decay still moves θ here, but a fresh zero gradient does not
        assert_ne!(p.data()[0], after_one);
        let mut q = one(2.0);
        let mut fresh = AdamState::<f64>::new(&[&[1]]);
        adam_step(&mut [&mut q], &[one(0.0)], &mut fresh, 0.1, &cfg).unwrap();
        assert_eq!(q.data()[0], 2.0);
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        let cfg = AdamConfig::default();
        let mut p = one(0.0);
        let mut state = AdamState::<f64>::new(&[&[1]]);
        let mut last = 0.0;
        for _ in 0..5000 {
            let before = p.data()[0];
            adam_step(&mut [&mut p], &[one(0.7)], &mut state, 1e-3, &cfg).unwrap();
            last = before - p.data()[0];
        }
        assert!((last - 1e-3).abs() < 1e-9, "{last}");
    }

    #[test]
    fn rejects_mismatch_and_non_finite() {
        let cfg = AdamConfig::default();
        let mut p = one(0.0);
        let mut state = AdamState::<f64>::new(&[&[1]]);
        let two = Tensor::vector(vec![1.0, 2.0]).unwrap();
        assert!(adam_step(&mut [&mut p], &[two], &mut state, 0.1, &cfg).is_err());
        assert!(adam_step(&mut [&mut p], &[], &mut state, 0.1, &cfg).is_err());
        let bad = Tensor::from_parts_unchecked(vec![1], vec![f64::NAN]);
        assert!(adam_step(&mut [&mut p], &[bad], &mut state, 0.1, &cfg).is_err());
        assert_eq!(state.step(), 0);
    }
}
