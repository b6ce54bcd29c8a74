use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adam moment estimates and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
    pub eta: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> AdamState<T> {
    /// Zeroed moments with `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`.
    pub fn new(n_params: usize, eta: T) -> Self {
        Self::with_moments(n_params, eta, T::of(0.9), T::of(0.999), T::of(1e-8))
    }

    pub fn with_moments(n_params: usize, eta: T, beta1: T, beta2: T, epsilon: T) -> Self {
        Self {
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            t: 0,
            eta,
            beta1,
            beta2,
            epsilon,
        }
    }

    /// One update of `theta` in place.
    pub fn step(&mut self, theta: &mut [T], grad: &[T]) -> Result<()> {
        let n = self.m.len();
        for len in [theta.len(), grad.len()] {
            if len != n {
                return Err(Error::LengthMismatch { expected: n, got: len });
            }
        }
        self.t += 1;
        let one = T::one();
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let bias1 = one - self.beta1.powi(t);
        let bias2 = one - self.beta2.powi(t);
        for i in 0..n {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            theta[i] = theta[i] - self.eta * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Value-passing form of [`AdamState::step`].
pub fn adam_step<T: Scalar>(mut state: AdamState<T>, mut theta: Vec<T>, grad: &[T]) -> Result<(AdamState<T>, Vec<T>)> {
    state.step(&mut theta, grad)?;
    Ok((state, theta))
}
