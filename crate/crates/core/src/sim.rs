//! Single-qubit statevector simulation.
//!
//! Rotation gates use the half-angle convention `R_a(θ) = exp(-i θ σ_a / 2)`,
//! so every generator has eigenvalues `±1/2`. The shift-rule constants in
//! [`crate::grad`] depend on this.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Normalized pair of amplitudes `amp0 |0⟩ + amp1 |1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector<T> {
    amp0: Complex<T>,
    amp1: Complex<T>,
}

impl<T: Scalar> StateVector<T> {
    /// `|0⟩`
    pub fn zero() -> Self {
        Self {
            amp0: Complex::new(T::one(), T::zero()),
            amp1: Complex::new(T::zero(), T::zero()),
        }
    }

    /// `|1⟩`
    pub fn one() -> Self {
        Self {
            amp0: Complex::new(T::zero(), T::zero()),
            amp1: Complex::new(T::one(), T::zero()),
        }
    }

    /// Builds a state from raw amplitudes, rejecting inputs whose norm is off
    /// by more than `1e-10`.
    pub fn new(amp0: Complex<T>, amp1: Complex<T>) -> Result<Self> {
        let state = Self { amp0, amp1 };
        let norm = state.norm_sqr().as_f64();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized(norm));
        }
        Ok(state)
    }

    pub fn amp0(&self) -> Complex<T> {
        self.amp0
    }

    pub fn amp1(&self) -> Complex<T> {
        self.amp1
    }

    pub fn norm_sqr(&self) -> T {
        self.amp0.norm_sqr() + self.amp1.norm_sqr()
    }

    /// Probability of measuring `|0⟩`.
    pub fn prob0(&self) -> T {
        self.amp0.norm_sqr()
    }

    pub fn apply(&self, gate: &RotationGate<T>) -> Self {
        let [[a, b], [c, d]] = gate.matrix();
        Self {
            amp0: a * self.amp0 + b * self.amp1,
            amp1: c * self.amp0 + d * self.amp1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// `exp(-i · angle · σ_axis / 2)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationGate<T> {
    pub axis: Axis,
    pub angle: T,
}

impl<T: Scalar> RotationGate<T> {
    pub fn new(axis: Axis, angle: T) -> Self {
        Self { axis, angle }
    }

    pub fn rx(angle: T) -> Self {
        Self::new(Axis::X, angle)
    }

    pub fn ry(angle: T) -> Self {
        Self::new(Axis::Y, angle)
    }

    pub fn rz(angle: T) -> Self {
        Self::new(Axis::Z, angle)
    }

    /// Row-major 2×2 unitary.
    pub fn matrix(&self) -> [[Complex<T>; 2]; 2] {
        let half = self.angle / (T::one() + T::one());
        let (s, c) = half.sin_cos();
        let zero = T::zero();
        match self.axis {
            Axis::X => [
                [Complex::new(c, zero), Complex::new(zero, -s)],
                [Complex::new(zero, -s), Complex::new(c, zero)],
            ],
            Axis::Y => [
                [Complex::new(c, zero), Complex::new(-s, zero)],
                [Complex::new(s, zero), Complex::new(c, zero)],
            ],
            Axis::Z => [
                [Complex::new(c, -s), Complex::new(zero, zero)],
                [Complex::new(zero, zero), Complex::new(c, s)],
            ],
        }
    }
}

/// Raw Z-basis counts from one measurement batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementResult {
    n0: u64,
    n1: u64,
}

impl MeasurementResult {
    pub fn new(n0: u64, n1: u64, n_shots: u64) -> Result<Self> {
        if n_shots == 0 {
            return Err(Error::ZeroShots);
        }
        if n0.checked_add(n1) != Some(n_shots) {
            return Err(Error::InvalidCounts { n0, n1, n_shots });
        }
        Ok(Self { n0, n1 })
    }

    pub fn n0(&self) -> u64 {
        self.n0
    }

    pub fn n1(&self) -> u64 {
        self.n1
    }

    pub fn n_shots(&self) -> u64 {
        self.n0 + self.n1
    }
}

pub fn apply_rotation<T: Scalar>(state: &StateVector<T>, gate: &RotationGate<T>) -> StateVector<T> {
    state.apply(gate)
}

/// Applies `gates` in order to `|0⟩`.
pub fn prepare<T: Scalar>(gates: &[RotationGate<T>]) -> StateVector<T> {
    gates.iter().fold(StateVector::zero(), |s, g| s.apply(g))
}

/// `|amp0|² − |amp1|²`
pub fn exact_expectation_z<T: Scalar>(state: &StateVector<T>) -> T {
    state.amp0.norm_sqr() - state.amp1.norm_sqr()
}

/// Draws `n_shots` Z-basis measurements as one binomial sample.
pub fn sample_counts<T: Scalar, R: Rng + ?Sized>(
    state: &StateVector<T>,
    n_shots: u64,
    rng: &mut R,
) -> Result<MeasurementResult> {
    if n_shots == 0 {
        return Err(Error::ZeroShots);
    }
    let p0 = state.prob0().as_f64().clamp(0.0, 1.0);
    let n0 = Binomial::new(n_shots, p0).expect("p0 is clamped to [0, 1]").sample(rng);
    Ok(MeasurementResult { n0, n1: n_shots - n0 })
}

/// `(n0 − n1) / n_shots`
pub fn estimate_b<T: Scalar>(result: &MeasurementResult) -> T {
    let n0 = T::of(result.n0 as f64);
    let n1 = T::of(result.n1 as f64);
    (n0 - n1) / T::of(result.n_shots() as f64)
}
