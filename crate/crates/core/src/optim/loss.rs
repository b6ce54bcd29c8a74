use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grad::{psr_gradient, GradientReport};
use crate::model::{estimate, Executor, Model};
use crate::rng::EvalTag;
use crate::scalar::Scalar;

/// Paired features and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    xs: Vec<T>,
    ys: Vec<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(xs: Vec<T>, ys: Vec<T>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        Ok(Self { xs, ys })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn xs(&self) -> &[T] {
        &self.xs
    }

    pub fn ys(&self) -> &[T] {
        &self.ys
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }
}

/// How per-point squared errors are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    /// `(1/N) Σ_j`
    #[default]
    Mean,
    /// `Σ_j`
    Sum,
}

impl Reduction {
    fn factor<T: Scalar>(self, n: usize) -> T {
        match self {
            Reduction::Mean => T::one() / T::of(n as f64),
            Reduction::Sum => T::one(),
        }
    }
}

/// Squared-error loss over `data`; one execution per data point.
/// The data index of `tag` is overwritten per point.
pub fn loss<T: Scalar, E: Executor<T> + ?Sized>(
    model: &Model<T>,
    data: &Dataset<T>,
    exec: &E,
    tag: &EvalTag,
    reduction: Reduction,
) -> Result<T> {
    let mut total = T::zero();
    for (j, (x, y)) in data.iter().enumerate() {
        let b = estimate(model, x, exec, &tag.data(j as u64))?;
        total = total + (b - y) * (b - y);
    }
    Ok(total * reduction.factor(data.len()))
}

/// Mean squared error `J = (1/N) Σ_j (⟨B⟩_j − y_j)²`.
pub fn mse_loss<T: Scalar, E: Executor<T> + ?Sized>(
    model: &Model<T>,
    data: &Dataset<T>,
    exec: &E,
    tag: &EvalTag,
) -> Result<T> {
    loss(model, data, exec, tag, Reduction::Mean)
}

/// `∂J/∂θ_i = Σ_j 2(⟨B⟩_j − y_j)·∂⟨B⟩_j/∂θ_i`, reduced per `reduction`.
///
/// Per data point: one base estimate, then `2p` shifted estimates, for
/// `(2p + 1)·N` executions in total. Sums run in data order.
pub fn loss_gradient<T: Scalar, E: Executor<T> + ?Sized>(
    model: &Model<T>,
    data: &Dataset<T>,
    exec: &E,
    tag: &EvalTag,
    reduction: Reduction,
) -> Result<GradientReport<T>> {
    let two = T::of(2.0);
    let mut partials = vec![T::zero(); model.n_params()];
    let mut n_circuit_evals = 0;
    for (j, (x, y)) in data.iter().enumerate() {
        let point = tag.data(j as u64);
        let b = estimate(model, x, exec, &point)?;
        let db = psr_gradient(model, x, exec, &point)?;
        n_circuit_evals += 1 + db.n_circuit_evals;
        let residual = two * (b - y);
        for (acc, d) in partials.iter_mut().zip(db.partials) {
            *acc = *acc + residual * d;
        }
    }
    let factor = reduction.factor::<T>(data.len());
    partials.iter_mut().for_each(|p| *p = *p * factor);
    Ok(GradientReport {
        partials,
        n_circuit_evals,
    })
}

/// Gradient of [`mse_loss`].
pub fn mse_gradient<T: Scalar, E: Executor<T> + ?Sized>(
    model: &Model<T>,
    data: &Dataset<T>,
    exec: &E,
    tag: &EvalTag,
) -> Result<GradientReport<T>> {
    loss_gradient(model, data, exec, tag, Reduction::Mean)
}
