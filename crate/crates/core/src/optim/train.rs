use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::cmaes::CmaEs;
use super::loss::{loss, loss_gradient, Dataset, Reduction};
use crate::error::{Error, Result};
use crate::model::{Executor, Model};
use crate::rng::{EvalTag, Purpose};
use crate::scalar::Scalar;

/// Training hyperparameters. Defaults are `N_epochs = 100`, `η = 0.1`,
/// `ε_J = 5e-3` with mean reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Epoch limit for Adam, generation limit for CMA-ES.
    pub n_epochs: u64,
    pub eta: f64,
    pub eps_j: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub reduction: Reduction,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_epochs: 100,
            eta: 0.1,
            eps_j: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            reduction: Reduction::Mean,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_epochs == 0 {
            return Err(Error::InvalidConfig("n_epochs must be ≥ 1".into()));
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidConfig("eta must be > 0".into()));
        }
        if self.eps_j.is_nan() || self.eps_j < 0.0 {
            return Err(Error::InvalidConfig("eps_j must be ≥ 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidConfig("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("Adam epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// CMA-ES specific settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CmaConfig {
    pub sigma0: f64,
    /// `None` selects `4 + ⌊3 ln p⌋`.
    pub population: Option<usize>,
    pub seed: u64,
}

impl Default for CmaConfig {
    fn default() -> Self {
        Self {
            sigma0: 1.0,
            population: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Threshold,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport<T> {
    /// Recorded loss per epoch (per generation for CMA-ES).
    pub loss_history: Vec<T>,
    /// Parameters with the lowest recorded loss.
    pub theta_best: Vec<T>,
    pub epochs_run: u64,
    pub total_circuit_evals: u64,
    pub stop_reason: StopReason,
}

#[derive(Debug)]
struct Tracker<T> {
    history: Vec<T>,
    best: Option<(T, Vec<T>)>,
}

impl<T: Scalar> Tracker<T> {
    fn new() -> Self {
        Self {
            history: Vec::new(),
            best: None,
        }
    }

    fn record(&mut self, loss: T, theta: &[T]) {
        self.history.push(loss);
        let improves = match &self.best {
            Some((best, _)) => loss < *best,
            None => true,
        };
        if improves {
            self.best = Some((loss, theta.to_vec()));
        }
    }

    fn finish(self, fallback: &[T], total_circuit_evals: u64, stop_reason: StopReason) -> TrainReport<T> {
        TrainReport {
            epochs_run: self.history.len() as u64,
            theta_best: self.best.map_or_else(|| fallback.to_vec(), |(_, t)| t),
            loss_history: self.history,
            total_circuit_evals,
            stop_reason,
        }
    }
}

/// Full-batch shift-rule gradient descent with Adam.
///
/// Each epoch computes the loss gradient at the current parameters
/// (`(2p + 1)·N` executions), takes one Adam step, then records the loss at
/// the new parameters (`N` executions). Stops once the recorded loss is at
/// most `ε_J`.
pub fn train_adam<T: Scalar, E: Executor<T> + ?Sized>(
    model: &Model<T>,
    data: &Dataset<T>,
    exec: &E,
    config: &TrainConfig,
) -> Result<TrainReport<T>> {
    config.validate()?;
    let eps_j = T::of(config.eps_j);
    let mut adam = AdamState::with_moments(
        model.n_params(),
        T::of(config.eta),
        T::of(config.beta1),
        T::of(config.beta2),
        T::of(config.epsilon),
    );
    let mut current = model.clone();
    let mut theta = model.params().to_vec();
    let mut tracker = Tracker::new();
    let mut evals = 0;

    for epoch in 0..config.n_epochs {
        let tag = EvalTag::new(Purpose::Gradient).epoch(epoch);
        let grad = loss_gradient(&current, data, exec, &tag, config.reduction)?;
        evals += grad.n_circuit_evals;
        adam.step(&mut theta, &grad.partials)?;
        current.set_params(&theta)?;

        let tag = EvalTag::new(Purpose::Loss).epoch(epoch);
        let j = loss(&current, data, exec, &tag, config.reduction)?;
        evals += data.len() as u64;
        tracker.record(j, &theta);
        if j <= eps_j {
            return Ok(tracker.finish(&theta, evals, StopReason::Threshold));
        }
    }
    Ok(tracker.finish(&theta, evals, StopReason::MaxEpochs))
}

/// Gradient-free baseline: CMA-ES on the loss as a black box.
///
/// Each generation evaluates `λ` candidates (one loss each, `N` executions
/// per loss) and records the best candidate's loss.
pub fn train_cmaes<T: Scalar, E: Executor<T> + ?Sized>(
    model: &Model<T>,
    data: &Dataset<T>,
    exec: &E,
    config: &TrainConfig,
    cma: &CmaConfig,
) -> Result<TrainReport<T>> {
    config.validate()?;
    let eps_j = T::of(config.eps_j);
    let x0: Vec<f64> = model.params().iter().map(|p| p.as_f64()).collect();
    let mut es = CmaEs::new(&x0, cma.sigma0, cma.population, cma.seed)?;
    let mut current = model.clone();
    let mut tracker = Tracker::new();
    let mut evals = 0;

    for generation in 0..config.n_epochs {
        let candidates = es.ask();
        let mut fitness = Vec::with_capacity(candidates.len());
        let mut gen_best: Option<(T, Vec<T>)> = None;
        for (k, candidate) in candidates.iter().enumerate() {
            let theta: Vec<T> = candidate.iter().map(|&c| T::of(c)).collect();
            current.set_params(&theta)?;
            let tag = EvalTag::new(Purpose::CmaFitness).epoch(generation).param(k as u64);
            let j = loss(&current, data, exec, &tag, config.reduction)?;
            evals += data.len() as u64;
            fitness.push(j.as_f64());
            if gen_best.as_ref().is_none_or(|(b, _)| j < *b) {
                gen_best = Some((j, theta));
            }
        }
        es.tell(&fitness)?;
        let (j, theta) = gen_best.expect("population is non-empty");
        tracker.record(j, &theta);
        if j <= eps_j {
            return Ok(tracker.finish(model.params(), evals, StopReason::Threshold));
        }
    }
    Ok(tracker.finish(model.params(), evals, StopReason::MaxEpochs))
}
