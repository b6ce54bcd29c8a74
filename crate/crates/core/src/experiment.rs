//! End-to-end experiments: the shift-rule correction study, the `sin 2x`
//! regression with repeated-prediction statistics, and the gradient check.
//!
//! Everything here runs in `f64` and writes plot-ready CSV.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grad::{analytic_single_layer_gradient, fd_partial, figure1_discrepancy, psr_gradient};
use crate::model::{estimate, Executor, ExecutorConfig, Model};
use crate::optim::{train_adam, train_cmaes, CmaConfig, Dataset, Reduction, TrainConfig, TrainReport};
use crate::rng::{EvalTag, Purpose};

/// Offset added to predictions and to the law before normalizing.
pub const NORMALIZATION_OFFSET: f64 = 10.0;

/// Constant `c` in `ŷ = (⟨B⟩ − c)²` for the correction study.
pub const FIGURE1_C: f64 = 0.2;

/// `n` equally spaced points on `[−1, 1]`, endpoints included; `[0]` for `n = 1`.
pub fn linspace(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| (2 * i) as f64 / (n - 1) as f64 - 1.0).collect(),
    }
}

/// `y = sin 2x`
pub fn sin2x(x: f64) -> f64 {
    (2.0 * x).sin()
}

/// Training set on [`linspace`] with targets `law(x)`.
pub fn make_dataset(n_data: usize, law: impl Fn(f64) -> f64) -> Result<Dataset<f64>> {
    if n_data == 0 {
        return Err(Error::EmptyDataset);
    }
    let xs = linspace(n_data);
    let ys = xs.iter().map(|&x| law(x)).collect();
    Dataset::new(xs, ys)
}

/// `θ₀` uniform on `[−π, π]`, drawn from the master seed.
pub fn initial_params(n_params: usize, master_seed: u64) -> Vec<f64> {
    let mut rng = EvalTag::new(Purpose::Init).stream(master_seed);
    (0..n_params).map(|_| rng.random_range(-PI..PI)).collect()
}

/// Per-point mean and standard deviation of repeated shot-based predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionStats {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    /// Population standard deviation of the repetitions around their mean.
    pub std: Vec<f64>,
    pub n_reps: usize,
}

/// Evaluates the model `n_reps` times at every grid point.
/// Repetition `r` at point `i` uses the tag `(Prediction, epoch = r, data = i)`.
pub fn prediction_stats<E: Executor<f64> + ?Sized>(
    model: &Model<f64>,
    exec: &E,
    grid: &[f64],
    n_reps: usize,
) -> Result<PredictionStats> {
    if n_reps == 0 {
        return Err(Error::InvalidConfig("n_reps must be >= 1".into()));
    }
    let mut mean = Vec::with_capacity(grid.len());
    let mut std = Vec::with_capacity(grid.len());
    for (i, &x) in grid.iter().enumerate() {
        let samples = (0..n_reps)
            .map(|r| {
                let tag = EvalTag::new(Purpose::Prediction).epoch(r as u64).data(i as u64);
                estimate(model, x, exec, &tag)
            })
            .collect::<Result<Vec<_>>>()?;
        let m = samples.iter().sum::<f64>() / n_reps as f64;
        let var = samples.iter().map(|s| (s - m).powi(2)).sum::<f64>() / n_reps as f64;
        mean.push(m);
        std.push(var.sqrt());
    }
    Ok(PredictionStats {
        grid: grid.to_vec(),
        mean,
        std,
        n_reps,
    })
}

/// Noise-free prediction on `grid`.
pub fn exact_curve(model: &Model<f64>, grid: &[f64]) -> Vec<f64> {
    grid.iter().map(|&x| model.exact_value(x)).collect()
}

/// Predictions divided by the law after shifting both by `k`:
/// `(value + k) / (law(x) + k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedView {
    pub k_offset: f64,
    pub normalized_mean: Vec<f64>,
    pub normalized_band_low: Vec<f64>,
    pub normalized_band_high: Vec<f64>,
}

impl NormalizedView {
    pub fn new(stats: &PredictionStats, law: impl Fn(f64) -> f64, k_offset: f64) -> Result<Self> {
        let denominators = stats
            .grid
            .iter()
            .map(|&x| {
                let d = law(x) + k_offset;
                if d > 0.0 {
                    Ok(d)
                } else {
                    Err(Error::InvalidConfig(format!(
                        "law + k must be positive, got {d} at x = {x}"
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let norm = |values: Vec<f64>| -> Vec<f64> {
            values
                .iter()
                .zip(&denominators)
                .map(|(v, d)| (v + k_offset) / d)
                .collect()
        };
        let low = stats.mean.iter().zip(&stats.std).map(|(m, s)| m - s).collect();
        let high = stats.mean.iter().zip(&stats.std).map(|(m, s)| m + s).collect();
        Ok(Self {
            k_offset,
            normalized_mean: norm(stats.mean.clone()),
            normalized_band_low: norm(low),
            normalized_band_high: norm(high),
        })
    }

    /// Undoes the normalization of the mean curve.
    pub fn reconstruct_means(&self, grid: &[f64], law: impl Fn(f64) -> f64) -> Vec<f64> {
        self.normalized_mean
            .iter()
            .zip(grid)
            .map(|(n, &x)| n * (law(x) + self.k_offset) - self.k_offset)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    PsrAdam,
    Cmaes,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::PsrAdam => "psr_adam",
            OptimizerKind::Cmaes => "cmaes",
        }
    }
}

/// Settings for the regression experiment. Defaults: `L = 3`, `N_data = 25`,
/// `N_shots = 1024`, `η = 0.1`, `N_epochs = 100`, `ε_J = 5e-3`, 100 grid
/// points × 100 repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n_layers: usize,
    pub n_data: usize,
    pub n_shots: u64,
    pub eta: f64,
    pub n_epochs: u64,
    pub eps_j: f64,
    pub master_seed: u64,
    /// Train on exact expectations instead of shot estimates.
    pub exact: bool,
    pub n_grid: usize,
    pub n_reps: usize,
    pub reduction: Reduction,
    pub cma_sigma0: f64,
}

pub const DEFAULT_SEED: u64 = 20230214;

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_layers: 3,
            n_data: 25,
            n_shots: 1024,
            eta: 0.1,
            n_epochs: 100,
            eps_j: 5e-3,
            master_seed: DEFAULT_SEED,
            exact: false,
            n_grid: 100,
            n_reps: 100,
            reduction: Reduction::Mean,
            cma_sigma0: 1.0,
        }
    }
}

impl ExperimentConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            n_epochs: self.n_epochs,
            eta: self.eta,
            eps_j: self.eps_j,
            reduction: self.reduction,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        let checks = [
            (self.n_layers == 0, "n_layers must be ≥ 1"),
            (self.n_data == 0, "n_data must be ≥ 1"),
            (self.n_shots == 0, "n_shots must be ≥ 1"),
            (self.n_grid == 0, "n_grid must be ≥ 1"),
            (self.n_reps == 0, "n_reps must be ≥ 1"),
            (!(self.cma_sigma0 > 0.0), "cma_sigma0 must be > 0"),
        ];
        match checks.iter().find(|(bad, _)| *bad) {
            Some((_, msg)) => Err(Error::InvalidConfig((*msg).into())),
            None => Ok(()),
        }
    }

    /// Executor used for training.
    pub fn training_executor(&self) -> Result<ExecutorConfig> {
        if self.exact {
            Ok(ExecutorConfig::exact())
        } else {
            ExecutorConfig::shots(self.n_shots, self.master_seed)
        }
    }

    /// Shot-based executor for the repeated-prediction protocol.
    pub fn prediction_executor(&self) -> Result<ExecutorConfig> {
        ExecutorConfig::shots(self.n_shots, self.master_seed)
    }
}

/// Everything one optimizer run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionOutcome {
    pub optimizer: OptimizerKind,
    pub dataset: Dataset<f64>,
    pub theta0: Vec<f64>,
    pub report: TrainReport<f64>,
    /// Model at `θ_best`.
    pub model: Model<f64>,
    pub stats: PredictionStats,
    /// Exact-mode prediction of the trained model on the same grid.
    pub theoretical: Vec<f64>,
    pub view: NormalizedView,
}

/// Trains with `optimizer` on `sin 2x`, then runs the prediction protocol at
/// `θ_best` and the noise-free curve on the same grid.
pub fn run_regression(config: &ExperimentConfig, optimizer: OptimizerKind) -> Result<RegressionOutcome> {
    config.validate()?;
    let dataset = make_dataset(config.n_data, sin2x)?;
    let theta0 = initial_params(3 * config.n_layers, config.master_seed);
    let model = Model::reuploading(config.n_layers, theta0.clone())?;
    let exec = config.training_executor()?;
    let train = config.train_config();
    let report = match optimizer {
        OptimizerKind::PsrAdam => train_adam(&model, &dataset, &exec, &train)?,
        OptimizerKind::Cmaes => {
            let cma = CmaConfig {
                sigma0: config.cma_sigma0,
                population: None,
                seed: EvalTag::new(Purpose::CmaSampling).seed(config.master_seed),
            };
            train_cmaes(&model, &dataset, &exec, &train, &cma)?
        }
    };
    let model = model.with_params(&report.theta_best)?;
    let (stats, theoretical, view) = evaluate_predictions(&model, config)?;
    Ok(RegressionOutcome {
        optimizer,
        dataset,
        theta0,
        report,
        model,
        stats,
        theoretical,
        view,
    })
}

/// Prediction protocol for a trained model: shot statistics on the grid,
/// the noise-free curve, and the view normalized against `sin 2x`.
pub fn evaluate_predictions(
    model: &Model<f64>,
    config: &ExperimentConfig,
) -> Result<(PredictionStats, Vec<f64>, NormalizedView)> {
    let grid = linspace(config.n_grid);
    let stats = prediction_stats(model, &config.prediction_executor()?, &grid, config.n_reps)?;
    let theoretical = exact_curve(model, &grid);
    let view = NormalizedView::new(&stats, sin2x, NORMALIZATION_OFFSET)?;
    Ok((stats, theoretical, view))
}

/// Runs both optimizers from the same `θ₀` and training set.
pub fn run_regression_experiment(config: &ExperimentConfig) -> Result<Vec<RegressionOutcome>> {
    [OptimizerKind::PsrAdam, OptimizerKind::Cmaes]
        .into_iter()
        .map(|kind| run_regression(config, kind))
        .collect()
}

/// Fraction of grid points where `curve` lies within `mean ± std`.
pub fn band_coverage(stats: &PredictionStats, curve: &[f64]) -> f64 {
    let inside = stats
        .mean
        .iter()
        .zip(&stats.std)
        .zip(curve)
        .filter(|((m, s), c)| (*c - *m).abs() <= **s)
        .count();
    inside as f64 / stats.grid.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub x: f64,
    pub mean_shots: f64,
    pub std_shots: f64,
    pub exact_theoretical: f64,
    pub normalized_mean: f64,
    pub normalized_low: f64,
    pub normalized_high: f64,
}

pub fn prediction_rows(outcome: &RegressionOutcome) -> Vec<PredictionRow> {
    prediction_table(&outcome.stats, &outcome.theoretical, &outcome.view)
}

pub fn prediction_table(s: &PredictionStats, theoretical: &[f64], v: &NormalizedView) -> Vec<PredictionRow> {
    (0..s.grid.len())
        .map(|i| PredictionRow {
            x: s.grid[i],
            mean_shots: s.mean[i],
            std_shots: s.std[i],
            exact_theoretical: theoretical[i],
            normalized_mean: v.normalized_mean[i],
            normalized_low: v.normalized_band_low[i],
            normalized_high: v.normalized_band_high[i],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure1Row {
    pub theta_id: usize,
    pub x: f64,
    pub discrepancy_corrected: f64,
    pub discrepancy_uncorrected: f64,
}

/// Default grid for the correction study: 101 points on `[−1, 1]`, including 0.
pub fn figure1_grid() -> Vec<f64> {
    linspace(101)
}

/// `θ` values for the correction study, uniform on `[−π, π]`.
pub fn figure1_thetas(n_thetas: usize, seed: u64) -> Vec<f64> {
    let mut rng = EvalTag::new(Purpose::Init).param(1).stream(seed);
    (0..n_thetas).map(|_| rng.random_range(-PI..PI)).collect()
}

/// Discrepancies of the corrected and naive rules for `n_thetas` random `θ`.
pub fn run_figure1_experiment(n_thetas: usize, x_grid: &[f64], seed: u64) -> Result<Vec<Figure1Row>> {
    if n_thetas == 0 {
        return Err(Error::InvalidConfig("n_thetas must be ≥ 1".into()));
    }
    let mut rows = Vec::with_capacity(n_thetas * x_grid.len());
    for (theta_id, theta) in figure1_thetas(n_thetas, seed).into_iter().enumerate() {
        let corrected = figure1_discrepancy(theta, x_grid, FIGURE1_C, true);
        let uncorrected = figure1_discrepancy(theta, x_grid, FIGURE1_C, false);
        rows.extend(
            x_grid
                .iter()
                .zip(corrected.into_iter().zip(uncorrected))
                .map(|(&x, (c, u))| Figure1Row {
                    theta_id,
                    x,
                    discrepancy_corrected: c,
                    discrepancy_uncorrected: u,
                }),
        );
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckRow {
    pub param_index: usize,
    pub psr: f64,
    pub fd: f64,
    /// Closed form, available for one-layer models only.
    pub analytic: Option<f64>,
    pub abs_err_psr_fd: f64,
}

/// Finite-difference step used by the gradient check.
pub const GRADCHECK_STEP: f64 = 1e-5;

/// Shift-rule partials against central differences on `trials` random
/// `(θ, x)`, `θ ~ U[−π, π]`, `x ~ U[−1, 1]`. One row per parameter per trial.
pub fn run_gradcheck(trials: usize, n_layers: usize, seed: u64) -> Result<Vec<GradcheckRow>> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be ≥ 1".into()));
    }
    if n_layers == 0 {
        return Err(Error::InvalidConfig("n_layers must be ≥ 1".into()));
    }
    let exec = ExecutorConfig::exact();
    let p = 3 * n_layers;
    let mut rows = Vec::with_capacity(trials * p);
    for trial in 0..trials {
        let mut rng = EvalTag::new(Purpose::Check).epoch(trial as u64).stream(seed);
        let params: Vec<f64> = (0..p).map(|_| rng.random_range(-PI..PI)).collect();
        let x = rng.random_range(-1.0..=1.0);
        let model = Model::reuploading(n_layers, params.clone())?;
        let g = psr_gradient(&model, x, &exec, &EvalTag::new(Purpose::Check))?;
        let analytic = (n_layers == 1).then(|| analytic_single_layer_gradient([params[0], params[1], params[2]], x));
        for (i, psr) in g.partials.into_iter().enumerate() {
            let fd = fd_partial(&model, x, i, GRADCHECK_STEP)?;
            rows.push(GradcheckRow {
                param_index: i,
                psr,
                fd,
                analytic: analytic.map(|a| a[i]),
                abs_err_psr_fd: (psr - fd).abs(),
            });
        }
    }
    Ok(rows)
}

/// Serializes `rows` as CSV with a header line.
pub fn write_csv<W: Write, R: Serialize>(writer: W, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_policy() {
        assert_eq!(linspace(3), vec![-1.0, 0.0, 1.0]);
        assert_eq!(linspace(1), vec![0.0]);
        let g = linspace(25);
        assert_eq!(g.len(), 25);
        assert_eq!((g[0], g[24], g[12]), (-1.0, 1.0, 0.0));
        for w in g.windows(2) {
            assert!((w[1] - w[0] - 2.0 / 24.0).abs() < 1e-15);
        }
        assert!(figure1_grid().contains(&0.0));
    }

    #[test]
    fn sin2x_dataset() {
        let d = make_dataset(3, sin2x).unwrap();
        assert_eq!(d.xs(), &[-1.0, 0.0, 1.0]);
        assert!((d.ys()[0] + 0.9093).abs() < 1e-4);
        assert_eq!(d.ys()[1], 0.0);
        assert!((d.ys()[2] - (2.0f64).sin()).abs() < 1e-15);
        assert!(matches!(make_dataset(0, sin2x), Err(Error::EmptyDataset)));
        assert_eq!(make_dataset(1, sin2x).unwrap().xs(), &[0.0]);
    }

    #[test]
    fn initial_params_are_seeded_and_bounded() {
        let a = initial_params(9, 1);
        assert_eq!(a, initial_params(9, 1));
        assert_ne!(a, initial_params(9, 2));
        assert!(a.iter().all(|t| (-PI..PI).contains(t)));
    }

    #[test]
    fn single_repetition_has_zero_spread() {
        let m = Model::reuploading(1, vec![1.0, 0.2, 0.0]).unwrap();
        let exec = ExecutorConfig::shots(256, 4).unwrap();
        let s = prediction_stats(&m, &exec, &linspace(10), 1).unwrap();
        assert!(s.std.iter().all(|&v| v == 0.0));
        assert!(prediction_stats(&m, &exec, &linspace(10), 0).is_err());
    }

    #[test]
    fn repetition_means_converge_to_exact() {
        let m = Model::reuploading(2, vec![0.9, -0.1, 0.4, 1.3, 0.5, -0.6]).unwrap();
        let exec = ExecutorConfig::shots(1024, 8).unwrap();
        let grid = linspace(100);
        let s = prediction_stats(&m, &exec, &grid, 100).unwrap();
        let exact = exact_curve(&m, &grid);
        let ok = (0..grid.len())
            .filter(|&i| (s.mean[i] - exact[i]).abs() <= 5.0 * s.std[i] / 10.0 + 1e-12)
            .count();
        assert!(ok >= 95, "{ok}");
    }

    #[test]
    fn perfect_model_normalizes_to_one() {
        // ⟨B⟩ = cos x exactly matches the law cos x
        let m = Model::reuploading(1, vec![1.0, 0.0, 0.0]).unwrap();
        let grid = linspace(100);
        let curve = exact_curve(&m, &grid);
        let stats = PredictionStats {
            grid: grid.clone(),
            mean: curve,
            std: vec![0.0; 100],
            n_reps: 1,
        };
        let view = NormalizedView::new(&stats, f64::cos, NORMALIZATION_OFFSET).unwrap();
        assert!(view.normalized_mean.iter().all(|v| (v - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn normalized_view_round_trips() {
        let grid = linspace(100);
        let stats = PredictionStats {
            grid: grid.clone(),
            mean: grid.iter().map(|x| 0.8 * (1.7 * x).sin() + 0.05).collect(),
            std: vec![0.03; 100],
            n_reps: 100,
        };
        let view = NormalizedView::new(&stats, sin2x, 10.0).unwrap();
        for (a, b) in view.reconstruct_means(&grid, sin2x).iter().zip(&stats.mean) {
            assert!((a - b).abs() <= 1e-12);
        }
        for i in 0..100 {
            assert!(view.normalized_band_low[i] <= view.normalized_mean[i]);
            assert!(view.normalized_mean[i] <= view.normalized_band_high[i]);
        }
        assert!(NormalizedView::new(&stats, sin2x, -0.5).is_err());
    }

    #[test]
    fn figure1_rows() {
        let grid = figure1_grid();
        let rows = run_figure1_experiment(5, &grid, 3).unwrap();
        assert_eq!(rows.len(), 5 * grid.len());
        for id in 0..5 {
            let mine: Vec<_> = rows.iter().filter(|r| r.theta_id == id).collect();
            assert!(mine.iter().all(|r| r.discrepancy_corrected <= 1e-12));
            assert!(mine.iter().any(|r| r.discrepancy_uncorrected >= 1e-3));
            let zero = mine.iter().find(|r| r.x == 0.0).unwrap();
            assert_eq!(zero.discrepancy_corrected, 0.0);
            assert_eq!(zero.discrepancy_uncorrected, 0.0);
        }
        assert!(run_figure1_experiment(0, &grid, 3).is_err());
    }

    #[test]
    fn gradcheck_shape() {
        let rows = run_gradcheck(10, 1, 5).unwrap();
        assert_eq!(rows.len(), 30);
        assert!(rows.iter().all(|r| r.analytic.is_some() && r.abs_err_psr_fd <= 1e-6));
        let rows = run_gradcheck(4, 2, 5).unwrap();
        assert_eq!(rows.len(), 24);
        assert!(rows.iter().all(|r| r.analytic.is_none()));
        assert!(run_gradcheck(0, 1, 5).is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = vec![GradcheckRow {
            param_index: 2,
            psr: 0.5,
            fd: 0.25,
            analytic: None,
            abs_err_psr_fd: 0.25,
        }];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "param_index,psr,fd,analytic,abs_err_psr_fd\n2,0.5,0.25,,0.25\n"
        );
    }

    #[test]
    fn small_regression_runs_end_to_end() {
        let cfg = ExperimentConfig {
            n_layers: 1,
            n_data: 5,
            n_epochs: 3,
            n_grid: 7,
            n_reps: 3,
            n_shots: 128,
            ..Default::default()
        };
        let outs = run_regression_experiment(&cfg).unwrap();
        assert_eq!(outs.len(), 2);
        assert_eq!(outs[0].theta0, outs[1].theta0);
        for o in &outs {
            assert_eq!(prediction_rows(o).len(), 7);
            assert_eq!(o.model.params(), o.report.theta_best.as_slice());
        }
        assert_eq!(run_regression(&cfg, OptimizerKind::PsrAdam).unwrap(), outs[0]);
    }
}
