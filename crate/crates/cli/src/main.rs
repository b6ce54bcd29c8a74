//! `qubit-psr`: train, check and reproduce the single-qubit re-uploading experiments.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage, configuration or IO error.

// `!(x > 0.0)` is used deliberately so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qubit_psr::experiment::{
    self, linspace, prediction_rows, run_figure1_experiment, run_gradcheck, run_regression, OptimizerKind,
    RegressionOutcome,
};
use qubit_psr::model::ModelFile;
use qubit_psr::ReuploadingModel;
use serde_json::json;

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "qubit-psr",
    version,
    about = "Parameter-shift-rule training of a single-qubit re-uploading circuit"
)]
struct Cli {
    #[command(flatten)]
    shared: SharedArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct SharedArgs {
    /// Master seed for every random draw
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of re-uploading layers
    #[arg(long, global = true)]
    layers: Option<usize>,

    /// Measurement shots per circuit execution
    #[arg(long, global = true)]
    shots: Option<u64>,

    /// Train on exact expectation values instead of shot estimates
    #[arg(long, global = true)]
    exact: bool,

    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// JSON object with settings; flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<u64>,

    /// Adam learning rate
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,

    /// Loss threshold that stops training
    #[arg(long, allow_negative_numbers = true)]
    eps_j: Option<f64>,

    /// Training points on [-1, 1]
    #[arg(long)]
    n_data: Option<usize>,

    /// Prediction grid points
    #[arg(long)]
    grid: Option<usize>,

    /// Prediction repetitions per grid point
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Adam,
    Cmaes,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train on y = sin 2x and write report.json, model.json and predictions.csv
    Train {
        #[command(flatten)]
        train: TrainArgs,

        #[arg(long, value_enum)]
        optimizer: Option<OptimizerArg>,
    },
    /// Compare shift-rule partials with central finite differences
    Gradcheck {
        #[arg(long, default_value_t = 200)]
        trials: usize,

        #[arg(long, default_value_t = 1e-6, allow_negative_numbers = true)]
        tolerance: f64,
    },
    /// Corrected vs uncorrected shift rule on RX(θ·x); writes figure1.csv
    Figure1 {
        #[arg(long, default_value_t = 5)]
        thetas: usize,

        /// Points on [-1, 1]
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Prediction statistics for a saved model; writes predictions.csv
    Predict {
        /// Model JSON written by `train`
        #[arg(long, value_name = "FILE")]
        model: PathBuf,

        #[arg(long)]
        grid: Option<usize>,

        #[arg(long)]
        reps: Option<usize>,
    },
    /// Train with both optimizers; writes psr_adam/ and cmaes/ under the output directory
    Compare {
        #[command(flatten)]
        train: TrainArgs,
    },
}

/// Failure classes mapped onto exit codes.
enum Outcome {
    Ok,
    CheckFailed(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn resolve(shared: &SharedArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(shared.config.as_deref())?;
    let e = &mut cfg.experiment;
    if let Some(seed) = shared.seed {
        e.master_seed = seed;
    }
    if let Some(layers) = shared.layers {
        e.n_layers = layers;
    }
    if let Some(shots) = shared.shots {
        e.n_shots = shots;
    }
    if shared.exact {
        e.exact = true;
    }
    if let Some(out) = &shared.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn apply_train_args(cfg: &mut RunConfig, args: &TrainArgs) {
    let e = &mut cfg.experiment;
    if let Some(v) = args.epochs {
        e.n_epochs = v;
    }
    if let Some(v) = args.eta {
        e.eta = v;
    }
    if let Some(v) = args.eps_j {
        e.eps_j = v;
    }
    if let Some(v) = args.n_data {
        e.n_data = v;
    }
    if let Some(v) = args.grid {
        e.n_grid = v;
    }
    if let Some(v) = args.reps {
        e.n_reps = v;
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let mut cfg = resolve(&cli.shared)?;
    match cli.command {
        Command::Train { train, optimizer } => {
            apply_train_args(&mut cfg, &train);
            if let Some(o) = optimizer {
                cfg.optimizer = match o {
                    OptimizerArg::Adam => OptimizerKind::PsrAdam,
                    OptimizerArg::Cmaes => OptimizerKind::Cmaes,
                };
            }
            cfg.experiment.validate()?;
            let outcome = run_regression(&cfg.experiment, cfg.optimizer)?;
            write_run(&cfg.out_dir, &cfg, &outcome)?;
            print_summary(&outcome);
        }
        Command::Compare { train } => {
            apply_train_args(&mut cfg, &train);
            cfg.experiment.validate()?;
            for kind in [OptimizerKind::PsrAdam, OptimizerKind::Cmaes] {
                let outcome = run_regression(&cfg.experiment, kind)?;
                let run_cfg = RunConfig {
                    optimizer: kind,
                    ..cfg.clone()
                };
                write_run(&cfg.out_dir.join(kind.name()), &run_cfg, &outcome)?;
                print_summary(&outcome);
            }
        }
        Command::Gradcheck { trials, tolerance } => {
            let rows = run_gradcheck(trials, cfg.experiment.n_layers, cfg.experiment.master_seed)?;
            write_csv(&cfg.out_dir, "gradcheck.csv", &rows)?;
            let worst = rows.iter().map(|r| r.abs_err_psr_fd).fold(0.0, f64::max);
            println!("{} partials checked, max |psr - fd| = {worst:e}", rows.len());
            if rows.iter().any(|r| !(r.abs_err_psr_fd <= tolerance)) {
                return Ok(Outcome::CheckFailed(format!(
                    "max |psr - fd| = {worst:e} exceeds tolerance {tolerance:e}"
                )));
            }
        }
        Command::Figure1 { thetas, points } => {
            if points == 0 {
                anyhow::bail!("points must be ≥ 1");
            }
            let rows = run_figure1_experiment(thetas, &linspace(points), cfg.experiment.master_seed)?;
            write_csv(&cfg.out_dir, "figure1.csv", &rows)?;
            let max_c = rows.iter().map(|r| r.discrepancy_corrected).fold(0.0, f64::max);
            let max_u = rows.iter().map(|r| r.discrepancy_uncorrected).fold(0.0, f64::max);
            println!("max discrepancy: corrected {max_c:e}, uncorrected {max_u:e}");
        }
        Command::Predict { model, grid, reps } => {
            if let Some(v) = grid {
                cfg.experiment.n_grid = v;
            }
            if let Some(v) = reps {
                cfg.experiment.n_reps = v;
            }
            cfg.experiment.validate()?;
            let text =
                fs::read_to_string(&model).with_context(|| format!("cannot read model file {}", model.display()))?;
            let file: ModelFile =
                serde_json::from_str(&text).with_context(|| format!("invalid model file {}", model.display()))?;
            let model: ReuploadingModel = file.into_model()?;
            let (stats, theoretical, view) = experiment::evaluate_predictions(&model, &cfg.experiment)?;
            let rows = experiment::prediction_table(&stats, &theoretical, &view);
            write_csv(&cfg.out_dir, "predictions.csv", &rows)?;
        }
    }
    Ok(Outcome::Ok)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write_csv<R: serde::Serialize>(dir: &Path, name: &str, rows: &[R]) -> Result<()> {
    create_dir(dir)?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    experiment::write_csv(BufWriter::new(file), rows).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<()> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_run(dir: &Path, cfg: &RunConfig, outcome: &RegressionOutcome) -> Result<()> {
    create_dir(dir)?;
    let r = &outcome.report;
    let report = json!({
        "loss_history": r.loss_history,
        "theta_best": r.theta_best,
        "epochs_run": r.epochs_run,
        "total_circuit_evals": r.total_circuit_evals,
        "stop_reason": r.stop_reason,
        "optimizer": outcome.optimizer,
        "master_seed": cfg.experiment.master_seed,
        "config": cfg,
        "theta0": outcome.theta0,
        "dataset": {
            "xs": outcome.dataset.xs(),
            "ys": outcome.dataset.ys(),
        },
    });
    write_json(dir, "report.json", &report)?;
    write_json(
        dir,
        "model.json",
        &serde_json::to_value(ModelFile::from_model(&outcome.model))?,
    )?;
    write_csv(dir, "predictions.csv", &prediction_rows(outcome))
}

fn print_summary(outcome: &RegressionOutcome) {
    let r = &outcome.report;
    let best = r.loss_history.iter().copied().fold(f64::INFINITY, f64::min);
    println!(
        "{}: {:?} after {} epochs, best J = {best:.3e}, {} circuit executions",
        outcome.optimizer.name(),
        r.stop_reason,
        r.epochs_run,
        r.total_circuit_evals
    );
}
