//! Training a single-qubit data re-uploading circuit with Parameter Shift
//! Rule gradients.
//!
//! The numerical core (simulator, model, gradients, loss, Adam) is generic
//! over the scalar type; the aliases below fix it to `f64`.

// `!(x > 0.0)` is used deliberately so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod grad;
pub mod model;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type StateVector = sim::StateVector<f64>;
pub type RotationGate = sim::RotationGate<f64>;
pub type ReuploadingModel = model::Model<f64>;
pub type Dataset = optim::Dataset<f64>;
pub type GradientReport = grad::GradientReport<f64>;
pub type TrainReport = optim::TrainReport<f64>;
pub type AdamState = optim::AdamState<f64>;
pub type ShiftRuleConstants = grad::ShiftRuleConstants<f64>;
