//! The data re-uploading ansatz and the executors that estimate `⟨B⟩`.
//!
//! A layer is `RY(θ_{k,1}·x + θ_{k,2})` followed by `RZ(θ_{k,3})`; layers are
//! applied in order to `|0⟩` and the qubit is measured in the Z basis.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::EvalTag;
use crate::scalar::Scalar;
use crate::sim::{estimate_b, exact_expectation_z, prepare, sample_counts, Axis, RotationGate};

/// Affine angle `θ[scale]·x + θ[offset]`, with either term optional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngleSpec {
    pub scale_param_index: Option<usize>,
    pub offset_param_index: Option<usize>,
    pub uses_feature: bool,
}

impl AngleSpec {
    /// `θ[scale]·x + θ[offset]`
    pub fn affine(scale: usize, offset: usize) -> Self {
        Self {
            scale_param_index: Some(scale),
            offset_param_index: Some(offset),
            uses_feature: true,
        }
    }

    /// `θ[scale]·x`
    pub fn scaled(scale: usize) -> Self {
        Self {
            scale_param_index: Some(scale),
            offset_param_index: None,
            uses_feature: true,
        }
    }

    /// `θ[offset]`
    pub fn offset(offset: usize) -> Self {
        Self {
            scale_param_index: None,
            offset_param_index: Some(offset),
            uses_feature: false,
        }
    }

    pub fn angle<T: Scalar>(&self, params: &[T], x: T) -> T {
        let scaled = match self.scale_param_index {
            Some(i) if self.uses_feature => params[i] * x,
            _ => T::zero(),
        };
        let offset = self.offset_param_index.map_or(T::zero(), |i| params[i]);
        scaled + offset
    }

    fn validate(&self) -> Result<()> {
        if self.scale_param_index.is_none() && self.offset_param_index.is_none() {
            return Err(Error::InvalidBinding(
                "angle must reference at least one parameter".into(),
            ));
        }
        if self.uses_feature != self.scale_param_index.is_some() {
            return Err(Error::InvalidBinding(
                "the feature enters an angle exactly when a scale parameter is bound".into(),
            ));
        }
        if self.scale_param_index.is_some() && self.scale_param_index == self.offset_param_index {
            return Err(Error::InvalidBinding(
                "scale and offset must be distinct parameters".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSpec {
    pub axis: Axis,
    pub angle: AngleSpec,
}

/// How a parameter enters the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Multiplies the feature.
    Scale,
    /// Added to the angle.
    Offset,
}

impl ParamKind {
    pub(crate) fn name(self) -> &'static str {
        match self {
            ParamKind::Scale => "scale",
            ParamKind::Offset => "offset",
        }
    }
}

/// Where a parameter sits: the gate it feeds and the role it plays there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamBinding {
    pub gate_index: usize,
    pub kind: ParamKind,
}

/// A parametrized single-qubit circuit. Every parameter feeds exactly one gate.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    n_layers: usize,
    specs: Vec<GateSpec>,
    params: Vec<T>,
    bindings: Vec<ParamBinding>,
}

impl<T: Scalar> Model<T> {
    /// `n_layers` re-uploading layers; `params` is `(θ_{1,1}, θ_{1,2}, θ_{1,3}, θ_{2,1}, …)`.
    pub fn reuploading(n_layers: usize, params: Vec<T>) -> Result<Self> {
        if n_layers == 0 {
            return Err(Error::InvalidConfig("n_layers must be >= 1".into()));
        }
        if params.len() != 3 * n_layers {
            return Err(Error::LengthMismatch {
                expected: 3 * n_layers,
                got: params.len(),
            });
        }
        let specs = (0..n_layers)
            .flat_map(|k| {
                [
                    GateSpec {
                        axis: Axis::Y,
                        angle: AngleSpec::affine(3 * k, 3 * k + 1),
                    },
                    GateSpec {
                        axis: Axis::Z,
                        angle: AngleSpec::offset(3 * k + 2),
                    },
                ]
            })
            .collect();
        Self::from_specs(n_layers, specs, params)
    }

    /// One `RX(θ·x)` gate.
    pub fn rx_feature(theta: T) -> Self {
        let specs = vec![GateSpec {
            axis: Axis::X,
            angle: AngleSpec::scaled(0),
        }];
        Self::from_specs(1, specs, vec![theta]).expect("single scaled RX binding is valid")
    }

    /// Arbitrary layout; `n_layers` is informational.
    pub fn from_specs(n_layers: usize, specs: Vec<GateSpec>, params: Vec<T>) -> Result<Self> {
        let n_params = params.len();
        let mut bindings: Vec<Option<ParamBinding>> = vec![None; n_params];
        for (gate_index, spec) in specs.iter().enumerate() {
            spec.angle.validate()?;
            let roles = [
                (spec.angle.scale_param_index, ParamKind::Scale),
                (spec.angle.offset_param_index, ParamKind::Offset),
            ];
            for (index, kind) in roles {
                let Some(index) = index else { continue };
                let slot = bindings.get_mut(index).ok_or(Error::LengthMismatch {
                    expected: index + 1,
                    got: n_params,
                })?;
                if slot.is_some() {
                    return Err(Error::InvalidBinding(format!(
                        "parameter {index} appears in more than one gate"
                    )));
                }
                *slot = Some(ParamBinding { gate_index, kind });
            }
        }
        let bindings = bindings
            .into_iter()
            .enumerate()
            .map(|(i, b)| b.ok_or_else(|| Error::InvalidBinding(format!("parameter {i} is unused"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_layers,
            specs,
            params,
            bindings,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn specs(&self) -> &[GateSpec] {
        &self.specs
    }

    pub fn set_params(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::LengthMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn with_params(&self, params: &[T]) -> Result<Self> {
        let mut m = self.clone();
        m.set_params(params)?;
        Ok(m)
    }

    pub fn binding(&self, index: usize) -> Result<ParamBinding> {
        self.bindings.get(index).copied().ok_or(Error::InvalidParamIndex {
            index,
            n_params: self.params.len(),
        })
    }

    /// Gates for feature `x`, in application order.
    pub fn build_circuit(&self, x: T) -> Vec<RotationGate<T>> {
        self.specs
            .iter()
            .map(|s| RotationGate::new(s.axis, s.angle.angle(&self.params, x)))
            .collect()
    }

    /// Exact `⟨Z⟩` of the prepared state.
    pub fn exact_value(&self, x: T) -> T {
        exact_expectation_z(&prepare(&self.build_circuit(x)))
    }
}

/// Free-function form of [`Model::build_circuit`].
pub fn build_circuit<T: Scalar>(model: &Model<T>, x: T) -> Vec<RotationGate<T>> {
    model.build_circuit(x)
}

/// Flat JSON form `{"n_layers": L, "params": [...]}` of a re-uploading model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub n_layers: usize,
    pub params: Vec<f64>,
}

impl ModelFile {
    pub fn from_model<T: Scalar>(model: &Model<T>) -> Self {
        Self {
            n_layers: model.n_layers(),
            params: model.params().iter().map(|p| p.as_f64()).collect(),
        }
    }

    pub fn into_model<T: Scalar>(self) -> Result<Model<T>> {
        let expected = 3 * self.n_layers;
        if self.params.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: self.params.len(),
            });
        }
        Model::reuploading(self.n_layers, self.params.into_iter().map(T::of).collect())
    }
}

/// Turns a prepared circuit into an estimate of `⟨B⟩`.
///
/// Each call is one circuit execution: one state preparation and, for
/// sampling executors, one measurement batch.
pub trait Executor<T: Scalar> {
    fn run(&self, circuit: &[RotationGate<T>], tag: &EvalTag) -> Result<T>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    Exact,
    Shots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutorConfig {
    pub mode: ExecMode,
    pub n_shots: u64,
    pub master_seed: u64,
}

impl ExecutorConfig {
    pub fn exact() -> Self {
        Self {
            mode: ExecMode::Exact,
            n_shots: 0,
            master_seed: 0,
        }
    }

    pub fn shots(n_shots: u64, master_seed: u64) -> Result<Self> {
        if n_shots == 0 {
            return Err(Error::ZeroShots);
        }
        Ok(Self {
            mode: ExecMode::Shots,
            n_shots,
            master_seed,
        })
    }
}

impl<T: Scalar> Executor<T> for ExecutorConfig {
    fn run(&self, circuit: &[RotationGate<T>], tag: &EvalTag) -> Result<T> {
        let state = prepare(circuit);
        match self.mode {
            ExecMode::Exact => Ok(exact_expectation_z(&state)),
            ExecMode::Shots => {
                let mut rng = tag.stream(self.master_seed);
                let counts = sample_counts(&state, self.n_shots, &mut rng)?;
                Ok(estimate_b(&counts))
            }
        }
    }
}

/// Wraps an executor and counts the circuit executions it serves.
#[derive(Debug)]
pub struct CountingExecutor<E> {
    inner: E,
    count: AtomicU64,
}

impl<E> CountingExecutor<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            count: AtomicU64::new(0),
        }
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.count.store(0, Ordering::Relaxed);
    }
}

impl<T: Scalar, E: Executor<T>> Executor<T> for CountingExecutor<E> {
    fn run(&self, circuit: &[RotationGate<T>], tag: &EvalTag) -> Result<T> {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.run(circuit, tag)
    }
}

impl<T: Scalar, E: Executor<T> + ?Sized> Executor<T> for &E {
    fn run(&self, circuit: &[RotationGate<T>], tag: &EvalTag) -> Result<T> {
        (**self).run(circuit, tag)
    }
}

/// One execution of the model's circuit at feature `x`.
pub fn estimate<T: Scalar, E: Executor<T> + ?Sized>(model: &Model<T>, x: T, exec: &E, tag: &EvalTag) -> Result<T> {
    exec.run(&model.build_circuit(x), tag)
}
