//! Parameter Shift Rule gradients and the derivative oracles used to check them.
//!
//! For a gate `exp(-iμG)` whose generator has eigenvalues `±r`,
//! `∂f/∂μ = r·[f(μ + s) − f(μ − s)]` with `s = π/(4r)`. Every gate here is a
//! rotation with generator `σ/2`, so `r = 1/2` and `s = π/2`.
//!
//! When a parameter multiplies the feature (`angle = θ·x + …`) the shift is
//! applied to the whole angle and the difference is multiplied by `x`. This is
//! the chain rule `∂angle/∂θ = x`; it needs no division by `x`, so `x = 0` is
//! a regular point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Executor, ExecutorConfig, Model, ParamKind};
use crate::rng::{EvalTag, Shift};
use crate::scalar::Scalar;

/// Eigenvalue magnitude `r` and shift `s = π/(4r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftRuleConstants<T> {
    r: T,
    s: T,
}

impl<T: Scalar> ShiftRuleConstants<T> {
    /// Constants for a generator with eigenvalues `±r`.
    pub fn for_eigenvalue(r: T) -> Self {
        let four = T::of(4.0);
        Self {
            r,
            s: T::PI() / (four * r),
        }
    }

    /// `r = 1/2`, `s = π/2`.
    pub fn rotation() -> Self {
        Self::for_eigenvalue(T::of(0.5))
    }

    pub fn r(&self) -> T {
        self.r
    }

    pub fn s(&self) -> T {
        self.s
    }
}

/// Partial derivatives plus the number of circuit executions spent on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport<T> {
    pub partials: Vec<T>,
    pub n_circuit_evals: u64,
}

/// `(f(angle + s), f(angle − s))` for the gate fed by parameter `index`.
fn angle_shifted_pair<T: Scalar, E: Executor<T> + ?Sized>(
    model: &Model<T>,
    x: T,
    exec: &E,
    index: usize,
    tag: &EvalTag,
) -> Result<(T, T)> {
    let binding = model.binding(index)?;
    let s = ShiftRuleConstants::<T>::rotation().s();
    let mut circuit = model.build_circuit(x);
    let base = circuit[binding.gate_index].angle;
    let tag = tag.param(index as u64);

    circuit[binding.gate_index].angle = base + s;
    let plus = exec.run(&circuit, &tag.shift(Shift::Plus))?;
    circuit[binding.gate_index].angle = base - s;
    let minus = exec.run(&circuit, &tag.shift(Shift::Minus))?;
    Ok((plus, minus))
}

fn expect_kind<T: Scalar>(model: &Model<T>, index: usize, expected: ParamKind) -> Result<()> {
    let actual = model.binding(index)?.kind;
    if actual != expected {
        return Err(Error::WrongParamKind {
            index,
            expected: expected.name(),
            actual: actual.name(),
        });
    }
    Ok(())
}

/// Shift rule for a parameter that enters its angle additively.
pub fn psr_partial_plain<T: Scalar, E: Executor<T> + ?Sized>(
    model: &Model<T>,
    x: T,
    exec: &E,
    index: usize,
    tag: &EvalTag,
) -> Result<T> {
    expect_kind(model, index, ParamKind::Offset)?;
    let (plus, minus) = angle_shifted_pair(model, x, exec, index, tag)?;
    Ok(ShiftRuleConstants::<T>::rotation().r() * (plus - minus))
}

/// Shift rule for a parameter that multiplies the feature: shift the
/// effective angle, then scale the difference by `x`.
pub fn psr_partial_scaled<T: Scalar, E: Executor<T> + ?Sized>(
    model: &Model<T>,
    x: T,
    exec: &E,
    index: usize,
    tag: &EvalTag,
) -> Result<T> {
    expect_kind(model, index, ParamKind::Scale)?;
    let (plus, minus) = angle_shifted_pair(model, x, exec, index, tag)?;
    // adding +0 folds a -0 product into +0
    Ok(ShiftRuleConstants::<T>::rotation().r() * (plus - minus) * x + T::zero())
}

/// Dispatches to the plain or scaled rule by how `index` enters the circuit.
pub fn psr_partial<T: Scalar, E: Executor<T> + ?Sized>(
    model: &Model<T>,
    x: T,
    exec: &E,
    index: usize,
    tag: &EvalTag,
) -> Result<T> {
    match model.binding(index)?.kind {
        ParamKind::Scale => psr_partial_scaled(model, x, exec, index, tag),
        ParamKind::Offset => psr_partial_plain(model, x, exec, index, tag),
    }
}

/// The shift rule applied naively to the parameter itself, ignoring the
/// feature factor. Only exact when the parameter enters additively (or
/// `x = ±1`); kept to show what the scaled rule corrects.
pub fn psr_partial_uncorrected<T: Scalar, E: Executor<T> + ?Sized>(
    model: &Model<T>,
    x: T,
    exec: &E,
    index: usize,
    tag: &EvalTag,
) -> Result<T> {
    model.binding(index)?;
    let rule = ShiftRuleConstants::<T>::rotation();
    let mut params = model.params().to_vec();
    let base = params[index];
    let tag = tag.param(index as u64);

    params[index] = base + rule.s();
    let plus = exec.run(&model.with_params(&params)?.build_circuit(x), &tag.shift(Shift::Plus))?;
    params[index] = base - rule.s();
    let minus = exec.run(&model.with_params(&params)?.build_circuit(x), &tag.shift(Shift::Minus))?;
    Ok(rule.r() * (plus - minus))
}

/// Shift-rule gradient of `⟨B⟩` at one feature value; `2p` executions.
pub fn psr_gradient<T: Scalar, E: Executor<T> + ?Sized>(
    model: &Model<T>,
    x: T,
    exec: &E,
    tag_base: &EvalTag,
) -> Result<GradientReport<T>> {
    let partials = (0..model.n_params())
        .map(|i| psr_partial(model, x, exec, i, tag_base))
        .collect::<Result<Vec<_>>>()?;
    Ok(GradientReport {
        n_circuit_evals: 2 * partials.len() as u64,
        partials,
    })
}

/// Central difference `[f(θ_i + h) − f(θ_i − h)] / 2h` on exact expectations.
pub fn fd_partial<T: Scalar>(model: &Model<T>, x: T, index: usize, h: T) -> Result<T> {
    if !(h > T::zero()) {
        return Err(Error::InvalidStep(h.as_f64()));
    }
    model.binding(index)?;
    let mut params = model.params().to_vec();
    let base = params[index];
    params[index] = base + h;
    let plus = model.with_params(&params)?.exact_value(x);
    params[index] = base - h;
    let minus = model.with_params(&params)?.exact_value(x);
    Ok((plus - minus) / (h + h))
}

/// Closed-form gradient of a one-layer re-uploading model,
/// `⟨B⟩ = cos(θ₁x + θ₂)`: `(−sin(θ₁x + θ₂)·x, −sin(θ₁x + θ₂), 0)`.
pub fn analytic_single_layer_gradient<T: Scalar>(theta: [T; 3], x: T) -> [T; 3] {
    let s = (theta[0] * x + theta[1]).sin();
    [-s * x, -s, T::zero()]
}

/// `|∂ŷ_analytic − ∂ŷ_PSR|` for `ŷ = (⟨B⟩ − c)²` on a single `RX(θ·x)` gate,
/// one entry per grid point. `corrected` selects the scaled rule over the naive one.
pub fn figure1_discrepancy<T: Scalar>(theta: T, x_grid: &[T], c: T, corrected: bool) -> Vec<T> {
    let model = Model::rx_feature(theta);
    let exec = ExecutorConfig::exact();
    let tag = EvalTag::new(crate::rng::Purpose::Check);
    let two = T::of(2.0);
    x_grid
        .iter()
        .map(|&x| {
            let angle = theta * x;
            let analytic = two * (angle.cos() - c) * (-angle.sin()) * x;
            let b = model.exact_value(x);
            let db = if corrected {
                psr_partial_scaled(&model, x, &exec, 0, &tag)
            } else {
                psr_partial_uncorrected(&model, x, &exec, 0, &tag)
            }
            .expect("RX model has exactly one scale parameter");
            (analytic - two * (b - c) * db).abs()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CountingExecutor;
    use crate::rng::Purpose;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn tag() -> EvalTag {
        EvalTag::new(Purpose::Check)
    }

    fn exact() -> ExecutorConfig {
        ExecutorConfig::exact()
    }

    #[test]
    fn shift_constants() {
        let c = ShiftRuleConstants::<f64>::rotation();
        assert_eq!(c.r(), 0.5);
        assert_eq!(c.s(), FRAC_PI_2);
        assert_eq!(c.s(), PI / (4.0 * c.r()));
        let c = ShiftRuleConstants::<f64>::for_eigenvalue(1.0);
        assert_eq!(c.s(), PI / 4.0);
    }

    #[test]
    fn plain_rule_on_offset() {
        let m = Model::reuploading(1, vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(psr_partial_plain(&m, 0.3, &exact(), 1, &tag()).unwrap(), 0.0);
        let m = Model::reuploading(1, vec![0.0, FRAC_PI_2, 0.0]).unwrap();
        let d = psr_partial_plain(&m, 0.3, &exact(), 1, &tag()).unwrap();
        assert!((d + 1.0).abs() <= 1e-12);
        let t2 = 0.81f64;
        let m = Model::reuploading(1, vec![0.0, t2, 0.0]).unwrap();
        let d = psr_partial_plain(&m, -0.6, &exact(), 1, &tag()).unwrap();
        assert!((d + t2.sin()).abs() <= 1e-12);
    }

    #[test]
    fn trailing_rz_has_zero_partial() {
        let m = Model::reuploading(3, (0..9).map(|i| 0.3 * i as f64 - 1.0).collect()).unwrap();
        let d = psr_partial_plain(&m, 0.45, &exact(), 8, &tag()).unwrap();
        assert!(d.abs() <= 1e-12);
    }

    #[test]
    fn scaled_rule_on_feature_parameter() {
        let m = Model::reuploading(1, vec![1.0, 0.0, 0.0]).unwrap();
        let d = psr_partial_scaled(&m, 0.5, &exact(), 0, &tag()).unwrap();
        assert!((d - (-(0.5f64).sin() * 0.5)).abs() <= 1e-12);
        assert!((d + 0.2397).abs() < 1e-4);
    }

    #[test]
    fn scaled_rule_is_exactly_zero_at_zero_feature() {
        let m = Model::reuploading(2, vec![1.3, -0.4, 0.9, 2.2, 0.1, -1.0]).unwrap();
        for i in [0, 3] {
            let d: f64 = psr_partial_scaled(&m, 0.0, &exact(), i, &tag()).unwrap();
            assert_eq!(d, 0.0);
            assert!(d.is_sign_positive());
        }
    }

    #[test]
    fn rule_kind_is_checked() {
        let m = Model::reuploading(1, vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            psr_partial_plain(&m, 0.5, &exact(), 0, &tag()),
            Err(Error::WrongParamKind { .. })
        ));
        assert!(matches!(
            psr_partial_scaled(&m, 0.5, &exact(), 2, &tag()),
            Err(Error::WrongParamKind { .. })
        ));
        assert!(matches!(
            psr_partial(&m, 0.5, &exact(), 3, &tag()),
            Err(Error::InvalidParamIndex { .. })
        ));
    }

    #[test]
    fn gradient_at_identity_is_zero() {
        let m = Model::reuploading(1, vec![0.0, 0.0, 0.0]).unwrap();
        let g = psr_gradient(&m, 0.8, &exact(), &tag()).unwrap();
        assert_eq!(g.partials, vec![0.0, 0.0, 0.0]);
        assert_eq!(g.n_circuit_evals, 6);
    }

    #[test]
    fn gradient_matches_closed_form() {
        let m = Model::reuploading(1, vec![1.0, 0.3, 0.9]).unwrap();
        let g = psr_gradient(&m, 0.4, &exact(), &tag()).unwrap();
        let s = (0.7f64).sin();
        let want = [-s * 0.4, -s, 0.0];
        for (a, b) in g.partials.iter().zip(want) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn gradient_counts_two_evaluations_per_parameter() {
        for layers in 1..=5 {
            let m = Model::reuploading(layers, vec![0.2; 3 * layers]).unwrap();
            let exec = CountingExecutor::new(exact());
            let g = psr_gradient(&m, 0.1, &exec, &tag()).unwrap();
            assert_eq!(exec.count(), g.n_circuit_evals);
            assert_eq!(g.n_circuit_evals, 6 * layers as u64);
        }
    }

    #[test]
    fn fd_oracle() {
        let m = Model::reuploading(1, vec![0.0, FRAC_PI_2, 0.0]).unwrap();
        let d = fd_partial(&m, 0.2, 1, 1e-5).unwrap();
        assert!((d + 1.0).abs() <= 1e-8);
        let d = fd_partial(&m, 0.2, 2, 1e-5).unwrap();
        assert!(d.abs() <= 1e-10);
        assert!(matches!(fd_partial(&m, 0.2, 1, 0.0), Err(Error::InvalidStep(_))));
        assert!(matches!(fd_partial(&m, 0.2, 1, -1e-3), Err(Error::InvalidStep(_))));
    }

    #[test]
    fn uncorrected_rule_is_off_for_scaled_parameters() {
        let m = Model::reuploading(1, vec![1.0, 0.0, 0.0]).unwrap();
        let naive = psr_partial_uncorrected(&m, 0.5, &exact(), 0, &tag()).unwrap();
        let truth = -(0.5f64).sin() * 0.5;
        assert!((naive - truth).abs() > 1e-2);
        // additive parameters need no correction
        let naive = psr_partial_uncorrected(&m, 0.5, &exact(), 1, &tag()).unwrap();
        assert!((naive - psr_partial_plain(&m, 0.5, &exact(), 1, &tag()).unwrap()).abs() <= 1e-15);
    }

    #[test]
    fn figure1_examples() {
        let grid: Vec<f64> = (0..=20).map(|i| -1.0 + 0.1 * i as f64).collect();
        for theta in [0.4, 1.0, -2.3, 3.0] {
            let d = figure1_discrepancy(theta, &grid, 0.2, true);
            assert!(d.iter().all(|&e| e <= 1e-12));
        }
        let d = figure1_discrepancy(1.0, &[0.5], 0.2, false);
        assert!(d[0] > 1e-3, "{}", d[0]);
        let zero = figure1_discrepancy(1.7, &[0.0], 0.2, true);
        assert_eq!(zero[0], 0.0);
        let zero = figure1_discrepancy(1.7, &[0.0], 0.2, false);
        assert_eq!(zero[0], 0.0);
    }

    #[test]
    fn shots_gradient_tracks_exact() {
        let m = Model::reuploading(2, vec![0.5, -0.2, 0.7, 1.4, 0.3, -0.9]).unwrap();
        let exec = ExecutorConfig::shots(1_000_000, 5).unwrap();
        let x = 0.37f64;
        let g = psr_gradient(&m, x, &exec, &tag()).unwrap();
        let e = psr_gradient(&m, x, &exact(), &tag()).unwrap();
        for i in 0..m.n_params() {
            let factor = if m.binding(i).unwrap().kind == ParamKind::Scale {
                x.abs()
            } else {
                1.0
            };
            // two independent estimates, each with variance ≤ 1/n_shots
            let se = 0.5 * factor * (2.0 / 1e6f64).sqrt();
            assert!((g.partials[i] - e.partials[i]).abs() <= 5.0 * se, "i={i}");
        }
    }

    /// Literal form: shift the parameter itself by `s/x`, multiply by `x`.
    fn literal_scaled(m: &Model<f64>, x: f64, i: usize) -> f64 {
        let mut p = m.params().to_vec();
        let base = p[i];
        p[i] = base + FRAC_PI_2 / x;
        let plus = m.with_params(&p).unwrap().exact_value(x);
        p[i] = base - FRAC_PI_2 / x;
        let minus = m.with_params(&p).unwrap().exact_value(x);
        0.5 * (plus - minus) * x
    }

    proptest! {
        #[test]
        fn angle_shift_equals_literal_parameter_shift(
            params in prop::collection::vec(-PI..PI, 6),
            x in prop_oneof![-1.0f64..-0.01, 0.01f64..1.0],
            layer in 0usize..2,
        ) {
            let m = Model::reuploading(2, params).unwrap();
            let i = 3 * layer;
            let a = psr_partial_scaled(&m, x, &exact(), i, &tag()).unwrap();
            prop_assert!((a - literal_scaled(&m, x, i)).abs() <= 1e-9);
        }

        #[test]
        fn psr_agrees_with_finite_differences(
            layers in 1usize..=4,
            seed in prop::collection::vec(-PI..PI, 12),
            x in -1.0f64..1.0,
        ) {
            let m = Model::reuploading(layers, seed[..3 * layers].to_vec()).unwrap();
            let g = psr_gradient(&m, x, &exact(), &tag()).unwrap();
            for i in 0..m.n_params() {
                let fd = fd_partial(&m, x, i, 1e-5).unwrap();
                prop_assert!((g.partials[i] - fd).abs() <= 1e-6);
            }
        }
    }
}
