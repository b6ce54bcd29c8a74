//! (μ/μ_w, λ)-CMA-ES with the usual default learning rates and weights.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Search distribution and evolution paths.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaState {
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub covariance: DMatrix<f64>,
    /// Conjugate path driving step-size control.
    pub p_sigma: DVector<f64>,
    /// Path driving the rank-one covariance update.
    pub p_c: DVector<f64>,
    pub lambda: usize,
}

#[derive(Debug, Clone)]
struct Strategy {
    mu: usize,
    weights: DVector<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

impl Strategy {
    fn new(n: usize, lambda: usize) -> Self {
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        let weights = DVector::from_iterator(mu, raw.iter().map(|w| w / total));
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Self {
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        }
    }
}

/// Ask/tell driver.
#[derive(Debug, Clone)]
pub struct CmaEs {
    state: CmaState,
    strategy: Strategy,
    /// Eigenbasis `B` and axis lengths `D` of the covariance: `C = B D² Bᵀ`.
    basis: DMatrix<f64>,
    axis_lengths: DVector<f64>,
    /// Steps `y_k = B D z_k` of the last `ask`.
    pending: Vec<DVector<f64>>,
    generation: u64,
    rng: ChaCha8Rng,
}

impl CmaEs {
    /// Default population `4 + ⌊3 ln n⌋`.
    pub fn default_population(n: usize) -> usize {
        4 + (3.0 * (n as f64).ln()).floor() as usize
    }

    pub fn new(x0: &[f64], sigma0: f64, lambda: Option<usize>, seed: u64) -> Result<Self> {
        let n = x0.len();
        if n == 0 {
            return Err(Error::InvalidConfig("CMA-ES needs at least one dimension".into()));
        }
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::InvalidConfig("CMA-ES sigma0 must be > 0".into()));
        }
        let lambda = lambda.unwrap_or_else(|| Self::default_population(n));
        if lambda < 2 {
            return Err(Error::InvalidConfig("CMA-ES population must be >= 2".into()));
        }
        Ok(Self {
            state: CmaState {
                mean: DVector::from_column_slice(x0),
                sigma: sigma0,
                covariance: DMatrix::identity(n, n),
                p_sigma: DVector::zeros(n),
                p_c: DVector::zeros(n),
                lambda,
            },
            strategy: Strategy::new(n, lambda),
            basis: DMatrix::identity(n, n),
            axis_lengths: DVector::from_element(n, 1.0),
            pending: Vec::new(),
            generation: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn state(&self) -> &CmaState {
        &self.state
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn dimension(&self) -> usize {
        self.state.mean.len()
    }

    /// Samples `λ` candidates `m + σ B D z`.
    pub fn ask(&mut self) -> Vec<Vec<f64>> {
        let n = self.dimension();
        let bd = &self.basis * DMatrix::from_diagonal(&self.axis_lengths);
        self.pending = (0..self.state.lambda)
            .map(|_| {
                let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut self.rng));
                &bd * z
            })
            .collect();
        self.pending
            .iter()
            .map(|y| (&self.state.mean + self.state.sigma * y).iter().copied().collect())
            .collect()
    }

    /// Updates the distribution from the fitness of the last `ask` batch
    /// (lower is better).
    pub fn tell(&mut self, fitness: &[f64]) -> Result<()> {
        let lambda = self.state.lambda;
        if self.pending.len() != lambda || fitness.len() != lambda {
            return Err(Error::LengthMismatch {
                expected: lambda,
                got: fitness.len(),
            });
        }
        let n = self.dimension();
        let st = &self.strategy;
        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
        let selected: Vec<&DVector<f64>> = order[..st.mu].iter().map(|&k| &self.pending[k]).collect();

        let mut y_w = DVector::zeros(n);
        for (w, y) in st.weights.iter().zip(&selected) {
            y_w += *w * *y;
        }
        let s = &mut self.state;
        s.mean += s.sigma * &y_w;

        // C^{-1/2} y_w = B D^{-1} Bᵀ y_w
        let inv_d = self.axis_lengths.map(|d| 1.0 / d);
        let c_inv_sqrt_y = &self.basis * inv_d.component_mul(&(self.basis.transpose() * &y_w));
        s.p_sigma =
            (1.0 - st.c_sigma) * &s.p_sigma + (st.c_sigma * (2.0 - st.c_sigma) * st.mu_eff).sqrt() * c_inv_sqrt_y;

        let g = (self.generation + 1) as f64;
        let ps_norm = s.p_sigma.norm();
        let h_sigma =
            ps_norm / (1.0 - (1.0 - st.c_sigma).powf(2.0 * g)).sqrt() < (1.4 + 2.0 / (n as f64 + 1.0)) * st.chi_n;
        let h = if h_sigma { 1.0 } else { 0.0 };
        s.p_c = (1.0 - st.c_c) * &s.p_c + h * (st.c_c * (2.0 - st.c_c) * st.mu_eff).sqrt() * &y_w;

        let mut rank_mu = DMatrix::zeros(n, n);
        for (w, y) in st.weights.iter().zip(&selected) {
            rank_mu += *w * *y * y.transpose();
        }
        let decay = 1.0 - st.c_1 - st.c_mu + (1.0 - h) * st.c_1 * st.c_c * (2.0 - st.c_c);
        s.covariance = decay * &s.covariance + st.c_1 * &s.p_c * s.p_c.transpose() + st.c_mu * rank_mu;
        s.covariance = 0.5 * (&s.covariance + s.covariance.transpose());

        s.sigma *= ((st.c_sigma / st.d_sigma) * (ps_norm / st.chi_n - 1.0)).exp();

        let eig = SymmetricEigen::new(s.covariance.clone());
        let floor = 1e-300;
        self.axis_lengths = eig.eigenvalues.map(|l| l.max(floor).sqrt());
        self.basis = eig.eigenvectors;
        self.pending.clear();
        self.generation += 1;
        Ok(())
    }

    /// Whether the covariance admits a Cholesky factorization.
    pub fn covariance_is_spd(&self) -> bool {
        self.state.covariance.clone().cholesky().is_some()
    }

    /// Largest absolute asymmetry `|C_ij − C_ji|`.
    pub fn covariance_asymmetry(&self) -> f64 {
        let c = &self.state.covariance;
        (c - c.transpose()).amax()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaOutcome {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    /// Best fitness of each generation.
    pub history: Vec<f64>,
    pub generations: u64,
}

/// Minimizes `f` until a candidate reaches `target` or `max_generations` pass.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    sigma0: f64,
    max_generations: u64,
    target: f64,
    seed: u64,
) -> Result<CmaOutcome> {
    let mut es = CmaEs::new(x0, sigma0, None, seed)?;
    let mut best_x = x0.to_vec();
    let mut best_f = f64::INFINITY;
    let mut history = Vec::new();
    while es.generation() < max_generations {
        let candidates = es.ask();
        let fitness: Vec<f64> = candidates.iter().map(|c| f(c)).collect();
        es.tell(&fitness)?;
        let (k, &gen_best) = fitness
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("population is non-empty");
        history.push(gen_best);
        if gen_best < best_f {
            best_f = gen_best;
            best_x = candidates[k].clone();
        }
        if best_f <= target {
            break;
        }
    }
    Ok(CmaOutcome {
        best_x,
        best_f,
        history,
        generations: es.generation(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(target: &[f64]) -> impl Fn(&[f64]) -> f64 + '_ {
        move |x| x.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum()
    }

    #[test]
    fn population_heuristic() {
        assert_eq!(CmaEs::default_population(9), 4 + (3.0 * 9f64.ln()).floor() as usize);
        assert_eq!(CmaEs::default_population(9), 10);
        assert_eq!(CmaEs::default_population(3), 7);
        assert_eq!(CmaEs::default_population(1), 4);
    }

    #[test]
    fn weights_are_normalized_and_decreasing() {
        let st = Strategy::new(9, 10);
        assert_eq!(st.mu, 5);
        assert!((st.weights.sum() - 1.0).abs() < 1e-15);
        assert!(st.weights.as_slice().windows(2).all(|w| w[0] > w[1]));
        assert!(st.c_1 + st.c_mu <= 1.0);
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(CmaEs::new(&[], 1.0, None, 0).is_err());
        assert!(CmaEs::new(&[0.0], 0.0, None, 0).is_err());
        assert!(CmaEs::new(&[0.0], 1.0, Some(1), 0).is_err());
        let mut es = CmaEs::new(&[0.0, 0.0], 1.0, None, 0).unwrap();
        assert!(es.tell(&[1.0]).is_err());
    }

    #[test]
    fn solves_sphere() {
        let target: Vec<f64> = (0..9).map(|i| 0.3 * i as f64 - 1.2).collect();
        let out = minimize(sphere(&target), &[0.0; 9], 1.0, 300, 1e-6 * 1e-6, 1).unwrap();
        let dist: f64 = out.best_f.sqrt();
        assert!(dist <= 1e-3, "dist {dist} after {}", out.generations);
        assert!(out.generations <= 300);
    }

    #[test]
    fn covariance_stays_spd_and_symmetric() {
        let target = [1.0, -2.0, 0.5];
        let f = sphere(&target);
        let mut es = CmaEs::new(&[0.0; 3], 0.5, None, 7).unwrap();
        for _ in 0..100 {
            let c = es.ask();
            let fit: Vec<f64> = c.iter().map(|x| f(x)).collect();
            es.tell(&fit).unwrap();
            assert!(es.covariance_is_spd());
            assert!(es.covariance_asymmetry() <= 1e-10);
            assert!(es.state().sigma > 0.0);
        }
    }

    #[test]
    fn seeded_runs_replay() {
        let target = [0.2, 0.4];
        let a = minimize(sphere(&target), &[1.0, 1.0], 0.5, 40, 0.0, 3).unwrap();
        let b = minimize(sphere(&target), &[1.0, 1.0], 0.5, 40, 0.0, 3).unwrap();
        assert_eq!(a, b);
    }
}
