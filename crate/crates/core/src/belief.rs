//! Gaussian beliefs over the target vector.
//!
//! Everything here is conjugate linear-Gaussian inference: the belief over the
//! flattened target vector β is N(μ, Σ), measurements are noisy linear reads
//! `y = xᵀβ + ε`, and the point estimate is the ridge solution
//! `β̂(D) = (σ²Σ₀⁻¹ + XᵀX)⁻¹ Xᵀ y` (the posterior mean under a zero prior
//! mean). Thompson samples are drawn by Cholesky factorization, discretized by
//! thresholding, and scored by the one-step reward λ⁻: the clamped reduction in
//! squared distance between a sample and the estimate caused by new data.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::env::SensingAction;
use crate::error::{CastError, Result};

/// Gaussian posterior over β together with the prior it was grown from.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub prior_mu: DVector<f64>,
    pub prior_sigma: DMatrix<f64>,
    /// Observation noise variance σ².
    pub sigma2: f64,
}

impl GaussianBelief {
    /// Fresh belief equal to its prior.
    pub fn from_prior(prior_mu: DVector<f64>, prior_sigma: DMatrix<f64>, sigma2: f64) -> Result<Self> {
        let belief = GaussianBelief {
            mu: prior_mu.clone(),
            sigma: prior_sigma.clone(),
            prior_mu,
            prior_sigma,
            sigma2,
        };
        belief.validate()?;
        Ok(belief)
    }

    /// The neutral prior: μ₀ = 0, Σ₀ = I.
    pub fn standard_prior(n: usize, sigma2: f64) -> Result<Self> {
        GaussianBelief::from_prior(DVector::zeros(n), DMatrix::identity(n, n), sigma2)
    }

    /// μ₀ = `mean` everywhere, Σ₀ = `var`·I.
    pub fn scaled_prior(n: usize, mean: f64, var: f64, sigma2: f64) -> Result<Self> {
        if !(var > 0.0) {
            return Err(CastError::Config("prior variance must be positive".into()));
        }
        GaussianBelief::from_prior(
            DVector::from_element(n, mean),
            DMatrix::identity(n, n) * var,
            sigma2,
        )
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0) {
            return Err(CastError::Config("sigma2 must be positive".into()));
        }
        let n = self.mu.len();
        if self.sigma.nrows() != n || self.sigma.ncols() != n {
            return Err(CastError::InvalidInput("covariance shape mismatch".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (self.sigma[(i, j)] - self.sigma[(j, i)]).abs() > 1e-10 {
                    return Err(CastError::Numerical("covariance not symmetric".into()));
                }
            }
        }
        if Cholesky::new(self.sigma.clone()).is_none() {
            return Err(CastError::Numerical("covariance not positive definite".into()));
        }
        Ok(())
    }

    /// Fold one measurement into (μ, Σ) by a rank-one update.
    ///
    /// Exact for a single new row; agents doing long chains of these should
    /// recompute from scratch periodically to shed float drift (the simulation
    /// harness does so every 32 updates).
    pub fn rank_one_update(&mut self, action: &SensingAction, y: f64) {
        let u = sparse_cov_product(&self.sigma, &action.cells, action.weight);
        let s = action.weight * action.cells.iter().map(|&c| u[c]).sum::<f64>();
        let denom = self.sigma2 + s;
        let innovation = y - action.dot(&self.mu);
        self.mu.axpy(innovation / denom, &u, 1.0);
        // Σ ← Σ − u uᵀ / denom, written to keep exact symmetry.
        let n = self.mu.len();
        for i in 0..n {
            let ui = u[i] / denom;
            for j in 0..n {
                self.sigma[(i, j)] -= ui * u[j];
            }
        }
    }

    /// JSON-friendly view: mean vector and covariance diagonal.
    pub fn snapshot(&self) -> BeliefSnapshot {
        BeliefSnapshot {
            mu: self.mu.iter().copied().collect(),
            sigma_diag: (0..self.n()).map(|i| self.sigma[(i, i)]).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BeliefSnapshot {
    pub mu: Vec<f64>,
    pub sigma_diag: Vec<f64>,
}

/// A stack of measurements: rows of the design matrix X plus observations y.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    n: usize,
    rows: Vec<DVector<f64>>,
    y: Vec<f64>,
}

impl MeasurementSet {
    pub fn new(n: usize) -> Self {
        MeasurementSet { n, rows: Vec::new(), y: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn count(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push_row(&mut self, x: DVector<f64>, y: f64) -> Result<()> {
        if x.len() != self.n {
            return Err(CastError::InvalidInput(format!(
                "measurement row has length {}, expected {}",
                x.len(),
                self.n
            )));
        }
        self.rows.push(x);
        self.y.push(y);
        Ok(())
    }

    pub fn push_action(&mut self, action: &SensingAction, y: f64) {
        self.rows.push(action.weight_vector(self.n));
        self.y.push(y);
    }

    pub fn rows(&self) -> &[DVector<f64>] {
        &self.rows
    }

    pub fn observations(&self) -> &[f64] {
        &self.y
    }

    /// Design matrix X, `count × n`.
    pub fn x_matrix(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.count(), self.n);
        for (i, row) in self.rows.iter().enumerate() {
            x.row_mut(i).copy_from(&row.transpose());
        }
        x
    }

    pub fn y_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.y)
    }

    /// True when `other` equals this set's first `other.count()` entries.
    pub fn extends(&self, other: &MeasurementSet) -> bool {
        other.count() <= self.count()
            && other.rows.iter().zip(&self.rows).all(|(a, b)| a == b)
            && other.y.iter().zip(&self.y).all(|(a, b)| a == b)
    }
}

/// `Σ x` for a region-sparse x (value `weight` on `cells`): O(n·|cells|).
fn sparse_cov_product(sigma: &DMatrix<f64>, cells: &[usize], weight: f64) -> DVector<f64> {
    let n = sigma.nrows();
    let mut u = DVector::zeros(n);
    for &c in cells {
        for r in 0..n {
            u[r] += sigma[(r, c)];
        }
    }
    u *= weight;
    u
}

fn cholesky_or_condition(matrix: DMatrix<f64>, what: &str) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let diag_max = matrix.diagonal().amax();
    let diag_min = matrix.diagonal().iter().cloned().fold(f64::INFINITY, f64::min);
    Cholesky::new(matrix).ok_or_else(|| {
        CastError::Numerical(format!(
            "{what} is not positive definite (diagonal condition estimate {:.3e})",
            diag_max / diag_min.max(f64::MIN_POSITIVE)
        ))
    })
}

/// Conjugate Gaussian posterior from the prior and the full measurement set:
/// `Σ_post = (Σ₀⁻¹ + XᵀX/σ²)⁻¹`, `μ_post = Σ_post (Σ₀⁻¹ μ₀ + Xᵀy/σ²)`.
pub fn posterior_update(prior: &GaussianBelief, data: &MeasurementSet) -> Result<GaussianBelief> {
    if data.n() != prior.n() {
        return Err(CastError::InvalidInput(format!(
            "data dimension {} does not match belief dimension {}",
            data.n(),
            prior.n()
        )));
    }
    if data.is_empty() {
        let mut out = prior.clone();
        out.mu = prior.prior_mu.clone();
        out.sigma = prior.prior_sigma.clone();
        return Ok(out);
    }

    let prior_chol = cholesky_or_condition(prior.prior_sigma.clone(), "prior covariance")?;
    let prior_precision = prior_chol.inverse();

    let x = data.x_matrix();
    let precision = &prior_precision + x.transpose() * &x / prior.sigma2;
    let chol = cholesky_or_condition(precision, "posterior normal matrix")?;

    let rhs = &prior_precision * &prior.prior_mu + x.transpose() * data.y_vector() / prior.sigma2;
    let mu = chol.solve(&rhs);
    let mut sigma = chol.inverse();
    // The inverse is symmetric up to rounding; enforce it so later Cholesky
    // factorizations never trip on asymmetry noise.
    let transposed = sigma.transpose();
    sigma = (sigma + transposed) * 0.5;

    if mu.iter().any(|v| !v.is_finite()) {
        return Err(CastError::Numerical("posterior mean is not finite".into()));
    }
    Ok(GaussianBelief {
        mu,
        sigma,
        prior_mu: prior.prior_mu.clone(),
        prior_sigma: prior.prior_sigma.clone(),
        sigma2: prior.sigma2,
    })
}

/// Regularized least-squares point estimate `β̂(D) = (σ²Σ₀⁻¹ + XᵀX)⁻¹ Xᵀ y`.
///
/// Note the absence of a prior-mean term: this equals the posterior mean only
/// when `prior_mu` is zero.
pub fn estimate(data: &MeasurementSet, prior: &GaussianBelief) -> Result<DVector<f64>> {
    if data.n() != prior.n() {
        return Err(CastError::InvalidInput(format!(
            "data dimension {} does not match belief dimension {}",
            data.n(),
            prior.n()
        )));
    }
    if data.is_empty() {
        return Ok(DVector::zeros(prior.n()));
    }
    let prior_chol = cholesky_or_condition(prior.prior_sigma.clone(), "prior covariance")?;
    let x = data.x_matrix();
    let normal = prior_chol.inverse() * prior.sigma2 + x.transpose() * &x;
    let chol = cholesky_or_condition(normal, "normal matrix")?;
    Ok(chol.solve(&(x.transpose() * data.y_vector())))
}

/// Draw β ~ N(μ, Σ) as μ + L·z with L·Lᵀ = Σ.
pub fn thompson_sample(belief: &GaussianBelief, rng: &mut ChaCha8Rng) -> Result<DVector<f64>> {
    let chol = Cholesky::new(belief.sigma.clone())
        .ok_or_else(|| CastError::Numerical("belief covariance is not positive definite".into()))?;
    let z = DVector::from_fn(belief.n(), |_, _| StandardNormal.sample(rng));
    Ok(&belief.mu + chol.l() * z)
}

/// Reusable posterior sampler: factors Σ once, then each draw is one
/// matrix-vector product. Draws match `thompson_sample` bit for bit.
pub struct CholeskySampler {
    mu: DVector<f64>,
    l: DMatrix<f64>,
}

impl CholeskySampler {
    pub fn new(belief: &GaussianBelief) -> Result<Self> {
        let chol = Cholesky::new(belief.sigma.clone()).ok_or_else(|| {
            CastError::Numerical("belief covariance is not positive definite".into())
        })?;
        Ok(CholeskySampler { mu: belief.mu.clone(), l: chol.unpack() })
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let z = DVector::from_fn(self.mu.len(), |_, _| StandardNormal.sample(rng));
        &self.mu + &self.l * z
    }
}

/// Binary target hypothesis obtained by thresholding a posterior sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSample {
    /// Entries are exactly 0.0 or 1.0.
    pub beta_bin: DVector<f64>,
}

impl DiscreteSample {
    pub fn support(&self) -> Vec<usize> {
        self.beta_bin
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Entry i is 1 iff `sample[i] > threshold`.
pub fn discretize(sample: &DVector<f64>, threshold: f64) -> DiscreteSample {
    DiscreteSample {
        beta_bin: sample.map(|v| if v > threshold { 1.0 } else { 0.0 }),
    }
}

/// One-step lookahead reward:
/// `λ⁻ = max{0, ‖β − β̂(D_before)‖² − ‖β − β̂(D_after)‖²}`.
pub fn lambda_minus(
    beta_sample: &DVector<f64>,
    data_before: &MeasurementSet,
    data_after: &MeasurementSet,
    prior: &GaussianBelief,
) -> Result<f64> {
    if !data_after.extends(data_before) {
        return Err(CastError::InvalidInput(
            "data_after must extend data_before".into(),
        ));
    }
    let before = estimate(data_before, prior)?;
    let after = estimate(data_after, prior)?;
    let d_before = (beta_sample - before).norm_squared();
    let d_after = (beta_sample - after).norm_squared();
    Ok((d_before - d_after).max(0.0))
}

/// Incremental ridge estimator with an undo stack.
///
/// Tracks `β̂(D)` and its scaled covariance `(Σ₀⁻¹ + XᵀX/σ²)⁻¹` under
/// measurement pushes, so a tree search can descend (push) and backtrack (pop)
/// in O(n²) per edge instead of re-solving the normal equations at every node.
#[derive(Debug, Clone)]
pub struct SequentialEstimator {
    mu: DVector<f64>,
    cov: DMatrix<f64>,
    sigma2: f64,
    stack: Vec<(DVector<f64>, DMatrix<f64>)>,
}

impl SequentialEstimator {
    /// Estimator over an empty dataset: β̂ = 0, covariance = Σ₀.
    pub fn from_prior(prior: &GaussianBelief) -> Self {
        SequentialEstimator {
            mu: DVector::zeros(prior.n()),
            cov: prior.prior_sigma.clone(),
            sigma2: prior.sigma2,
            stack: Vec::new(),
        }
    }

    /// Batch-initialize from existing data (one exact solve).
    pub fn from_data(prior: &GaussianBelief, data: &MeasurementSet) -> Result<Self> {
        if data.is_empty() {
            return Ok(SequentialEstimator::from_prior(prior));
        }
        let zero_mean = GaussianBelief {
            mu: DVector::zeros(prior.n()),
            sigma: prior.prior_sigma.clone(),
            prior_mu: DVector::zeros(prior.n()),
            prior_sigma: prior.prior_sigma.clone(),
            sigma2: prior.sigma2,
        };
        let posterior = posterior_update(&zero_mean, data)?;
        Ok(SequentialEstimator {
            mu: posterior.mu,
            cov: posterior.sigma,
            sigma2: prior.sigma2,
            stack: Vec::new(),
        })
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn depth(&self) -> usize {
        self.stack.len()
    }

    /// Reward and updated-mean ingredients for a candidate measurement,
    /// without committing it. Returns λ⁻ of adding `(action, o)` against a
    /// sample residual `resid = β − β̂(D)`.
    pub fn lambda_peek(&self, action: &SensingAction, o: f64, resid: &DVector<f64>) -> f64 {
        let u = sparse_cov_product(&self.cov, &action.cells, action.weight);
        let s = action.weight * action.cells.iter().map(|&c| u[c]).sum::<f64>();
        let denom = self.sigma2 + s;
        let innovation = o - action.dot(&self.mu);
        let alpha = innovation / denom;
        // ‖resid‖² − ‖resid − α·u‖² = 2α·uᵀresid − α²‖u‖²
        (2.0 * alpha * u.dot(resid) - alpha * alpha * u.norm_squared()).max(0.0)
    }

    /// Commit a measurement, saving state for a later `pop`.
    pub fn push(&mut self, action: &SensingAction, y: f64) {
        self.stack.push((self.mu.clone(), self.cov.clone()));
        self.commit(action, y);
    }

    /// Commit a measurement with no undo snapshot.
    pub fn commit(&mut self, action: &SensingAction, y: f64) {
        let u = sparse_cov_product(&self.cov, &action.cells, action.weight);
        let s = action.weight * action.cells.iter().map(|&c| u[c]).sum::<f64>();
        let denom = self.sigma2 + s;
        let innovation = y - action.dot(&self.mu);
        self.mu.axpy(innovation / denom, &u, 1.0);
        let n = self.mu.len();
        for i in 0..n {
            let ui = u[i] / denom;
            for j in 0..n {
                self.cov[(i, j)] -= ui * u[j];
            }
        }
    }

    /// Undo the most recent `push`.
    pub fn pop(&mut self) {
        let (mu, cov) = self.stack.pop().expect("pop without matching push");
        self.mu = mu;
        self.cov = cov;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_action_space, GridSpec};
    use crate::seeding::stream_rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random_data(n: usize, count: usize, seed: u64) -> MeasurementSet {
        let mut rng = stream_rng(seed, &[n as u64, count as u64]);
        let mut data = MeasurementSet::new(n);
        for _ in 0..count {
            let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let y = rng.random_range(-2.0..2.0);
            data.push_row(x, y).unwrap();
        }
        data
    }

    #[test]
    fn empty_data_returns_the_prior_exactly() {
        let prior = GaussianBelief::scaled_prior(3, 0.25, 2.0, 0.5).unwrap();
        let posterior = posterior_update(&prior, &MeasurementSet::new(3)).unwrap();
        assert_eq!(posterior.mu, prior.prior_mu);
        assert_eq!(posterior.sigma, prior.prior_sigma);
    }

    #[test]
    fn scalar_bayes_rule() {
        let prior = GaussianBelief::standard_prior(1, 1.0).unwrap();
        let mut data = MeasurementSet::new(1);
        data.push_row(DVector::from_element(1, 1.0), 1.0).unwrap();
        let posterior = posterior_update(&prior, &data).unwrap();
        assert_abs_diff_eq!(posterior.mu[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(posterior.sigma[(0, 0)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn posterior_matches_dense_lu_oracle() {
        for seed in 0..20 {
            let n = 4;
            let prior = GaussianBelief::standard_prior(n, 0.3).unwrap();
            let data = random_data(n, 3, seed);
            let posterior = posterior_update(&prior, &data).unwrap();

            // Independent route: explicit LU inverse of the precision matrix.
            let x = data.x_matrix();
            let precision =
                DMatrix::<f64>::identity(n, n) + x.transpose() * &x / prior.sigma2;
            let sigma_oracle = precision.clone().try_inverse().unwrap();
            let mu_oracle = precision
                .lu()
                .solve(&(x.transpose() * data.y_vector() / prior.sigma2))
                .unwrap();

            assert!((posterior.mu - mu_oracle).amax() < 1e-8);
            assert!((posterior.sigma - sigma_oracle).amax() < 1e-8);
        }
    }

    #[test]
    fn posterior_is_order_invariant() {
        let n = 5;
        let prior = GaussianBelief::standard_prior(n, 0.1).unwrap();
        let data = random_data(n, 8, 3);
        let mut reversed = MeasurementSet::new(n);
        for i in (0..data.count()).rev() {
            reversed
                .push_row(data.rows()[i].clone(), data.observations()[i])
                .unwrap();
        }
        let a = posterior_update(&prior, &data).unwrap();
        let b = posterior_update(&prior, &reversed).unwrap();
        assert!((a.mu - b.mu).amax() < 1e-8);
        assert!((a.sigma - b.sigma).amax() < 1e-8);
    }

    #[test]
    fn covariance_trace_shrinks_as_data_arrives() {
        let n = 6;
        let prior = GaussianBelief::standard_prior(n, 0.5).unwrap();
        let mut data = MeasurementSet::new(n);
        let mut last_trace = prior.prior_sigma.trace();
        let mut rng = stream_rng(9, &[]);
        for _ in 0..10 {
            let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            data.push_row(x, rng.random_range(-1.0..1.0)).unwrap();
            let trace = posterior_update(&prior, &data).unwrap().sigma.trace();
            assert!(trace <= last_trace + 1e-12);
            last_trace = trace;
        }
    }

    #[test]
    fn degenerate_noise_scale_surfaces_a_numerical_error() {
        let prior = GaussianBelief {
            sigma2: 1e-320,
            ..GaussianBelief::standard_prior(2, 1.0).unwrap()
        };
        let data = random_data(2, 2, 0);
        assert!(matches!(
            posterior_update(&prior, &data),
            Err(CastError::Numerical(_))
        ));
    }

    #[test]
    fn estimate_on_empty_data_is_zero() {
        let prior = GaussianBelief::standard_prior(4, 1.0).unwrap();
        let est = estimate(&MeasurementSet::new(4), &prior).unwrap();
        assert_eq!(est, DVector::zeros(4));
    }

    #[test]
    fn repeated_point_senses_converge_on_the_target() {
        let grid = GridSpec::new(2, 2, 10.0, 5.0).unwrap();
        let space = build_action_space(&grid).unwrap();
        let prior = GaussianBelief::standard_prior(4, 1e-6).unwrap();
        let action = space.get(space.point_sense_id(0, 1));
        let mut data = MeasurementSet::new(4);
        let mut rng = stream_rng(21, &[]);
        for _ in 0..100 {
            let y = 1.0 + rng.random_range(-1e-3..1e-3);
            data.push_action(action, y);
        }
        let est = estimate(&data, &prior).unwrap();
        assert!((est[1] - 1.0).abs() < 0.05);
    }

    #[test]
    fn estimate_equals_posterior_mean_under_zero_prior_mean() {
        for seed in 0..20 {
            let n = 6;
            let prior = GaussianBelief::standard_prior(n, 0.7).unwrap();
            let data = random_data(n, 5, 100 + seed);
            let est = estimate(&data, &prior).unwrap();
            let posterior = posterior_update(&prior, &data).unwrap();
            assert!((est - posterior.mu).amax() < 1e-8);
        }
    }

    #[test]
    fn thompson_collapses_to_the_mean_for_tiny_covariance() {
        let n = 3;
        let belief = GaussianBelief {
            mu: DVector::from_vec(vec![0.2, -0.4, 0.9]),
            sigma: DMatrix::identity(n, n) * 1e-20,
            ..GaussianBelief::standard_prior(n, 1.0).unwrap()
        };
        let mut rng = stream_rng(4, &[]);
        let sample = thompson_sample(&belief, &mut rng).unwrap();
        assert!((sample - belief.mu).amax() < 1e-9);
    }

    #[test]
    fn thompson_moments_match_the_belief() {
        let n = 2;
        let belief = GaussianBelief::standard_prior(n, 1.0).unwrap();
        let mut rng = stream_rng(8, &[]);
        let count = 100_000;
        let mut mean = DVector::zeros(n);
        let mut cov = DMatrix::zeros(n, n);
        let samples: Vec<_> = (0..count)
            .map(|_| thompson_sample(&belief, &mut rng).unwrap())
            .collect();
        for s in &samples {
            mean += s;
        }
        mean /= count as f64;
        for s in &samples {
            let d = s - &mean;
            cov += &d * d.transpose();
        }
        cov /= (count - 1) as f64;
        assert!(mean.amax() < 0.02);
        assert!((cov - DMatrix::<f64>::identity(n, n)).amax() < 0.05);
    }

    #[test]
    fn cached_sampler_reproduces_thompson_draws() {
        let n = 4;
        let belief = GaussianBelief {
            mu: DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4]),
            ..GaussianBelief::standard_prior(n, 1.0).unwrap()
        };
        let sampler = CholeskySampler::new(&belief).unwrap();
        let mut rng_a = stream_rng(55, &[]);
        let mut rng_b = rng_a.clone();
        for _ in 0..5 {
            assert_eq!(
                sampler.draw(&mut rng_a),
                thompson_sample(&belief, &mut rng_b).unwrap()
            );
        }
    }

    #[test]
    fn discretize_thresholds_strictly() {
        let sample = DVector::from_vec(vec![0.9, 0.4, 0.51, 0.5]);
        let bin = discretize(&sample, 0.5);
        assert_eq!(bin.beta_bin.as_slice(), &[1.0, 0.0, 1.0, 0.0]);
        assert!(discretize(&DVector::zeros(3), 0.5).beta_bin.iter().all(|&v| v == 0.0));
        // Idempotent on binary input.
        let again = discretize(&bin.beta_bin, 0.5);
        assert_eq!(again.beta_bin, bin.beta_bin);
        assert_eq!(bin.support(), vec![0, 2]);
    }

    #[test]
    fn lambda_minus_is_zero_on_identical_datasets() {
        let prior = GaussianBelief::standard_prior(3, 0.4).unwrap();
        let data = random_data(3, 4, 7);
        let beta = DVector::from_vec(vec![1.0, 0.0, 1.0]);
        assert_eq!(lambda_minus(&beta, &data, &data, &prior).unwrap(), 0.0);
    }

    #[test]
    fn lambda_minus_scalar_case() {
        // Empty data: β̂ = 0. One measurement x=[1], y=1 with σ² = 1 moves the
        // estimate to 0.5, exactly onto the sample: λ⁻ = 0.5² = 0.25.
        let prior = GaussianBelief::standard_prior(1, 1.0).unwrap();
        let before = MeasurementSet::new(1);
        let mut after = before.clone();
        after.push_row(DVector::from_element(1, 1.0), 1.0).unwrap();
        let beta = DVector::from_element(1, 0.5);
        let lam = lambda_minus(&beta, &before, &after, &prior).unwrap();
        assert_abs_diff_eq!(lam, 0.25, epsilon = 1e-12);

        // A sample sitting on the old estimate can only get farther: clamped to 0.
        let at_zero = DVector::from_element(1, 0.0);
        assert_eq!(lambda_minus(&at_zero, &before, &after, &prior).unwrap(), 0.0);
    }

    #[test]
    fn lambda_minus_rejects_non_extensions() {
        let prior = GaussianBelief::standard_prior(2, 1.0).unwrap();
        let a = random_data(2, 3, 1);
        let b = random_data(2, 2, 2);
        let beta = DVector::zeros(2);
        assert!(lambda_minus(&beta, &a, &b, &prior).is_err());
    }

    #[test]
    fn sequential_estimator_tracks_batch_solutions() {
        let grid = GridSpec::new(4, 4, 10.0, 5.0).unwrap();
        let space = build_action_space(&grid).unwrap();
        let prior = GaussianBelief::standard_prior(16, 1.0 / 16.0).unwrap();
        let mut rng = stream_rng(31, &[]);

        let mut est = SequentialEstimator::from_prior(&prior);
        let mut data = MeasurementSet::new(16);
        for step in 0..12 {
            let action = space.get(rng.random_range(0..space.len()));
            let y = rng.random_range(-0.5..1.5);
            est.push(action, y);
            data.push_action(action, y);
            let batch = estimate(&data, &prior).unwrap();
            assert!(
                (est.mu() - &batch).amax() < 1e-8,
                "diverged at step {step}"
            );
        }
    }

    #[test]
    fn sequential_estimator_pop_restores_state() {
        let grid = GridSpec::new(2, 2, 10.0, 5.0).unwrap();
        let space = build_action_space(&grid).unwrap();
        let prior = GaussianBelief::standard_prior(4, 0.25).unwrap();
        let mut est = SequentialEstimator::from_prior(&prior);
        est.push(space.get(1), 0.7);
        let mu_before = est.mu().clone();
        est.push(space.get(2), -0.3);
        est.push(space.get(0), 0.1);
        est.pop();
        est.pop();
        assert_eq!(est.mu(), &mu_before);
        assert_eq!(est.depth(), 1);
    }

    #[test]
    fn lambda_peek_matches_committed_reward() {
        let grid = GridSpec::new(4, 4, 10.0, 5.0).unwrap();
        let space = build_action_space(&grid).unwrap();
        let prior = GaussianBelief::standard_prior(16, 1.0 / 16.0).unwrap();
        let mut rng = stream_rng(37, &[]);
        let mut est = SequentialEstimator::from_prior(&prior);
        let mut data = MeasurementSet::new(16);
        for _ in 0..6 {
            let action = space.get(rng.random_range(0..space.len()));
            let y = rng.random_range(-0.5..1.5);
            est.push(action, y);
            data.push_action(action, y);
        }

        let beta = DVector::from_fn(16, |i, _| if i % 5 == 0 { 1.0 } else { 0.0 });
        let resid = &beta - est.mu();
        for id in [0, 3, 9, 20] {
            let action = space.get(id);
            let o = action.dot(&beta);
            let peek = est.lambda_peek(action, o, &resid);

            let mut extended = data.clone();
            extended.push_action(action, o);
            let oracle = lambda_minus(&beta, &data, &extended, &prior).unwrap();
            assert_abs_diff_eq!(peek, oracle, epsilon = 1e-9);
        }
    }

    #[test]
    fn belief_rank_one_matches_posterior_update() {
        let grid = GridSpec::new(4, 4, 10.0, 5.0).unwrap();
        let space = build_action_space(&grid).unwrap();
        let prior = GaussianBelief::scaled_prior(16, 0.1, 1.0, 1.0 / 16.0).unwrap();
        let mut belief = prior.clone();
        let mut data = MeasurementSet::new(16);
        let mut rng = stream_rng(41, &[]);
        for _ in 0..10 {
            let action = space.get(rng.random_range(0..space.len()));
            let y = rng.random_range(-0.5..1.5);
            belief.rank_one_update(action, y);
            data.push_action(action, y);
        }
        let batch = posterior_update(&prior, &data).unwrap();
        assert!((belief.mu - batch.mu).amax() < 1e-8);
        assert!((belief.sigma - batch.sigma).amax() < 1e-8);
    }

    #[test]
    fn snapshot_serializes_mean_and_diagonal() {
        let belief = GaussianBelief::standard_prior(2, 1.0).unwrap();
        let json = serde_json::to_string(&belief.snapshot()).unwrap();
        assert!(json.contains("\"mu\":[0.0,0.0]"));
        assert!(json.contains("\"sigma_diag\":[1.0,1.0]"));
    }
}
