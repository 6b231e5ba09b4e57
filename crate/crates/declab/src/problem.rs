//! Synthetic problem generation and the signal/noise split.
//!
//! Every generator is a pure function of its spec (including the seed), so
//! concurrent trials with distinct seeds never interfere.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed::stream_rng;

/// Covariance descriptor for the input distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Identity,
    /// Per-coordinate variances of independent Gaussian inputs.
    Diagonal(Vec<f64>),
}

impl Covariance {
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            Covariance::Identity => Ok(()),
            Covariance::Diagonal(v) => {
                if v.len() != d {
                    return Err(Error::dim(format!(
                        "covariance has {} entries, dimension is {}",
                        v.len(),
                        d
                    )));
                }
                if v.iter().any(|&e| e <= 0.0 || !e.is_finite()) {
                    return Err(Error::spec("covariance entries must be positive"));
                }
                Ok(())
            }
        }
    }

    pub fn variance(&self, j: usize) -> f64 {
        match self {
            Covariance::Identity => 1.0,
            Covariance::Diagonal(v) => v[j],
        }
    }

    /// v' Sigma v
    pub fn quad_form(&self, v: &DVector<f64>) -> f64 {
        match self {
            Covariance::Identity => v.dot(v),
            Covariance::Diagonal(s) => v
                .iter()
                .zip(s.iter())
                .map(|(vi, si)| vi * vi * si)
                .sum(),
        }
    }

    /// (min, max) eigenvalue of the covariance matrix.
    pub fn eigen_range(&self, d: usize) -> (f64, f64) {
        match self {
            Covariance::Identity => (1.0, 1.0),
            Covariance::Diagonal(v) => {
                let _ = d;
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &e in v {
                    lo = lo.min(e);
                    hi = hi.max(e);
                }
                (lo, hi)
            }
        }
    }
}

/// Ground-truth parameter descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaStar {
    /// Dense Gaussian direction rescaled to the target norm.
    DenseRandom { norm: f64 },
    /// `support` leading coordinates carry equal-magnitude random-sign weight.
    Sparse { support: usize, norm: f64 },
}

/// Output-noise law.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseLaw {
    Gaussian { std: f64 },
    BoundedUniform { bound: f64 },
    /// Gaussian clipped to `[-bound, bound]`; the clip is recorded so
    /// V-dependent bounds use the actual bound.
    ClippedGaussian { std: f64, bound: f64 },
}

impl NoiseLaw {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            NoiseLaw::Gaussian { std } => *std >= 0.0,
            NoiseLaw::BoundedUniform { bound } => *bound >= 0.0,
            NoiseLaw::ClippedGaussian { std, bound } => *std >= 0.0 && *bound > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::spec("noise parameter must be nonnegative"))
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            NoiseLaw::Gaussian { std } => {
                let z: f64 = rng.sample(StandardNormal);
                std * z
            }
            NoiseLaw::BoundedUniform { bound } => {
                if *bound == 0.0 {
                    0.0
                } else {
                    rng.gen_range(-bound..=*bound)
                }
            }
            NoiseLaw::ClippedGaussian { std, bound } => {
                let z: f64 = rng.sample(StandardNormal);
                (std * z).clamp(-bound, *bound)
            }
        }
    }

    /// Analytic E[eps^2].
    pub fn second_moment(&self) -> f64 {
        match self {
            NoiseLaw::Gaussian { std } => std * std,
            NoiseLaw::BoundedUniform { bound } => bound * bound / 3.0,
            NoiseLaw::ClippedGaussian { std, bound } => {
                if *std == 0.0 {
                    return 0.0;
                }
                // E[min(X^2, V^2)] for X ~ N(0, std^2), a = V/std:
                // std^2 [erf(a/√2) - a √(2/π) e^{-a²/2}] + V^2 [1 - erf(a/√2)]
                let a = bound / std;
                let erf_a = statrs::function::erf::erf(a / std::f64::consts::SQRT_2);
                let phi = (-0.5 * a * a).exp() * (2.0 / std::f64::consts::PI).sqrt();
                std * std * (erf_a - a * phi) + bound * bound * (1.0 - erf_a)
            }
        }
    }

    /// Uniform noise bound V when one exists.
    pub fn bound(&self) -> Option<f64> {
        match self {
            NoiseLaw::Gaussian { .. } => None,
            NoiseLaw::BoundedUniform { bound } | NoiseLaw::ClippedGaussian { bound, .. } => {
                Some(*bound)
            }
        }
    }
}

/// Overparameterized linear-regression problem instance descriptor.
#[derive(Debug, Clone)]
pub struct LinearProblemSpec {
    pub d: usize,
    pub n: usize,
    pub covariance: Covariance,
    pub theta_star: ThetaStar,
    pub noise: NoiseLaw,
    pub seed: u64,
}

impl LinearProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 {
            return Err(Error::spec("d and n must be >= 1"));
        }
        self.covariance.validate(self.d)?;
        self.noise.validate()
    }

    /// Realize the ground-truth parameter for this spec.
    ///
    /// Drawn from its own sub-stream, so rescaling or re-shaping theta*
    /// leaves the design matrix and noise draws untouched.
    pub fn theta_star_vector(&self) -> DVector<f64> {
        let mut rng = stream_rng(self.seed, "theta", 0);
        match &self.theta_star {
            ThetaStar::DenseRandom { norm } => {
                let mut v = DVector::from_fn(self.d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let len = v.norm();
                if len > 0.0 {
                    v *= norm / len;
                }
                v
            }
            ThetaStar::Sparse { support, norm } => {
                let k = (*support).min(self.d);
                let mut v = DVector::zeros(self.d);
                if k > 0 {
                    let w = norm / (k as f64).sqrt();
                    for j in 0..k {
                        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                        v[j] = sign * w;
                    }
                }
                v
            }
        }
    }
}

/// One regression trial: design matrix, noisy/clean responses, noise vector.
#[derive(Debug, Clone)]
pub struct RegressionDataset {
    pub x: DMatrix<f64>,
    pub y_noisy: DVector<f64>,
    pub y_clean: DVector<f64>,
    pub eps: DVector<f64>,
    /// Ground truth used to produce `y_clean`.
    pub theta_star: DVector<f64>,
    /// Analytic E[eps^2] of the generating law.
    pub noise_second_moment: f64,
}

impl RegressionDataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }
}

/// Draws one seeded regression dataset. `y_noisy = y_clean + eps` exactly.
pub fn gen_linear_dataset(spec: &LinearProblemSpec) -> Result<RegressionDataset> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);

    let mut x_rng = stream_rng(spec.seed, "x", 0);
    let stds: Vec<f64> = (0..d).map(|j| spec.covariance.variance(j).sqrt()).collect();
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            let z: f64 = x_rng.sample(StandardNormal);
            x[(i, j)] = stds[j] * z;
        }
    }

    let mut eps_rng = stream_rng(spec.seed, "eps", 0);
    let eps = DVector::from_fn(n, |_, _| spec.noise.sample(&mut eps_rng));

    let theta_star = spec.theta_star_vector();
    let y_clean = &x * &theta_star;
    let y_noisy = &y_clean + &eps;

    Ok(RegressionDataset {
        x,
        y_noisy,
        y_clean,
        eps,
        theta_star,
        noise_second_moment: spec.noise.second_moment(),
    })
}

/// Splits a dataset into its bias (clean responses) and variance (pure noise)
/// surrogates. Both share the design matrix; responses add back exactly.
pub fn split_signal_noise(ds: &RegressionDataset) -> (RegressionDataset, RegressionDataset) {
    let n = ds.n();
    let bias = RegressionDataset {
        x: ds.x.clone(),
        y_noisy: ds.y_clean.clone(),
        y_clean: ds.y_clean.clone(),
        eps: DVector::zeros(n),
        theta_star: ds.theta_star.clone(),
        noise_second_moment: 0.0,
    };
    let variance = RegressionDataset {
        x: ds.x.clone(),
        y_noisy: ds.eps.clone(),
        y_clean: DVector::zeros(n),
        eps: ds.eps.clone(),
        theta_star: DVector::zeros(ds.d()),
        noise_second_moment: ds.noise_second_moment,
    };
    (bias, variance)
}

/// Law of the per-coordinate measurement scalars in diagonal recovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementLaw {
    /// Standard Gaussian: matches the closed-form derivation.
    Gaussian,
    /// Uniform on [-sqrt(3), sqrt(3)]: bounded with unit variance.
    BoundedUniform,
}

/// Diagonal matrix-recovery problem instance descriptor.
#[derive(Debug, Clone)]
pub struct DiagonalRecoverySpec {
    pub d: usize,
    pub r: usize,
    /// Positive singular values, nonincreasing; coordinates beyond `r` are 0.
    pub sigma_star: Vec<f64>,
    pub n: usize,
    pub noise_std: f64,
    /// Noise bound V; clipping is applied only when positive.
    pub noise_bound: f64,
    pub alpha: f64,
    pub measurement_law: MeasurementLaw,
    pub seed: u64,
}

impl DiagonalRecoverySpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 {
            return Err(Error::spec("d and n must be >= 1"));
        }
        if self.r > self.d {
            return Err(Error::spec("rank r must satisfy r <= d"));
        }
        if self.sigma_star.len() != self.r {
            return Err(Error::spec("sigma_star must have exactly r entries"));
        }
        for w in self.sigma_star.windows(2) {
            if w[1] > w[0] {
                return Err(Error::spec("sigma_star must be nonincreasing"));
            }
        }
        if self.sigma_star.iter().any(|&s| s <= 0.0) {
            return Err(Error::spec("sigma_star entries must be positive"));
        }
        if self.noise_std < 0.0 || self.noise_bound < 0.0 {
            return Err(Error::spec("noise parameters must be nonnegative"));
        }
        if self.alpha <= 0.0 {
            return Err(Error::spec("initialization scale alpha must be positive"));
        }
        Ok(())
    }

    /// True singular value of coordinate `j` (zero beyond the rank).
    pub fn sigma(&self, j: usize) -> f64 {
        if j < self.r {
            self.sigma_star[j]
        } else {
            0.0
        }
    }
}

/// Per-coordinate measurement data for diagonal recovery.
#[derive(Debug, Clone)]
pub struct CoordinateMeasurements {
    pub a: Vec<f64>,
    pub eps: Vec<f64>,
    pub y: Vec<f64>,
}

/// All coordinates of one diagonal-recovery trial.
#[derive(Debug, Clone)]
pub struct DiagonalMeasurements {
    pub coords: Vec<CoordinateMeasurements>,
    pub sigma_star: Vec<f64>,
    /// Whether any noise draw was actually clipped.
    pub clipped: bool,
}

impl DiagonalMeasurements {
    pub fn d(&self) -> usize {
        self.coords.len()
    }

    pub fn n(&self) -> usize {
        self.coords.first().map_or(0, |c| c.a.len())
    }
}

/// Draws seeded measurements `y_j = a_j sigma*_j + eps_j` for every coordinate.
pub fn gen_diagonal_measurements(spec: &DiagonalRecoverySpec) -> Result<DiagonalMeasurements> {
    spec.validate()?;
    let mut clipped = false;
    let mut coords = Vec::with_capacity(spec.d);
    for j in 0..spec.d {
        let mut a_rng = stream_rng(spec.seed, "diag-a", j as u64);
        let mut e_rng = stream_rng(spec.seed, "diag-eps", j as u64);
        let sigma = spec.sigma(j);
        let mut a = Vec::with_capacity(spec.n);
        let mut eps = Vec::with_capacity(spec.n);
        let mut y = Vec::with_capacity(spec.n);
        for _ in 0..spec.n {
            let ai = match spec.measurement_law {
                MeasurementLaw::Gaussian => a_rng.sample::<f64, _>(StandardNormal),
                MeasurementLaw::BoundedUniform => {
                    let s = 3f64.sqrt();
                    a_rng.gen_range(-s..=s)
                }
            };
            let mut ei = spec.noise_std * e_rng.sample::<f64, _>(StandardNormal);
            if spec.noise_bound > 0.0 && ei.abs() > spec.noise_bound {
                ei = ei.clamp(-spec.noise_bound, spec.noise_bound);
                clipped = true;
            }
            a.push(ai);
            eps.push(ei);
            y.push(ai * sigma + ei);
        }
        coords.push(CoordinateMeasurements { a, eps, y });
    }
    let sigma_star = (0..spec.d).map(|j| spec.sigma(j)).collect();
    Ok(DiagonalMeasurements {
        coords,
        sigma_star,
        clipped,
    })
}

/// Empirical per-coordinate quantities driving the closed-form dynamics.
#[derive(Debug, Clone, Copy)]
pub struct CoordinateStats {
    /// Empirical second moment (1/n) sum a_i^2.
    pub xi: f64,
    /// Empirical signal target xi * sigma*_j.
    pub s_b: f64,
    /// Empirical noise target (1/n) sum a_i eps_i.
    pub s_v: f64,
    /// s_b + s_v (exact).
    pub s_emp: f64,
    /// True singular value of this coordinate.
    pub sigma_true: f64,
}

/// Computes the empirical stats of coordinate `j`.
pub fn coordinate_stats(m: &DiagonalMeasurements, j: usize) -> Result<CoordinateStats> {
    let c = m
        .coords
        .get(j)
        .ok_or_else(|| Error::dim(format!("coordinate {} out of range (d = {})", j, m.d())))?;
    let n = c.a.len() as f64;
    let xi = c.a.iter().map(|a| a * a).sum::<f64>() / n;
    let s_v = c.a.iter().zip(&c.eps).map(|(a, e)| a * e).sum::<f64>() / n;
    let sigma_true = m.sigma_star[j];
    let s_b = xi * sigma_true;
    Ok(CoordinateStats {
        xi,
        s_b,
        s_v,
        s_emp: s_b + s_v,
        sigma_true,
    })
}

/// General (non-diagonal) matrix-recovery instance descriptor.
#[derive(Debug, Clone)]
pub struct GeneralRecoverySpec {
    pub d: usize,
    pub r: usize,
    pub sigma_star: Vec<f64>,
    pub n: usize,
    pub noise_std: f64,
    pub alpha: f64,
    pub stepsize: f64,
    pub seed: u64,
}

impl GeneralRecoverySpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 {
            return Err(Error::spec("d and n must be >= 1"));
        }
        if self.r > self.d || self.sigma_star.len() != self.r {
            return Err(Error::spec("need r <= d and exactly r singular values"));
        }
        if self.sigma_star.iter().any(|&s| s <= 0.0) {
            return Err(Error::spec("sigma_star entries must be positive"));
        }
        if self.alpha < 0.0 || self.stepsize <= 0.0 || self.noise_std < 0.0 {
            return Err(Error::spec("alpha, stepsize, noise_std out of range"));
        }
        Ok(())
    }

    /// Ground truth X* = V Sigma V' with a seeded orthonormal factor.
    pub fn ground_truth(&self) -> DMatrix<f64> {
        let mut rng = stream_rng(self.seed, "gen-v", 0);
        let g = DMatrix::from_fn(self.d, self.r, |_, _| rng.sample::<f64, _>(StandardNormal));
        // Gram-Schmidt on the r Gaussian columns
        let mut v = g;
        for c in 0..self.r {
            for p in 0..c {
                let proj = v.column(c).dot(&v.column(p));
                let col_p = v.column(p).clone_owned();
                let mut col_c = v.column_mut(c);
                col_c.axpy(-proj, &col_p, 1.0);
            }
            let norm = v.column(c).norm();
            v.column_mut(c).scale_mut(1.0 / norm);
        }
        let mut x_star = DMatrix::zeros(self.d, self.d);
        for c in 0..self.r {
            let col = v.column(c).clone_owned();
            x_star += self.sigma_star[c] * &col * col.transpose();
        }
        x_star
    }
}

/// Measurements for general matrix recovery.
#[derive(Debug, Clone)]
pub struct GeneralMeasurements {
    pub a_mats: Vec<DMatrix<f64>>,
    pub y: Vec<f64>,
    pub y_clean: Vec<f64>,
    pub eps: Vec<f64>,
    pub x_star: DMatrix<f64>,
}

/// Draws `n` i.i.d. standard-Gaussian measurement matrices and responses
/// `y_i = <A_i, X*> + eps_i`.
pub fn gen_general_measurements(spec: &GeneralRecoverySpec) -> Result<GeneralMeasurements> {
    spec.validate()?;
    let x_star = spec.ground_truth();
    let mut a_rng = stream_rng(spec.seed, "gen-a", 0);
    let mut e_rng = stream_rng(spec.seed, "gen-eps", 0);
    let mut a_mats = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    let mut y_clean = Vec::with_capacity(spec.n);
    let mut eps = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let a = DMatrix::from_fn(spec.d, spec.d, |_, _| a_rng.sample::<f64, _>(StandardNormal));
        let clean = a.dot(&x_star);
        let e = spec.noise_std * e_rng.sample::<f64, _>(StandardNormal);
        y_clean.push(clean);
        eps.push(e);
        y.push(clean + e);
        a_mats.push(a);
    }
    Ok(GeneralMeasurements {
        a_mats,
        y,
        y_clean,
        eps,
        x_star,
    })
}
