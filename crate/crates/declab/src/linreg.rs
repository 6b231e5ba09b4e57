//! Gradient descent on overparameterized least squares, with the exact
//! spectral closed form used as an oracle and for cheap long-horizon traces.
//!
//! Loss convention: L(theta) = (1/2n) ||X theta - Y||^2, so one GD step is
//! theta <- theta - (lambda/n) X'(X theta - Y).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{Covariance, RegressionDataset};

/// Gradient-descent configuration.
#[derive(Debug, Clone)]
pub struct GdConfig {
    pub stepsize: f64,
    pub steps: usize,
    /// Starting point; zeros when absent.
    pub init: Option<DVector<f64>>,
    /// Record the iterate every `record_every` steps (step 0 and the final
    /// step are always recorded). 0 means record only those two.
    pub record_every: usize,
}

impl GdConfig {
    pub fn zero_init(stepsize: f64, steps: usize) -> Self {
        GdConfig {
            stepsize,
            steps,
            init: None,
            record_every: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.stepsize <= 0.0 || !self.stepsize.is_finite() {
            return Err(Error::spec("stepsize must be positive and finite"));
        }
        Ok(())
    }

    fn init_vector(&self, d: usize) -> Result<DVector<f64>> {
        match &self.init {
            None => Ok(DVector::zeros(d)),
            Some(v) if v.len() == d => Ok(v.clone()),
            Some(v) => Err(Error::dim(format!(
                "init has length {}, dimension is {}",
                v.len(),
                d
            ))),
        }
    }
}

/// Recorded iterates of one optimization run.
#[derive(Debug, Clone)]
pub struct ParamTrace {
    pub steps: Vec<usize>,
    pub params: Vec<DVector<f64>>,
}

impl ParamTrace {
    pub fn last(&self) -> &DVector<f64> {
        self.params.last().expect("trace is never empty")
    }

    /// Iterate at exactly step `t`, if recorded.
    pub fn at(&self, t: usize) -> Option<&DVector<f64>> {
        self.steps.iter().position(|&s| s == t).map(|i| &self.params[i])
    }

    pub fn sup_norm(&self) -> f64 {
        self.params.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }
}

fn should_record(t: usize, steps: usize, every: usize) -> bool {
    t == 0 || t == steps || (every > 0 && t % every == 0)
}

/// Runs full-batch GD on the dataset, recording iterates.
///
/// Warns (does not fail) when the stepsize exceeds the admissible range
/// 2n / s_max(X)^2; the iteration still runs so divergence is observable.
pub fn gd_run(ds: &RegressionDataset, cfg: &GdConfig) -> Result<ParamTrace> {
    cfg.validate()?;
    let (n, d) = (ds.n(), ds.d());
    let mut theta = cfg.init_vector(d)?;

    let s_max2 = top_gram_eigenvalue(&ds.x);
    if cfg.stepsize * s_max2 / n as f64 >= 2.0 {
        log::warn!(
            "stepsize {} exceeds admissible 2n/s_max^2 = {:.3e}; GD may diverge",
            cfg.stepsize,
            2.0 * n as f64 / s_max2
        );
    }

    let xt = ds.x.transpose();
    let scale = cfg.stepsize / n as f64;
    let mut steps = Vec::new();
    let mut params = Vec::new();
    if should_record(0, cfg.steps, cfg.record_every) {
        steps.push(0);
        params.push(theta.clone());
    }
    for t in 1..=cfg.steps {
        let residual = &ds.x * &theta - &ds.y_noisy;
        theta -= scale * (&xt * residual);
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged {
                step: t,
                loss: f64::INFINITY,
            });
        }
        if should_record(t, cfg.steps, cfg.record_every) {
            steps.push(t);
            params.push(theta.clone());
        }
    }
    Ok(ParamTrace { steps, params })
}

/// Largest eigenvalue of X'X by power iteration.
fn top_gram_eigenvalue(x: &DMatrix<f64>) -> f64 {
    let d = x.ncols();
    let mut v = DVector::from_element(d, 1.0 / (d as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..60 {
        let w = x.transpose() * (x * &v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = w / norm;
    }
    lambda
}

/// Spectral data shared by every closed-form evaluation on one dataset.
#[derive(Debug, Clone)]
pub struct ClosedForm {
    /// Right singular vectors spanning the row space (d x k).
    v: DMatrix<f64>,
    /// Per-mode contraction factors gamma_i = 1 - lambda s_i^2 / n.
    gamma: Vec<f64>,
    /// Row-space coordinates of theta0 - pinv(X) Y.
    z_row: DVector<f64>,
    /// Component of theta0 - pinv(X) Y orthogonal to the row space.
    z_perp: DVector<f64>,
    /// Min-norm interpolant pinv(X) Y.
    pub min_norm: DVector<f64>,
}

impl ClosedForm {
    /// Iterate at step `t`:
    /// theta(t) = V (gamma^t . z_row) + z_perp + pinv(X) Y.
    pub fn at(&self, t: usize) -> DVector<f64> {
        let mut coords = self.z_row.clone();
        for (c, g) in coords.iter_mut().zip(&self.gamma) {
            *c *= g.powi(t as i32);
        }
        &self.v * coords + &self.z_perp + &self.min_norm
    }

    /// Largest |gamma_i|; contraction iff < 1.
    pub fn spectral_radius(&self) -> f64 {
        self.gamma.iter().map(|g| g.abs()).fold(0.0, f64::max)
    }
}

/// Builds the exact GD closed form from the SVD of X.
pub fn closed_form_params(
    ds: &RegressionDataset,
    stepsize: f64,
    init: Option<&DVector<f64>>,
) -> Result<ClosedForm> {
    if stepsize <= 0.0 || !stepsize.is_finite() {
        return Err(Error::spec("stepsize must be positive and finite"));
    }
    let (n, d) = (ds.n(), ds.d());
    let theta0 = match init {
        None => DVector::zeros(d),
        Some(v) if v.len() == d => v.clone(),
        Some(v) => {
            return Err(Error::dim(format!(
                "init has length {}, dimension is {}",
                v.len(),
                d
            )))
        }
    };

    let svd = ds
        .x
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD of design matrix failed".into()))?;
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V'");
    let s = &svd.singular_values;
    let s_max = s.iter().cloned().fold(0.0, f64::max);
    let cutoff = (n.max(d) as f64) * s_max * 1e-12;

    let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > cutoff).collect();
    let k = keep.len();
    let mut v = DMatrix::zeros(d, k);
    let mut gamma = Vec::with_capacity(k);
    let mut min_norm = DVector::zeros(d);
    for (c, &i) in keep.iter().enumerate() {
        let vi = vt.row(i).transpose();
        let uy = u.column(i).dot(&ds.y_noisy);
        min_norm += (uy / s[i]) * &vi;
        v.set_column(c, &vi);
        gamma.push(1.0 - stepsize * s[i] * s[i] / n as f64);
    }

    let z = theta0 - &min_norm;
    let z_row = v.transpose() * &z;
    let z_perp = &z - &v * &z_row;
    Ok(ClosedForm {
        v,
        gamma,
        z_row,
        z_perp,
        min_norm,
    })
}

/// Minimum-norm interpolant pinv(X) Y for the noisy responses.
pub fn min_norm_solution(ds: &RegressionDataset) -> Result<DVector<f64>> {
    Ok(closed_form_params(ds, 1.0, None)?.min_norm)
}

/// Population excess risk (theta - theta*)' Sigma (theta - theta*).
pub fn linreg_excess_risk(theta: &DVector<f64>, theta_star: &DVector<f64>, cov: &Covariance) -> f64 {
    let diff = theta - theta_star;
    cov.quad_form(&diff)
}

/// Population-minus-empirical risk gap of `theta` on the pure-noise problem:
/// (theta' Sigma theta + E eps^2) - (1/n) ||eps - X theta||^2.
pub fn variance_generalization_gap(
    theta: &DVector<f64>,
    ds: &RegressionDataset,
    cov: &Covariance,
) -> f64 {
    let pop = cov.quad_form(theta) + ds.noise_second_moment;
    let resid = &ds.eps - &ds.x * theta;
    let emp = resid.norm_squared() / ds.n() as f64;
    pop - emp
}

/// Supremum parameter norms over the bias and variance paths: (B', B).
pub fn sup_param_norms(bias: &ParamTrace, variance: &ParamTrace) -> (f64, f64) {
    (bias.sup_norm(), variance.sup_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{
        gen_linear_dataset, split_signal_noise, LinearProblemSpec, NoiseLaw, ThetaStar,
    };
    use approx::assert_relative_eq;

    fn dataset(d: usize, n: usize, noise: f64, seed: u64) -> RegressionDataset {
        gen_linear_dataset(&LinearProblemSpec {
            d,
            n,
            covariance: Covariance::Identity,
            theta_star: ThetaStar::DenseRandom { norm: 2.0 },
            noise: NoiseLaw::Gaussian { std: noise },
            seed,
        })
        .unwrap()
    }

    #[test]
    fn one_step_matches_hand_computation() {
        // X = [[1, 0], [0, 2]], Y = [1, 2], theta0 = 0, lambda = 0.1, n = 2:
        // theta1 = (0.1/2) X'Y = [0.05, 0.2]
        let ds = RegressionDataset {
            x: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]),
            y_noisy: DVector::from_vec(vec![1.0, 2.0]),
            y_clean: DVector::from_vec(vec![1.0, 2.0]),
            eps: DVector::zeros(2),
            theta_star: DVector::from_vec(vec![1.0, 1.0]),
            noise_second_moment: 0.0,
        };
        let trace = gd_run(&ds, &GdConfig::zero_init(0.1, 1)).unwrap();
        let t1 = trace.at(1).unwrap();
        assert_relative_eq!(t1[0], 0.05, max_relative = 1e-15);
        assert_relative_eq!(t1[1], 0.2, max_relative = 1e-15);
    }

    #[test]
    fn closed_form_matches_iterative_gd() {
        let ds = dataset(80, 40, 1.5, 21);
        let cfg = GdConfig::zero_init(0.02, 400);
        let trace = gd_run(&ds, &cfg).unwrap();
        let cf = closed_form_params(&ds, 0.02, None).unwrap();
        for (&t, theta) in trace.steps.iter().zip(&trace.params) {
            let exact = cf.at(t);
            let err = (theta - &exact).norm();
            assert!(err < 1e-8, "step {t}: |iterative - closed| = {err:.3e}");
        }
    }

    #[test]
    fn closed_form_with_nonzero_init() {
        let ds = dataset(30, 50, 1.0, 9);
        let init = DVector::from_fn(30, |i, _| (i as f64 * 0.37).sin());
        let cfg = GdConfig {
            stepsize: 0.05,
            steps: 200,
            init: Some(init.clone()),
            record_every: 50,
        };
        let trace = gd_run(&ds, &cfg).unwrap();
        let cf = closed_form_params(&ds, 0.05, Some(&init)).unwrap();
        for (&t, theta) in trace.steps.iter().zip(&trace.params) {
            assert!((theta - cf.at(t)).norm() < 1e-8);
        }
    }

    #[test]
    fn min_norm_interpolates_and_lies_in_row_space() {
        let ds = dataset(60, 25, 1.0, 3);
        let mn = min_norm_solution(&ds).unwrap();
        let resid = (&ds.x * &mn - &ds.y_noisy).norm();
        assert!(resid < 1e-8, "interpolation residual {resid:.3e}");
        // row-space membership: mn = X' w for some w, so any vector in the
        // null space of X is orthogonal to it. Check via projector X' pinv(X)'.
        let svd = ds.x.clone().svd(true, true);
        let vt = svd.v_t.unwrap();
        let proj = vt.transpose() * &vt * &mn;
        assert!((&proj - &mn).norm() < 1e-8);
    }

    #[test]
    fn gd_converges_to_min_norm_from_zero_init() {
        let ds = dataset(60, 25, 1.0, 13);
        let trace = gd_run(&ds, &GdConfig::zero_init(0.05, 20_000)).unwrap();
        let mn = min_norm_solution(&ds).unwrap();
        let err = (trace.last() - &mn).norm();
        assert!(err < 1e-6, "|theta_T - min_norm| = {err:.3e}");
    }

    #[test]
    fn additivity_of_bias_and_variance_paths() {
        // zero shared init: theta(t) = theta_b(t) + theta_v(t) exactly
        let ds = dataset(80, 40, 2.0, 17);
        let (bias, variance) = split_signal_noise(&ds);
        let cfg = GdConfig::zero_init(0.02, 150);
        let full = gd_run(&ds, &cfg).unwrap();
        let b = gd_run(&bias, &cfg).unwrap();
        let v = gd_run(&variance, &cfg).unwrap();
        for i in 0..full.params.len() {
            let gap = (&full.params[i] - (&b.params[i] + &v.params[i])).norm();
            assert!(gap < 1e-10, "step {}: additivity gap {gap:.3e}", full.steps[i]);
        }
    }

    #[test]
    fn excess_risk_zero_at_truth_and_quadratic() {
        let theta_star = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let cov = Covariance::Diagonal(vec![2.0, 1.0, 0.5]);
        assert_eq!(linreg_excess_risk(&theta_star, &theta_star, &cov), 0.0);
        let theta = DVector::from_vec(vec![2.0, -2.0, 0.5]);
        assert_relative_eq!(
            linreg_excess_risk(&theta, &theta_star, &cov),
            2.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn variance_gap_nondecreasing_identity_covariance() {
        // gap along the GD variance path never decreases (up to roundoff)
        let ds = dataset(120, 60, 2.0, 31);
        let (_, variance) = split_signal_noise(&ds);
        let trace = gd_run(&variance, &GdConfig::zero_init(0.02, 300)).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for theta in &trace.params {
            let gap = variance_generalization_gap(theta, &variance, &Covariance::Identity);
            assert!(gap >= prev - 1e-9, "gap decreased: {prev} -> {gap}");
            prev = gap;
        }
    }

    #[test]
    fn diverging_stepsize_reports_divergence() {
        let ds = dataset(20, 40, 1.0, 5);
        let r = gd_run(&ds, &GdConfig::zero_init(500.0, 4000));
        assert!(matches!(r, Err(Error::Diverged { .. })));
    }

    #[test]
    fn sup_param_norms_order() {
        let ds = dataset(40, 20, 1.0, 8);
        let (bias, variance) = split_signal_noise(&ds);
        let cfg = GdConfig::zero_init(0.05, 100);
        let b = gd_run(&bias, &cfg).unwrap();
        let v = gd_run(&variance, &cfg).unwrap();
        let (bp, bb) = sup_param_norms(&b, &v);
        assert_relative_eq!(bp, b.sup_norm());
        assert_relative_eq!(bb, v.sup_norm());
        assert!(bp > 0.0 && bb > 0.0);
    }
}
