//! Matrix-recovery dynamics.
//!
//! Diagonal case: each squared factor w_j(t) = u_j(t)^2 follows a logistic
//! flow dw/dtau = 2 w (s - xi w) in rescaled time tau = time_scale * t,
//! solved in closed form per branch target s (empirical / bias / variance).
//! The raw gradient flow on L(u) = (1/n) sum (y_i - a_i u^2)^2 is
//! du/dt = 4 u (s - xi u^2), i.e. time_scale = 4 against that convention.
//!
//! General case: full-matrix GD on U U' with Frobenius-sensing losses.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::problem::{coordinate_stats, DiagonalMeasurements};

/// Which response vector drives a training branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchKind {
    /// Noisy responses (the run whose excess risk we want to control).
    Empirical,
    /// Clean responses.
    Bias,
    /// Pure-noise responses.
    Variance,
}

impl BranchKind {
    pub const ALL: [BranchKind; 3] = [BranchKind::Empirical, BranchKind::Bias, BranchKind::Variance];

    pub fn label(self) -> &'static str {
        match self {
            BranchKind::Empirical => "empirical",
            BranchKind::Bias => "bias",
            BranchKind::Variance => "variance",
        }
    }
}

/// Closed-form squared factor w(tau) with w(0) = alpha^2, driven by target
/// `s` and curvature `xi > 0`. `tau` is rescaled time.
///
/// Branches are algebraically the same logistic solution; they are written
/// with the exponential that stays bounded on each side so no branch
/// overflows at large tau. `s = 0` uses the exact limit alpha^2/(1 + 2 xi
/// alpha^2 tau).
pub fn closed_form_u2(s: f64, xi: f64, alpha: f64, tau: f64) -> Result<f64> {
    if xi <= 0.0 {
        return Err(Error::spec("curvature xi must be positive"));
    }
    if alpha <= 0.0 {
        return Err(Error::spec("initialization alpha must be positive"));
    }
    if tau < 0.0 {
        return Err(Error::spec("time must be nonnegative"));
    }
    let a2 = alpha * alpha;
    if s == 0.0 {
        return Ok(a2 / (1.0 + 2.0 * xi * a2 * tau));
    }
    if s > 0.0 {
        // w = s a^2 / (s e^{-2 s tau} + xi a^2 (1 - e^{-2 s tau}))
        let e = (-2.0 * s * tau).exp();
        Ok(s * a2 / (s * e + xi * a2 * (1.0 - e)))
    } else {
        // w = s a^2 e^{2 s tau} / (s - xi a^2 (1 - e^{2 s tau}))
        let e = (2.0 * s * tau).exp();
        Ok(s * a2 * e / (s - xi * a2 * (1.0 - e)))
    }
}

/// RK4 oracle for u' = rate_scale * u * (s - xi u^2), u(0) = alpha,
/// returning u(t_end)^2. Step count doubles until two successive grids agree
/// to 1e-10 (absolute).
pub fn ode_flow_u2(s: f64, xi: f64, alpha: f64, t_end: f64, rate_scale: f64) -> Result<f64> {
    if xi <= 0.0 || alpha <= 0.0 || t_end < 0.0 || rate_scale <= 0.0 {
        return Err(Error::spec("ode_flow_u2: parameters out of range"));
    }
    if t_end == 0.0 {
        return Ok(alpha * alpha);
    }
    let mut n_steps = 64usize;
    let mut prev = rk4_u2(s, xi, alpha, t_end, rate_scale, n_steps);
    loop {
        n_steps *= 2;
        let cur = rk4_u2(s, xi, alpha, t_end, rate_scale, n_steps);
        if (cur - prev).abs() < 1e-10 {
            return Ok(cur);
        }
        if n_steps >= 1 << 22 {
            return Err(Error::Numerical(format!(
                "RK4 failed to converge at {n_steps} steps (last delta {:.3e})",
                (cur - prev).abs()
            )));
        }
        prev = cur;
    }
}

/// Fixed-grid RK4; exposed for convergence-order checks.
pub fn rk4_u2(s: f64, xi: f64, alpha: f64, t_end: f64, rate_scale: f64, n_steps: usize) -> f64 {
    let f = |u: f64| rate_scale * u * (s - xi * u * u);
    let h = t_end / n_steps as f64;
    let mut u = alpha;
    for _ in 0..n_steps {
        let k1 = f(u);
        let k2 = f(u + 0.5 * h * k1);
        let k3 = f(u + 0.5 * h * k2);
        let k4 = f(u + h * k3);
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    u * u
}

/// Least-squares fit of the time scale kappa in w(kappa t) against observed
/// (t, w) samples, by golden-section search on [0.25, 16].
pub fn calibrate_time_scale(s: f64, xi: f64, alpha: f64, samples: &[(f64, f64)]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::spec("calibration needs at least one sample"));
    }
    let objective = |kappa: f64| -> f64 {
        samples
            .iter()
            .map(|&(t, w)| {
                let c = closed_form_u2(s, xi, alpha, kappa * t).unwrap_or(f64::INFINITY);
                (c - w) * (c - w)
            })
            .sum()
    };
    let (mut lo, mut hi) = (0.25f64, 16.0f64);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    for _ in 0..200 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = objective(x2);
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Excess-risk traces of the three diagonal-recovery branches on a common
/// time grid (raw time; `time_scale` converts to the logistic clock).
#[derive(Debug, Clone)]
pub struct DiagRiskTrace {
    pub t: Vec<f64>,
    pub er: Vec<f64>,
    pub ber: Vec<f64>,
    pub ver: Vec<f64>,
    /// Per-branch squared factors w_j(t), outer index = time.
    pub w_emp: Vec<Vec<f64>>,
    pub w_bias: Vec<Vec<f64>>,
    pub w_var: Vec<Vec<f64>>,
}

/// Evaluates the closed-form flows for every coordinate and branch.
///
/// ER = sum_j (w_emp_j - sigma*_j)^2, BER likewise for the bias branch, and
/// VER = sum_j w_var_j^2 (the variance branch recovers the zero matrix).
pub fn diag_excess_risks(
    m: &DiagonalMeasurements,
    alpha: f64,
    time_scale: f64,
    t_grid: &[f64],
) -> Result<DiagRiskTrace> {
    if time_scale <= 0.0 {
        return Err(Error::spec("time_scale must be positive"));
    }
    let d = m.d();
    let stats: Vec<_> = (0..d)
        .map(|j| coordinate_stats(m, j))
        .collect::<Result<_>>()?;
    let mut out = DiagRiskTrace {
        t: t_grid.to_vec(),
        er: Vec::with_capacity(t_grid.len()),
        ber: Vec::with_capacity(t_grid.len()),
        ver: Vec::with_capacity(t_grid.len()),
        w_emp: Vec::with_capacity(t_grid.len()),
        w_bias: Vec::with_capacity(t_grid.len()),
        w_var: Vec::with_capacity(t_grid.len()),
    };
    for &t in t_grid {
        let tau = time_scale * t;
        let mut we = Vec::with_capacity(d);
        let mut wb = Vec::with_capacity(d);
        let mut wv = Vec::with_capacity(d);
        let (mut er, mut ber, mut ver) = (0.0, 0.0, 0.0);
        for st in &stats {
            let e = closed_form_u2(st.s_emp, st.xi, alpha, tau)?;
            let b = closed_form_u2(st.s_b, st.xi, alpha, tau)?;
            let v = closed_form_u2(st.s_v, st.xi, alpha, tau)?;
            er += (e - st.sigma_true) * (e - st.sigma_true);
            ber += (b - st.sigma_true) * (b - st.sigma_true);
            ver += v * v;
            we.push(e);
            wb.push(b);
            wv.push(v);
        }
        out.er.push(er);
        out.ber.push(ber);
        out.ver.push(ver);
        out.w_emp.push(we);
        out.w_bias.push(wb);
        out.w_var.push(wv);
    }
    Ok(out)
}

/// Full-matrix GD configuration for general recovery.
#[derive(Debug, Clone)]
pub struct MatrixGdConfig {
    /// Shared initialization U0 = alpha * I.
    pub alpha: f64,
    pub stepsize: f64,
    pub steps: usize,
    /// Record X_hat = U U' every this many steps (0 and final always kept).
    pub record_every: usize,
}

/// Recorded products U U' along one GD run.
#[derive(Debug, Clone)]
pub struct MatrixTrace {
    pub steps: Vec<usize>,
    pub x_hats: Vec<DMatrix<f64>>,
}

impl MatrixTrace {
    pub fn last(&self) -> &DMatrix<f64> {
        self.x_hats.last().expect("trace is never empty")
    }
}

/// GD on L(U) = (1/4n) sum_i (y_i - <sym(A_i), U U'>)^2 from U0 = alpha I.
/// This normalization makes the induced flow match the unit-rate coordinate
/// ODE u' = u(s - xi u^2), and keeps stepsize 0.1 inside the stable range
/// for spectra up to ~5. Fails with `Diverged` once the mean squared
/// residual exceeds 1e12.
pub fn general_recovery_gd(
    a_mats: &[DMatrix<f64>],
    y: &[f64],
    cfg: &MatrixGdConfig,
) -> Result<MatrixTrace> {
    if a_mats.is_empty() || a_mats.len() != y.len() {
        return Err(Error::dim(format!(
            "{} measurement matrices vs {} responses",
            a_mats.len(),
            y.len()
        )));
    }
    if cfg.alpha <= 0.0 || cfg.stepsize <= 0.0 {
        return Err(Error::spec("alpha and stepsize must be positive"));
    }
    let d = a_mats[0].nrows();
    if a_mats.iter().any(|a| a.nrows() != d || a.ncols() != d) {
        return Err(Error::dim("measurement matrices must all be d x d"));
    }
    let n = y.len() as f64;
    let sym: Vec<DMatrix<f64>> = a_mats.iter().map(|a| 0.5 * (a + a.transpose())).collect();

    let mut u = DMatrix::identity(d, d) * cfg.alpha;
    let mut steps = Vec::new();
    let mut x_hats = Vec::new();
    let record = |t: usize| t == 0 || t == cfg.steps || (cfg.record_every > 0 && t % cfg.record_every == 0);
    if record(0) {
        steps.push(0);
        x_hats.push(&u * u.transpose());
    }
    for t in 1..=cfg.steps {
        let x_hat = &u * u.transpose();
        let mut grad = DMatrix::zeros(d, d);
        let mut loss = 0.0;
        for (a, &yi) in sym.iter().zip(y) {
            let r = a.dot(&x_hat) - yi;
            loss += r * r;
            grad += (r / n) * (a * &u);
        }
        loss /= n;
        if !loss.is_finite() || loss > 1e12 {
            return Err(Error::Diverged { step: t, loss });
        }
        u -= cfg.stepsize * grad;
        if record(t) {
            steps.push(t);
            x_hats.push(&u * u.transpose());
        }
    }
    Ok(MatrixTrace { steps, x_hats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{gen_general_measurements, GeneralRecoverySpec};
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_starts_at_alpha_squared() {
        for &s in &[3.0, 0.0, -2.0] {
            assert_relative_eq!(
                closed_form_u2(s, 1.0, 0.01, 0.0).unwrap(),
                1e-4,
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn positive_target_converges_to_s_over_xi() {
        let w = closed_form_u2(2.0, 0.8, 0.01, 50.0).unwrap();
        assert_relative_eq!(w, 2.0 / 0.8, max_relative = 1e-12);
        // monotone increase from alpha^2 when alpha^2 < s/xi
        let mut prev = 0.0;
        for k in 0..40 {
            let w = closed_form_u2(2.0, 0.8, 0.01, k as f64 * 0.1).unwrap();
            assert!(w > prev);
            prev = w;
        }
    }

    #[test]
    fn nonpositive_targets_decay_to_zero() {
        assert!(closed_form_u2(-1.5, 1.0, 0.01, 30.0).unwrap() < 1e-20);
        let w0 = closed_form_u2(0.0, 1.0, 0.1, 1000.0).unwrap();
        // 1/t decay: alpha^2 / (1 + 2 xi alpha^2 tau)
        assert_relative_eq!(w0, 0.01 / (1.0 + 2.0 * 0.01 * 1000.0), max_relative = 1e-12);
    }

    #[test]
    fn zero_branch_is_continuous_limit() {
        for &s in &[1e-9, -1e-9] {
            let a = closed_form_u2(s, 1.0, 0.05, 7.0).unwrap();
            let b = closed_form_u2(0.0, 1.0, 0.05, 7.0).unwrap();
            assert!((a - b).abs() < 1e-9, "s = {s}: {a} vs {b}");
        }
    }

    #[test]
    fn no_overflow_at_large_times() {
        for &s in &[5.0, -5.0, 0.0] {
            let w = closed_form_u2(s, 1.0, 0.01, 1e6).unwrap();
            assert!(w.is_finite(), "s = {s} gave {w}");
        }
    }

    #[test]
    fn closed_form_solves_unit_rate_ode() {
        // rate_scale 1 integrates u' = u(s - xi u^2), whose w matches the
        // logistic closed form at kappa = 1
        for &(s, xi, alpha, t) in &[
            (2.0, 1.0, 0.01, 1.5),
            (-1.0, 0.5, 0.1, 2.0),
            (0.0, 1.0, 0.1, 3.0),
            (0.3, 2.0, 0.05, 6.0),
        ] {
            let ode = ode_flow_u2(s, xi, alpha, t, 1.0).unwrap();
            let cf = closed_form_u2(s, xi, alpha, t).unwrap();
            assert!(
                (ode - cf).abs() < 1e-8,
                "(s, xi, alpha, t) = ({s}, {xi}, {alpha}, {t}): ode {ode} vs closed {cf}"
            );
        }
    }

    #[test]
    fn closed_form_matches_gradient_flow_at_rate_four() {
        for &(s, xi, alpha, t) in &[
            (3.0, 1.2, 0.01, 1.0),
            (-0.7, 0.9, 0.02, 2.5),
            (0.0, 1.0, 0.05, 4.0),
        ] {
            let ode = ode_flow_u2(s, xi, alpha, t, 4.0).unwrap();
            let cf = closed_form_u2(s, xi, alpha, 4.0 * t).unwrap();
            assert!((ode - cf).abs() < 1e-8);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        // halving h divides the error by ~16; accept [8, 32]
        let (s, xi, alpha, t) = (1.5, 1.0, 0.05, 2.0);
        let exact = closed_form_u2(s, xi, alpha, t).unwrap();
        let e1 = (rk4_u2(s, xi, alpha, t, 1.0, 20) - exact).abs();
        let e2 = (rk4_u2(s, xi, alpha, t, 1.0, 40) - exact).abs();
        let ratio = e1 / e2;
        assert!((8.0..32.0).contains(&ratio), "order ratio {ratio}");
    }

    #[test]
    fn calibration_recovers_the_flow_rate() {
        let (s, xi, alpha) = (2.0, 1.0, 0.01);
        let samples: Vec<(f64, f64)> = (1..=20)
            .map(|k| {
                let t = k as f64 * 0.1;
                (t, ode_flow_u2(s, xi, alpha, t, 4.0).unwrap())
            })
            .collect();
        let kappa = calibrate_time_scale(s, xi, alpha, &samples).unwrap();
        assert!((kappa - 4.0).abs() < 1e-3, "kappa = {kappa}");
    }

    #[test]
    fn diag_risks_start_and_end_where_expected() {
        use crate::problem::{gen_diagonal_measurements, DiagonalRecoverySpec, MeasurementLaw};
        let spec = DiagonalRecoverySpec {
            d: 20,
            r: 3,
            sigma_star: vec![5.0, 3.0, 1.0],
            n: 600,
            noise_std: 1.0,
            noise_bound: 0.0,
            alpha: 0.01,
            measurement_law: MeasurementLaw::Gaussian,
            seed: 12,
        };
        let m = gen_diagonal_measurements(&spec).unwrap();
        let tr = diag_excess_risks(&m, spec.alpha, 4.0, &[0.0, 30.0]).unwrap();
        // t = 0: everything sits at alpha^2, so ER ~ ||Sigma*||_F^2
        let frob2 = 25.0 + 9.0 + 1.0;
        assert_relative_eq!(
            tr.er[0],
            {
                let a2 = 1e-4_f64;
                (5.0 - a2).powi(2) + (3.0 - a2).powi(2) + (1.0 - a2).powi(2) + 17.0 * a2 * a2
            },
            max_relative = 1e-12
        );
        assert!((tr.er[0] - frob2).abs() < 0.01);
        // bias branch at long horizon: signal coordinates converge, dead
        // coordinates decay like alpha^2 / (2 xi alpha^2 tau)
        assert!(tr.ber[1] < 1e-6, "ber = {}", tr.ber[1]);
        // variance branch stays small: targets are O(1/sqrt(n))
        assert!(tr.ver[1] < 1.0, "ver = {}", tr.ver[1]);
    }

    #[test]
    fn general_gd_drives_risk_down_and_bias_branch_recovers() {
        let spec = GeneralRecoverySpec {
            d: 10,
            r: 2,
            sigma_star: vec![3.0, 1.0],
            n: 400,
            noise_std: 0.0,
            alpha: 0.01,
            stepsize: 0.05,
            seed: 44,
        };
        let m = gen_general_measurements(&spec).unwrap();
        let cfg = MatrixGdConfig {
            alpha: 0.01,
            stepsize: 0.05,
            steps: 400,
            record_every: 100,
        };
        let tr = general_recovery_gd(&m.a_mats, &m.y, &cfg).unwrap();
        let d0 = (&tr.x_hats[0] - &m.x_star).norm();
        let d_end = (tr.last() - &m.x_star).norm();
        assert!(d_end < 0.05 * d0, "start {d0:.3e}, end {d_end:.3e}");
    }

    #[test]
    fn general_gd_divergence_detected() {
        let spec = GeneralRecoverySpec {
            d: 6,
            r: 1,
            sigma_star: vec![2.0],
            n: 50,
            noise_std: 0.5,
            alpha: 0.1,
            stepsize: 5.0,
            seed: 1,
        };
        let m = gen_general_measurements(&spec).unwrap();
        let cfg = MatrixGdConfig {
            alpha: 0.1,
            stepsize: 5.0,
            steps: 200,
            record_every: 0,
        };
        assert!(matches!(
            general_recovery_gd(&m.a_mats, &m.y, &cfg),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(closed_form_u2(1.0, 0.0, 0.1, 1.0).is_err());
        assert!(closed_form_u2(1.0, 1.0, -0.1, 1.0).is_err());
        assert!(closed_form_u2(1.0, 1.0, 0.1, -1.0).is_err());
        assert!(calibrate_time_scale(1.0, 1.0, 0.1, &[]).is_err());
    }
}
