//! The decomposition protocol: train three times (noisy / clean / noise-only)
//! from a shared initialization, and relate the excess risk of the noisy run
//! to the bias and variance runs through the distance-domination condition
//! (DDC) and the composite risk bound it implies.
//!
//! DDC with constants (a, C, C') at horizon T and sample size n:
//!   dist_emp(t) <= a * (dist_var(t) + dist_bias(t)) + C/sqrt(T) + C'/sqrt(n)
//! where dist_* are distances to each run's own ground truth, in parameter,
//! matrix, or function space depending on the family.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linreg::{gd_run, GdConfig, ParamTrace};
use crate::matrec::{diag_excess_risks, general_recovery_gd, MatrixGdConfig};
use crate::nn::{train_triplet, MlpArch, TripletConfig};
use crate::problem::{
    gen_diagonal_measurements, gen_general_measurements, gen_linear_dataset, split_signal_noise,
    DiagonalRecoverySpec, GeneralRecoverySpec, LinearProblemSpec,
};

/// DDC constants.
#[derive(Debug, Clone, Copy)]
pub struct DdcParams {
    pub a: f64,
    /// Optimization-slack constant C (enters as C / sqrt(T)).
    pub c_t: f64,
    /// Statistical-slack constant C' (enters as C' / sqrt(n)).
    pub c_n: f64,
}

impl DdcParams {
    pub fn exact(a: f64) -> Self {
        DdcParams { a, c_t: 0.0, c_n: 0.0 }
    }

    pub fn slack(&self, horizon_t: f64, n: usize) -> f64 {
        self.c_t / horizon_t.max(1.0).sqrt() + self.c_n / (n as f64).sqrt()
    }
}

/// Loss-landscape sharpness: m |d|^s <= excess risk <= M |d|^s near optimum.
#[derive(Debug, Clone, Copy)]
pub struct Sharpness {
    pub s: f64,
    pub m_lower: f64,
    pub m_upper: f64,
}

impl Sharpness {
    pub fn quadratic(m_lower: f64, m_upper: f64) -> Self {
        Sharpness { s: 2.0, m_lower, m_upper }
    }
}

/// Unified decomposition trace, one row per recorded time.
///
/// `dist_*` are distances to each run's own ground truth; `dist_emp_bias`
/// is the coupling distance between the noisy and clean runs (used by the
/// relaxed DDC). `se` holds Monte Carlo standard errors of the *squared*
/// distances when the space is sampled (MLP family), else zeros.
#[derive(Debug, Clone)]
pub struct DecompositionTrace {
    pub times: Vec<f64>,
    pub er: Vec<f64>,
    pub ber: Vec<f64>,
    pub ver: Vec<f64>,
    pub dist_emp: Vec<f64>,
    pub dist_bias: Vec<f64>,
    pub dist_var: Vec<f64>,
    pub dist_emp_bias: Vec<f64>,
    pub se: Vec<f64>,
    /// Horizon entering the C/sqrt(T) slack.
    pub horizon_t: f64,
    /// Sample size entering the C'/sqrt(n) slack.
    pub n: usize,
}

impl DecompositionTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Verdict of a DDC check over a whole trace.
#[derive(Debug, Clone, Copy)]
pub struct DdcReport {
    pub holds_everywhere: bool,
    pub first_violation_time: Option<f64>,
    /// max over t of lhs / rhs (1.0 = tight).
    pub max_ratio: f64,
    /// Smallest `a` making the DDC hold at every non-degenerate time, given
    /// the slack constants.
    pub min_feasible_a: f64,
}

/// Maximum additivity gap max_t || theta(t) - theta_b(t) - theta_v(t) ||
/// over the common recorded steps of three runs.
pub fn check_lemma1_additivity(
    full: &ParamTrace,
    bias: &ParamTrace,
    variance: &ParamTrace,
) -> Result<f64> {
    if full.steps != bias.steps || full.steps != variance.steps {
        return Err(Error::spec("traces must share their recording grid"));
    }
    let mut worst = 0.0f64;
    for i in 0..full.steps.len() {
        let gap = (&full.params[i] - &bias.params[i] - &variance.params[i]).norm();
        worst = worst.max(gap);
    }
    Ok(worst)
}

/// Checks the DDC along a trace. The tolerance is `tol + 3 * se(t)` per
/// point, so Monte Carlo noise in function-space distances does not produce
/// spurious violations.
pub fn check_ddc(trace: &DecompositionTrace, params: &DdcParams, tol: f64) -> Result<DdcReport> {
    if trace.is_empty() {
        return Err(Error::spec("empty trace"));
    }
    let slack = params.slack(trace.horizon_t, trace.n);
    let mut holds = true;
    let mut first_violation = None;
    let mut max_ratio = 0.0f64;
    let mut min_a = 0.0f64;
    let mut any_denominator = false;
    for i in 0..trace.len() {
        let lhs = trace.dist_emp[i];
        let denom = trace.dist_var[i] + trace.dist_bias[i];
        let rhs = params.a * denom + slack;
        let margin = tol + 3.0 * trace.se[i];
        if rhs > 0.0 {
            max_ratio = max_ratio.max(lhs / rhs);
        }
        if lhs > rhs + margin && holds {
            holds = false;
            first_violation = Some(trace.times[i]);
        } else if lhs > rhs + margin {
            holds = false;
        }
        if denom > 1e-12 {
            any_denominator = true;
            let need = (lhs - slack - margin).max(0.0) / denom;
            min_a = min_a.max(need);
        }
    }
    if !any_denominator {
        return Err(Error::Undefined(
            "all DDC denominators are degenerate; min feasible a is undefined".into(),
        ));
    }
    Ok(DdcReport {
        holds_everywhere: holds,
        first_violation_time: first_violation,
        max_ratio,
        min_feasible_a: min_a,
    })
}

/// Smallest `a` for which the DDC holds everywhere, at zero tolerance.
pub fn fit_min_a(trace: &DecompositionTrace, c_t: f64, c_n: f64) -> Result<f64> {
    let params = DdcParams { a: 0.0, c_t, c_n };
    Ok(check_ddc(trace, &params, 0.0)?.min_feasible_a)
}

/// Composite excess-risk bound implied by the DDC and sharpness:
/// (4a)^s (M/m) (VER + BER) + M (4C/sqrt(T))^s + M (4C'/sqrt(n))^s.
pub fn composite_bound(
    ver: f64,
    ber: f64,
    params: &DdcParams,
    sharp: &Sharpness,
    horizon_t: f64,
    n: usize,
) -> f64 {
    let s = sharp.s;
    let ratio = sharp.m_upper / sharp.m_lower;
    (4.0 * params.a).powf(s) * ratio * (ver + ber)
        + sharp.m_upper * (4.0 * params.c_t / horizon_t.max(1.0).sqrt()).powf(s)
        + sharp.m_upper * (4.0 * params.c_n / (n as f64).sqrt()).powf(s)
}

/// Evaluates the composite bound along a trace and reports whether the
/// excess risk is dominated at every point (up to `tol + 3 se`).
pub fn composite_bound_check(
    trace: &DecompositionTrace,
    params: &DdcParams,
    sharp: &Sharpness,
    tol: f64,
) -> (Vec<f64>, bool) {
    let mut rhs = Vec::with_capacity(trace.len());
    let mut all_hold = true;
    for i in 0..trace.len() {
        let b = composite_bound(
            trace.ver[i],
            trace.ber[i],
            params,
            sharp,
            trace.horizon_t,
            trace.n,
        );
        if trace.er[i] > b + tol + 3.0 * trace.se[i] {
            all_hold = false;
        }
        rhs.push(b);
    }
    (rhs, all_hold)
}

/// MLP family settings for [`run_decomposition`].
#[derive(Debug, Clone)]
pub struct MlpFamilyConfig {
    pub arch: MlpArch,
    pub triplet: TripletConfig,
}

/// Estimator family run by the decomposition protocol.
#[derive(Debug, Clone)]
pub enum Family {
    /// GD on overparameterized least squares; parameter-space distances.
    Linreg {
        problem: LinearProblemSpec,
        gd: GdConfig,
    },
    /// Closed-form diagonal matrix recovery; Frobenius distances.
    DiagRecovery {
        spec: DiagonalRecoverySpec,
        t_grid: Vec<f64>,
        time_scale: f64,
    },
    /// Full-matrix GD recovery; Frobenius distances.
    GeneralRecovery {
        spec: GeneralRecoverySpec,
        steps: usize,
        record_every: usize,
    },
    /// ReLU MLP regression; L2(P) function-space distances.
    Mlp {
        problem: LinearProblemSpec,
        config: MlpFamilyConfig,
    },
}

/// Runs the three trainings for one family and assembles the unified trace.
pub fn run_decomposition(family: &Family) -> Result<DecompositionTrace> {
    match family {
        Family::Linreg { problem, gd } => {
            let ds = gen_linear_dataset(problem)?;
            let (bias_ds, var_ds) = split_signal_noise(&ds);
            let full = gd_run(&ds, gd)?;
            let bias = gd_run(&bias_ds, gd)?;
            let var = gd_run(&var_ds, gd)?;
            let cov = &problem.covariance;
            let k = full.steps.len();
            let mut tr = empty_trace(k, gd.steps as f64, problem.n);
            let zero = DVector::zeros(problem.d);
            for i in 0..k {
                let (te, tb, tv) = (&full.params[i], &bias.params[i], &var.params[i]);
                tr.times.push(full.steps[i] as f64);
                tr.er.push(crate::linreg::linreg_excess_risk(te, &ds.theta_star, cov));
                tr.ber.push(crate::linreg::linreg_excess_risk(tb, &ds.theta_star, cov));
                tr.ver.push(crate::linreg::linreg_excess_risk(tv, &zero, cov));
                tr.dist_emp.push((te - &ds.theta_star).norm());
                tr.dist_bias.push((tb - &ds.theta_star).norm());
                tr.dist_var.push(tv.norm());
                tr.dist_emp_bias.push((te - tb).norm());
                tr.se.push(0.0);
            }
            Ok(tr)
        }
        Family::DiagRecovery {
            spec,
            t_grid,
            time_scale,
        } => {
            let m = gen_diagonal_measurements(spec)?;
            let rt = diag_excess_risks(&m, spec.alpha, *time_scale, t_grid)?;
            let horizon = t_grid.iter().cloned().fold(0.0, f64::max);
            let k = t_grid.len();
            let mut tr = empty_trace(k, horizon, spec.n);
            for i in 0..k {
                tr.times.push(rt.t[i]);
                tr.er.push(rt.er[i]);
                tr.ber.push(rt.ber[i]);
                tr.ver.push(rt.ver[i]);
                tr.dist_emp.push(rt.er[i].sqrt());
                tr.dist_bias.push(rt.ber[i].sqrt());
                tr.dist_var.push(rt.ver[i].sqrt());
                let eb: f64 = rt.w_emp[i]
                    .iter()
                    .zip(&rt.w_bias[i])
                    .map(|(e, b)| (e - b) * (e - b))
                    .sum();
                tr.dist_emp_bias.push(eb.sqrt());
                tr.se.push(0.0);
            }
            Ok(tr)
        }
        Family::GeneralRecovery {
            spec,
            steps,
            record_every,
        } => {
            let m = gen_general_measurements(spec)?;
            let cfg = MatrixGdConfig {
                alpha: spec.alpha,
                stepsize: spec.stepsize,
                steps: *steps,
                record_every: *record_every,
            };
            let full = general_recovery_gd(&m.a_mats, &m.y, &cfg)?;
            let bias = general_recovery_gd(&m.a_mats, &m.y_clean, &cfg)?;
            let var = general_recovery_gd(&m.a_mats, &m.eps, &cfg)?;
            let k = full.steps.len();
            let mut tr = empty_trace(k, *steps as f64, spec.n);
            for i in 0..k {
                let (xe, xb, xv) = (&full.x_hats[i], &bias.x_hats[i], &var.x_hats[i]);
                let de = (xe - &m.x_star).norm();
                let db = (xb - &m.x_star).norm();
                let dv = xv.norm();
                tr.times.push(full.steps[i] as f64);
                tr.er.push(de * de);
                tr.ber.push(db * db);
                tr.ver.push(dv * dv);
                tr.dist_emp.push(de);
                tr.dist_bias.push(db);
                tr.dist_var.push(dv);
                tr.dist_emp_bias.push((xe - xb).norm());
                tr.se.push(0.0);
            }
            Ok(tr)
        }
        Family::Mlp { problem, config } => {
            let ds = gen_linear_dataset(problem)?;
            let nt = train_triplet(&ds, &config.arch, &config.triplet)?;
            let k = nt.points.len();
            let mut tr = empty_trace(k, config.triplet.steps as f64, problem.n);
            for p in &nt.points {
                tr.times.push(p.step as f64);
                tr.er.push(p.er);
                tr.ber.push(p.ber);
                tr.ver.push(p.ver);
                tr.dist_emp.push(p.er.sqrt());
                tr.dist_bias.push(p.ber.sqrt());
                tr.dist_var.push(p.ver.sqrt());
                tr.dist_emp_bias.push(p.emp_minus_bias.sqrt());
                // propagate the squared-norm se to the distances conservatively:
                // se(sqrt(x)) ~ se(x) / (2 sqrt(x)); keep the largest branch
                let se = [
                    half_ratio(p.er_se, p.er),
                    half_ratio(p.ber_se, p.ber),
                    half_ratio(p.ver_se, p.ver),
                    half_ratio(p.emp_minus_bias_se, p.emp_minus_bias),
                ]
                .into_iter()
                .fold(0.0, f64::max);
                tr.se.push(se);
            }
            Ok(tr)
        }
    }
}

fn half_ratio(se: f64, val: f64) -> f64 {
    if val > 1e-12 {
        se / (2.0 * val.sqrt())
    } else {
        se.sqrt()
    }
}

fn empty_trace(capacity: usize, horizon_t: f64, n: usize) -> DecompositionTrace {
    DecompositionTrace {
        times: Vec::with_capacity(capacity),
        er: Vec::with_capacity(capacity),
        ber: Vec::with_capacity(capacity),
        ver: Vec::with_capacity(capacity),
        dist_emp: Vec::with_capacity(capacity),
        dist_bias: Vec::with_capacity(capacity),
        dist_var: Vec::with_capacity(capacity),
        dist_emp_bias: Vec::with_capacity(capacity),
        se: Vec::with_capacity(capacity),
        horizon_t,
        n,
    }
}
