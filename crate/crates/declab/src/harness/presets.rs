//! Registered experiment presets: the figure-style decomposition
//! experiments at desk scale plus the rate probes and the bound comparison.

use crate::bounds::{stability_baseline_bound, thm1_bound, BoundInputs};
use crate::decomp::{
    composite_bound, run_decomposition, DdcParams, Family, MlpFamilyConfig, Sharpness,
};
use crate::error::{Error, Result};
use crate::harness::table::Row;
use crate::linreg::{gd_run, sup_param_norms, GdConfig};
use crate::matrec::diag_excess_risks;
use crate::nn::{MlpArch, Optimizer, TripletConfig};
use crate::problem::{
    gen_diagonal_measurements, gen_linear_dataset, split_signal_noise, Covariance,
    DiagonalRecoverySpec, GeneralRecoverySpec, LinearProblemSpec, MeasurementLaw, NoiseLaw,
    ThetaStar,
};
use crate::seed::child_seed;

/// What one preset runs per trial.
#[derive(Debug, Clone)]
pub enum PresetKind {
    /// Three-way GD linreg decomposition with exact quadratic sharpness.
    LinregDecomp {
        n: usize,
        d: usize,
        lambda: f64,
        sigma: f64,
        theta_norm: f64,
        steps: usize,
        stride: usize,
    },
    /// General matrix-recovery decomposition (GD on U U').
    MatrecDecomp { n: usize, steps: usize, stride: usize },
    /// MLP function-space decomposition on the sparse-linear target.
    NnDecomp {
        n: usize,
        hidden: Vec<usize>,
        opt: Optimizer,
        steps: usize,
        stride: usize,
        a: f64,
    },
    /// Initial gradient-norm gap between standard and variance training.
    GradNorm,
    /// Linreg ER at T = ceil(sqrt(n)) across sample sizes.
    RateProbeLinreg,
    /// Diagonal-recovery minimal ER over the time grid, across sample sizes.
    RateProbeDiag,
    /// High-SNR B vs B' measurement and bound values.
    BoundCompare,
}

/// A registered experiment.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub default_trials: usize,
    pub kind: PresetKind,
}

fn nn_problem(n: usize, seed: u64) -> LinearProblemSpec {
    LinearProblemSpec {
        d: 30,
        n,
        covariance: Covariance::Identity,
        theta_star: ThetaStar::Sparse { support: 5, norm: 2.0 },
        noise: NoiseLaw::Gaussian { std: 1.5 },
        seed,
    }
}

fn matrec_spec(n: usize, seed: u64) -> GeneralRecoverySpec {
    GeneralRecoverySpec {
        d: 20,
        r: 3,
        sigma_star: vec![5.0, 3.0, 1.0],
        n,
        noise_std: 1.0,
        alpha: 0.01,
        stepsize: 0.1,
        seed,
    }
}

/// Decaying spectrum used by the rate probe and the bound comparison:
/// variances proportional to j^-2, normalized to unit trace.
fn decaying_covariance(d: usize) -> Covariance {
    let raw: Vec<f64> = (1..=d).map(|j| (j as f64).powi(-2)).collect();
    let trace: f64 = raw.iter().sum();
    Covariance::Diagonal(raw.into_iter().map(|v| v / trace).collect())
}

/// All registered presets, in reporting order.
pub fn registry() -> Vec<Preset> {
    let nn = |n, hidden: &[usize], opt, steps, stride, a| PresetKind::NnDecomp {
        n,
        hidden: hidden.to_vec(),
        opt,
        steps,
        stride,
        a,
    };
    let sgd = Optimizer::sgd(1e-2);
    vec![
        Preset {
            name: "fig1-landscape",
            description: "initial gradient norms: standard vs variance training",
            default_trials: 5,
            kind: PresetKind::GradNorm,
        },
        Preset {
            name: "fig2a-nn",
            description: "NN excess-risk decomposition curves, depth 2 width 64",
            default_trials: 5,
            kind: nn(500, &[64], sgd, 800, 50, 2.5),
        },
        Preset {
            name: "fig3-linreg-n300",
            description: "linreg DDC verification, d=500 n=300",
            default_trials: 5,
            kind: PresetKind::LinregDecomp {
                n: 300,
                d: 500,
                lambda: 0.01,
                sigma: 2.0,
                theta_norm: 5.0,
                steps: 500,
                stride: 25,
            },
        },
        Preset {
            name: "fig3-linreg-n800",
            description: "linreg DDC verification, d=500 n=800",
            default_trials: 5,
            kind: PresetKind::LinregDecomp {
                n: 800,
                d: 500,
                lambda: 0.01,
                sigma: 2.0,
                theta_norm: 5.0,
                steps: 500,
                stride: 25,
            },
        },
        Preset {
            name: "fig3-matrec-n200",
            description: "matrix-recovery DDC verification, n=200",
            default_trials: 5,
            kind: PresetKind::MatrecDecomp { n: 200, steps: 300, stride: 15 },
        },
        Preset {
            name: "fig3-matrec-n600",
            description: "matrix-recovery DDC verification, n=600",
            default_trials: 5,
            kind: PresetKind::MatrecDecomp { n: 600, steps: 300, stride: 15 },
        },
        Preset {
            name: "fig4-nn-n500",
            description: "NN decomposition curves at n=500",
            default_trials: 5,
            kind: nn(500, &[64], sgd, 800, 50, 2.5),
        },
        Preset {
            name: "fig4-nn-n1500",
            description: "NN decomposition curves at n=1500",
            default_trials: 5,
            kind: nn(1500, &[64], sgd, 800, 50, 2.0),
        },
        Preset {
            name: "appA-depth-2",
            description: "depth sweep: 2 layers, width 64, SGD",
            default_trials: 5,
            kind: nn(2000, &[64], sgd, 2000, 100, 1.3),
        },
        Preset {
            name: "appA-depth-3",
            description: "depth sweep: 3 layers, width 64, SGD",
            default_trials: 5,
            kind: nn(100, &[64, 64], sgd, 2000, 100, 2.0),
        },
        Preset {
            name: "appA-depth-4",
            description: "depth sweep: 4 layers, width 64, SGD",
            default_trials: 5,
            kind: nn(100, &[64, 64, 64], sgd, 2000, 100, 2.3),
        },
        Preset {
            name: "appA-width-64",
            description: "width sweep: one hidden layer of 64",
            default_trials: 5,
            kind: nn(2000, &[64], sgd, 1500, 100, 1.3),
        },
        Preset {
            name: "appA-width-256",
            description: "width sweep: one hidden layer of 256",
            default_trials: 5,
            kind: nn(1000, &[256], sgd, 600, 50, 1.8),
        },
        Preset {
            name: "appA-width-512",
            description: "width sweep: one hidden layer of 512",
            default_trials: 5,
            kind: nn(1000, &[512], sgd, 600, 50, 1.8),
        },
        Preset {
            name: "appA-opt-sgd",
            description: "optimizer sweep: SGD",
            default_trials: 5,
            kind: nn(2000, &[64], sgd, 1500, 100, 1.3),
        },
        Preset {
            name: "appA-opt-adam",
            description: "optimizer sweep: Adam",
            default_trials: 5,
            kind: nn(100, &[64], Optimizer::adam(0.002), 1500, 100, 1.2),
        },
        Preset {
            name: "appA-opt-rprop",
            description: "optimizer sweep: Rprop",
            default_trials: 5,
            kind: nn(100, &[64], Optimizer::rprop(5e-4), 1500, 100, 1.1),
        },
        Preset {
            name: "rate-probe-linreg",
            description: "linreg ER at T=ceil(sqrt(n)) across n; log-log slope",
            default_trials: 10,
            kind: PresetKind::RateProbeLinreg,
        },
        Preset {
            name: "rate-probe-diag",
            description: "diagonal-recovery best ER across n; log-log slope",
            default_trials: 10,
            kind: PresetKind::RateProbeDiag,
        },
        Preset {
            name: "bound-compare-highsnr",
            description: "high-SNR B vs B' and decomposition vs baseline bound",
            default_trials: 10,
            kind: PresetKind::BoundCompare,
        },
    ]
}

/// Looks a preset up by name.
pub fn find(name: &str) -> Result<Preset> {
    registry()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))
}

impl Preset {
    /// DDC constants this preset is checked against, when it has a
    /// decomposition trace.
    pub fn ddc_params(&self) -> Option<DdcParams> {
        match &self.kind {
            PresetKind::LinregDecomp { .. } => Some(DdcParams::exact(1.0)),
            PresetKind::MatrecDecomp { .. } => Some(DdcParams { a: 1.0, c_t: 0.0, c_n: 8.5 }),
            PresetKind::NnDecomp { a, .. } => Some(DdcParams::exact(*a)),
            _ => None,
        }
    }

    /// Exact sharpness of the family's risk-vs-distance relation, if any.
    pub fn sharpness(&self) -> Option<Sharpness> {
        match &self.kind {
            // identity covariance: ER = ||theta - theta*||^2 exactly
            PresetKind::LinregDecomp { .. } => Some(Sharpness::quadratic(1.0, 1.0)),
            // ER = ||X - X*||_F^2 by definition
            PresetKind::MatrecDecomp { .. } => Some(Sharpness::quadratic(1.0, 1.0)),
            _ => None,
        }
    }

    /// Runs one trial; rows are in metric order per recorded time.
    pub fn run_trial(&self, master_seed: u64, trial: u64) -> Result<Vec<Row>> {
        let seed = child_seed(master_seed, self.name, trial);
        match &self.kind {
            PresetKind::LinregDecomp {
                n,
                d,
                lambda,
                sigma,
                theta_norm,
                steps,
                stride,
            } => {
                let family = Family::Linreg {
                    problem: LinearProblemSpec {
                        d: *d,
                        n: *n,
                        covariance: Covariance::Identity,
                        theta_star: ThetaStar::DenseRandom { norm: *theta_norm },
                        noise: NoiseLaw::Gaussian { std: *sigma },
                        seed,
                    },
                    gd: GdConfig {
                        stepsize: *lambda,
                        steps: *steps,
                        init: None,
                        record_every: *stride,
                    },
                };
                self.decomposition_rows(trial, &family)
            }
            PresetKind::MatrecDecomp { n, steps, stride } => {
                let family = Family::GeneralRecovery {
                    spec: matrec_spec(*n, seed),
                    steps: *steps,
                    record_every: *stride,
                };
                self.decomposition_rows(trial, &family)
            }
            PresetKind::NnDecomp {
                n,
                hidden,
                opt,
                steps,
                stride,
                ..
            } => {
                let family = Family::Mlp {
                    problem: nn_problem(*n, seed),
                    config: MlpFamilyConfig {
                        arch: MlpArch::new(30, hidden),
                        triplet: TripletConfig {
                            optimizer: *opt,
                            steps: *steps,
                            record_every: *stride,
                            mc_points: 2000,
                            init_std: 1e-3,
                            seed,
                            covariance: Covariance::Identity,
                        },
                    },
                };
                self.decomposition_rows(trial, &family)
            }
            PresetKind::GradNorm => grad_norm_rows(trial, seed),
            PresetKind::RateProbeLinreg => rate_probe_linreg_rows(trial, seed),
            PresetKind::RateProbeDiag => rate_probe_diag_rows(trial, seed),
            PresetKind::BoundCompare => bound_compare_rows(trial, seed),
        }
    }

    fn decomposition_rows(&self, trial: u64, family: &Family) -> Result<Vec<Row>> {
        let tr = run_decomposition(family)?;
        let ddc = self.ddc_params().expect("decomposition presets have DDC constants");
        let slack = ddc.slack(tr.horizon_t, tr.n);
        let sharp = self.sharpness();
        let mut rows = Vec::with_capacity(tr.len() * 8);
        let mut push = |t: f64, metric: &str, value: f64| {
            rows.push(Row {
                trial,
                t,
                metric: metric.to_string(),
                value,
            })
        };
        for i in 0..tr.len() {
            let t = tr.times[i];
            push(t, "er", tr.er[i]);
            push(t, "ber", tr.ber[i]);
            push(t, "ver", tr.ver[i]);
            push(t, "dist_emp", tr.dist_emp[i]);
            push(t, "dist_bias", tr.dist_bias[i]);
            push(t, "dist_var", tr.dist_var[i]);
            push(t, "ddc_rhs", ddc.a * (tr.dist_var[i] + tr.dist_bias[i]) + slack);
            push(t, "mc_se", tr.se[i]);
            if let Some(sh) = &sharp {
                push(
                    t,
                    "bound_rhs",
                    composite_bound(tr.ver[i], tr.ber[i], &ddc, sh, tr.horizon_t, tr.n),
                );
            }
        }
        Ok(rows)
    }
}

/// Gradient norms at the shared zero initialization, for the squared loss
/// (1/n)||Y - X theta||^2: standard training starts with norm near
/// 2||theta*||, variance training starts near zero.
fn grad_norm_rows(trial: u64, seed: u64) -> Result<Vec<Row>> {
    let ds = gen_linear_dataset(&LinearProblemSpec {
        d: 100,
        n: 400,
        covariance: Covariance::Identity,
        theta_star: ThetaStar::DenseRandom { norm: 3.0 },
        noise: NoiseLaw::Gaussian { std: 0.5 },
        seed,
    })?;
    let n = ds.n() as f64;
    let g_std = (2.0 / n) * (ds.x.transpose() * &ds.y_noisy);
    let g_var = (2.0 / n) * (ds.x.transpose() * &ds.eps);
    let mk = |metric: &str, value: f64| Row {
        trial,
        t: 0.0,
        metric: metric.to_string(),
        value,
    };
    Ok(vec![
        mk("grad_norm_standard", g_std.norm()),
        mk("grad_norm_variance", g_var.norm()),
        mk("two_theta_star_norm", 2.0 * ds.theta_star.norm()),
    ])
}

const RATE_PROBE_NS: [usize; 6] = [100, 200, 400, 800, 1600, 3200];

/// Linreg excess risk at horizon T = ceil(sqrt(n)) for each sample size.
fn rate_probe_linreg_rows(trial: u64, seed: u64) -> Result<Vec<Row>> {
    let d = 100;
    let cov = decaying_covariance(d);
    let mut rows = Vec::new();
    for (i, &n) in RATE_PROBE_NS.iter().enumerate() {
        let problem = LinearProblemSpec {
            d,
            n,
            covariance: cov.clone(),
            theta_star: ThetaStar::DenseRandom { norm: 1.0 },
            noise: NoiseLaw::Gaussian { std: 0.5 },
            seed: child_seed(seed, "rate-n", i as u64),
        };
        let ds = gen_linear_dataset(&problem)?;
        let t_horizon = (n as f64).sqrt().ceil() as usize;
        let cfg = GdConfig {
            stepsize: 1.2,
            steps: t_horizon,
            init: None,
            record_every: 0,
        };
        let trace = gd_run(&ds, &cfg)?;
        let er = crate::linreg::linreg_excess_risk(trace.last(), &ds.theta_star, &cov);
        rows.push(Row {
            trial,
            t: n as f64,
            metric: "er".to_string(),
            value: er,
        });
    }
    Ok(rows)
}

/// Best diagonal-recovery ER over a geometric time grid, per sample size.
fn rate_probe_diag_rows(trial: u64, seed: u64) -> Result<Vec<Row>> {
    let t_grid: Vec<f64> = (0..=60).map(|k| 0.02 * 1.15f64.powi(k)).collect();
    let mut rows = Vec::new();
    for (i, &n) in RATE_PROBE_NS.iter().enumerate() {
        let spec = DiagonalRecoverySpec {
            d: 20,
            r: 3,
            sigma_star: vec![5.0, 3.0, 1.0],
            n,
            noise_std: 1.0,
            noise_bound: 0.0,
            alpha: 0.01,
            measurement_law: MeasurementLaw::Gaussian,
            seed: child_seed(seed, "rate-n", i as u64),
        };
        let m = gen_diagonal_measurements(&spec)?;
        let tr = diag_excess_risks(&m, spec.alpha, 4.0, &t_grid)?;
        let best = tr.er.iter().cloned().fold(f64::INFINITY, f64::min);
        rows.push(Row {
            trial,
            t: n as f64,
            metric: "er".to_string(),
            value: best,
        });
    }
    Ok(rows)
}

/// High-SNR comparison: measure B and B', then evaluate the decomposition
/// bound against the plain stability baseline at T = n^(3/4).
fn bound_compare_rows(trial: u64, seed: u64) -> Result<Vec<Row>> {
    let (n, d) = (256usize, 400usize);
    let cov = decaying_covariance(d);
    let problem = LinearProblemSpec {
        d,
        n,
        covariance: cov.clone(),
        theta_star: ThetaStar::Sparse { support: 5, norm: 10.0 },
        noise: NoiseLaw::ClippedGaussian { std: 0.25, bound: 1.0 },
        seed,
    };
    let ds = gen_linear_dataset(&problem)?;
    let (bias_ds, var_ds) = split_signal_noise(&ds);
    let t_horizon = (n as f64).powf(0.75).round() as usize;
    let cfg = GdConfig {
        stepsize: 1.0,
        steps: t_horizon,
        init: None,
        record_every: 1,
    };
    let full = gd_run(&ds, &cfg)?;
    let bias = gd_run(&bias_ds, &cfg)?;
    let var = gd_run(&var_ds, &cfg)?;
    let (_, b) = sup_param_norms(&bias, &var);
    let b_prime = full.sup_norm();
    let theta_star_energy = cov.quad_form(&ds.theta_star);
    let inputs = BoundInputs {
        n,
        t_horizon,
        lambda: 1.0,
        delta: 0.05,
        v: 1.0,
        b,
        b_prime,
        sigma_w: 1.0,
        theta_star_energy,
        theta_star_norm_sq: ds.theta_star.norm_squared(),
        ..BoundInputs::default()
    };
    let er = crate::linreg::linreg_excess_risk(full.last(), &ds.theta_star, &cov);
    let t = t_horizon as f64;
    let mk = |metric: &str, value: f64| Row {
        trial,
        t,
        metric: metric.to_string(),
        value,
    };
    Ok(vec![
        mk("b", b),
        mk("b_prime", b_prime),
        mk("thm1_bound", thm1_bound(&inputs)?),
        mk("baseline_bound", stability_baseline_bound(&inputs)?),
        mk("er", er),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_are_unique_and_findable() {
        let all = registry();
        assert_eq!(all.len(), 20);
        let mut names: Vec<_> = all.iter().map(|p| p.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), all.len());
        assert!(find("fig3-linreg-n300").is_ok());
        assert!(matches!(find("nope"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn grad_norm_gap_is_large() {
        let rows = grad_norm_rows(0, 42).unwrap();
        let std = rows.iter().find(|r| r.metric == "grad_norm_standard").unwrap().value;
        let var = rows.iter().find(|r| r.metric == "grad_norm_variance").unwrap().value;
        let two_norm = rows.iter().find(|r| r.metric == "two_theta_star_norm").unwrap().value;
        assert!(std > 5.0 * var, "standard {std} vs variance {var}");
        assert!((std - two_norm).abs() / two_norm < 0.5, "{std} vs {two_norm}");
    }

    #[test]
    fn linreg_preset_trial_rows_are_complete() {
        let p = find("fig3-linreg-n300").unwrap();
        let rows = p.run_trial(7, 0).unwrap();
        let metrics: Vec<&str> = rows.iter().map(|r| r.metric.as_str()).collect();
        // golden metric order per recorded time; downstream CSV consumers
        // rely on it
        let schema = [
            "er", "ber", "ver", "dist_emp", "dist_bias", "dist_var", "ddc_rhs", "mc_se",
            "bound_rhs",
        ];
        assert_eq!(&metrics[..9], &schema);
        assert_eq!(metrics.len() % 9, 0);
        for chunk in metrics.chunks(9) {
            assert_eq!(chunk, &schema);
        }
        // exact DDC at a = 1 by additivity
        for i in (0..rows.len()).step_by(9) {
            let chunk = &rows[i..i + 9];
            let lhs = chunk.iter().find(|r| r.metric == "dist_emp").unwrap().value;
            let rhs = chunk.iter().find(|r| r.metric == "ddc_rhs").unwrap().value;
            assert!(lhs <= rhs + 1e-9, "t = {}: {lhs} > {rhs}", chunk[0].t);
        }
    }

    #[test]
    fn trials_are_deterministic_and_distinct() {
        let p = find("fig1-landscape").unwrap();
        let a = p.run_trial(1, 0).unwrap();
        let b = p.run_trial(1, 0).unwrap();
        let c = p.run_trial(1, 1).unwrap();
        assert_eq!(a.len(), b.len());
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.value.to_bits(), rb.value.to_bits());
        }
        assert!(a.iter().zip(&c).any(|(ra, rc)| ra.value != rc.value));
    }
}
