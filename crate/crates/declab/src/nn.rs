//! Fully connected ReLU network lab.
//!
//! Forward/backward are hand-rolled so the optimizer sees plain dense
//! gradients. The triplet trainer runs the noisy / clean / pure-noise
//! regressions from one shared initialization and measures all risks in
//! function space: squared L2(P) norms estimated on one Monte Carlo sample
//! shared by all three runs (so ratios between branches are stable).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::problem::{Covariance, RegressionDataset};
use crate::seed::stream_rng;

/// Architecture: `hidden` ReLU layers, one linear scalar output.
#[derive(Debug, Clone)]
pub struct MlpArch {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
}

impl MlpArch {
    pub fn new(input_dim: usize, hidden: &[usize]) -> Self {
        MlpArch {
            input_dim,
            hidden: hidden.to_vec(),
        }
    }

    /// Layer shapes as (out, in) pairs including the output layer.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            dims.push((h, prev));
            prev = h;
        }
        dims.push((1, prev));
        dims
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::spec("input_dim must be >= 1"));
        }
        if self.hidden.is_empty() {
            return Err(Error::spec("need at least one hidden layer"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::spec("hidden widths must be >= 1"));
        }
        Ok(())
    }
}

/// Dense parameters; weights are (out x in).
#[derive(Debug, Clone)]
pub struct MlpParams {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

/// Gradients with the same layout as the parameters.
pub type MlpGrads = MlpParams;

impl MlpParams {
    fn zeros_like(&self) -> MlpParams {
        MlpParams {
            weights: self
                .weights
                .iter()
                .map(|w| DMatrix::zeros(w.nrows(), w.ncols()))
                .collect(),
            biases: self.biases.iter().map(|b| DVector::zeros(b.len())).collect(),
        }
    }
}

/// Gaussian init with standard deviation `std` on weights and biases.
pub fn init_params(arch: &MlpArch, std: f64, seed: u64) -> Result<MlpParams> {
    arch.validate()?;
    let mut rng = stream_rng(seed, "mlp-init", 0);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (out, inp) in arch.layer_dims() {
        weights.push(DMatrix::from_fn(out, inp, |_, _| {
            std * rng.sample::<f64, _>(StandardNormal)
        }));
        biases.push(DVector::from_fn(out, |_, _| {
            std * rng.sample::<f64, _>(StandardNormal)
        }));
    }
    Ok(MlpParams { weights, biases })
}

/// Batch forward pass; `xs` is n x d, returns the n predictions.
pub fn mlp_forward(params: &MlpParams, xs: &DMatrix<f64>) -> DVector<f64> {
    let mut a = xs.transpose();
    let last = params.weights.len() - 1;
    for (l, (w, b)) in params.weights.iter().zip(&params.biases).enumerate() {
        let mut z = w * a;
        for mut col in z.column_iter_mut() {
            col += b;
        }
        if l < last {
            z.apply(|v| *v = v.max(0.0));
        }
        a = z;
    }
    a.row(0).transpose()
}

/// Loss (1/2m) sum (f(x_i) - y_i)^2 and its gradient.
pub fn batch_loss_and_grad(
    params: &MlpParams,
    xs: &DMatrix<f64>,
    ys: &DVector<f64>,
) -> Result<(f64, MlpGrads)> {
    let m = xs.nrows();
    if ys.len() != m {
        return Err(Error::dim(format!("{} rows vs {} targets", m, ys.len())));
    }
    let last = params.weights.len() - 1;

    // forward, keeping post-activation values per layer
    let mut acts: Vec<DMatrix<f64>> = vec![xs.transpose()];
    for (l, (w, b)) in params.weights.iter().zip(&params.biases).enumerate() {
        let mut z = w * acts.last().unwrap();
        for mut col in z.column_iter_mut() {
            col += b;
        }
        if l < last {
            z.apply(|v| *v = v.max(0.0));
        }
        acts.push(z);
    }
    let pred = acts.last().unwrap().row(0).transpose();
    let resid = &pred - ys;
    let loss = resid.norm_squared() / (2.0 * m as f64);

    // backward
    let mut grads = params.zeros_like();
    let mut delta = DMatrix::from_rows(&[(resid.transpose() / m as f64)]);
    for l in (0..params.weights.len()).rev() {
        grads.weights[l] = &delta * acts[l].transpose();
        grads.biases[l] = delta.column_sum();
        if l > 0 {
            let mut up = params.weights[l].transpose() * delta;
            // ReLU mask from the recorded post-activations (zero where inactive)
            up.zip_apply(&acts[l], |g, a| {
                if a <= 0.0 {
                    *g = 0.0;
                }
            });
            delta = up;
        }
    }
    Ok((loss, grads))
}

/// Full-batch optimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
    /// Resilient propagation with sign-change gradient zeroing.
    Rprop {
        lr0: f64,
        eta_minus: f64,
        eta_plus: f64,
        step_min: f64,
        step_max: f64,
    },
}

impl Optimizer {
    pub fn sgd(lr: f64) -> Self {
        Optimizer::Sgd { lr }
    }

    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn rprop(lr0: f64) -> Self {
        Optimizer::Rprop {
            lr0,
            eta_minus: 0.5,
            eta_plus: 1.2,
            step_min: 1e-6,
            step_max: 50.0,
        }
    }
}

/// Per-parameter optimizer buffers.
#[derive(Debug, Clone)]
pub struct OptState {
    m1: MlpParams,
    m2: MlpParams,
    step_sizes: MlpParams,
    prev_grad: MlpParams,
    t: usize,
}

impl OptState {
    pub fn new(params: &MlpParams, opt: &Optimizer) -> OptState {
        let zeros = params.zeros_like();
        let mut step_sizes = params.zeros_like();
        if let Optimizer::Rprop { lr0, .. } = opt {
            for w in &mut step_sizes.weights {
                w.fill(*lr0);
            }
            for b in &mut step_sizes.biases {
                b.fill(*lr0);
            }
        }
        OptState {
            m1: zeros.clone(),
            m2: zeros.clone(),
            step_sizes,
            prev_grad: zeros,
            t: 0,
        }
    }
}

fn for_each_tensor(
    params: &mut MlpParams,
    grads: &MlpGrads,
    state: &mut OptState,
    mut f: impl FnMut(&mut [f64], &[f64], &mut [f64], &mut [f64], &mut [f64], &mut [f64]),
) {
    let layers = params.weights.len();
    for l in 0..layers {
        f(
            params.weights[l].as_mut_slice(),
            grads.weights[l].as_slice(),
            state.m1.weights[l].as_mut_slice(),
            state.m2.weights[l].as_mut_slice(),
            state.step_sizes.weights[l].as_mut_slice(),
            state.prev_grad.weights[l].as_mut_slice(),
        );
        f(
            params.biases[l].as_mut_slice(),
            grads.biases[l].as_slice(),
            state.m1.biases[l].as_mut_slice(),
            state.m2.biases[l].as_mut_slice(),
            state.step_sizes.biases[l].as_mut_slice(),
            state.prev_grad.biases[l].as_mut_slice(),
        );
    }
}

/// Applies one optimizer update in place.
pub fn optimizer_step(
    params: &mut MlpParams,
    grads: &MlpGrads,
    opt: &Optimizer,
    state: &mut OptState,
) {
    state.t += 1;
    match *opt {
        Optimizer::Sgd { lr } => {
            for_each_tensor(params, grads, state, |p, g, _, _, _, _| {
                for (pi, gi) in p.iter_mut().zip(g) {
                    *pi -= lr * gi;
                }
            });
        }
        Optimizer::Adam {
            lr,
            beta1,
            beta2,
            eps,
        } => {
            let t = state.t as i32;
            let bc1 = 1.0 - beta1.powi(t);
            let bc2 = 1.0 - beta2.powi(t);
            for_each_tensor(params, grads, state, |p, g, m1, m2, _, _| {
                for i in 0..p.len() {
                    m1[i] = beta1 * m1[i] + (1.0 - beta1) * g[i];
                    m2[i] = beta2 * m2[i] + (1.0 - beta2) * g[i] * g[i];
                    let mhat = m1[i] / bc1;
                    let vhat = m2[i] / bc2;
                    p[i] -= lr * mhat / (vhat.sqrt() + eps);
                }
            });
        }
        Optimizer::Rprop {
            eta_minus,
            eta_plus,
            step_min,
            step_max,
            ..
        } => {
            for_each_tensor(params, grads, state, |p, g, _, _, step, prev| {
                for i in 0..p.len() {
                    let mut gi = g[i];
                    let sign_change = prev[i] * gi;
                    if sign_change > 0.0 {
                        step[i] = (step[i] * eta_plus).min(step_max);
                    } else if sign_change < 0.0 {
                        step[i] = (step[i] * eta_minus).max(step_min);
                        gi = 0.0;
                    }
                    if gi != 0.0 {
                        // f64::signum treats 0.0 as positive, hence the guard
                        p[i] -= gi.signum() * step[i];
                    }
                    prev[i] = gi;
                }
            });
        }
    }
}

/// Triplet-training configuration.
#[derive(Debug, Clone)]
pub struct TripletConfig {
    pub optimizer: Optimizer,
    /// Full-batch steps.
    pub steps: usize,
    /// Record function-space risks every this many steps (0 and final kept).
    pub record_every: usize,
    /// Monte Carlo points for the L2(P) estimates.
    pub mc_points: usize,
    /// Initialization scale and seed (shared by the three runs).
    pub init_std: f64,
    pub seed: u64,
    /// Input covariance for the Monte Carlo sample.
    pub covariance: Covariance,
}

/// One recorded checkpoint of the triplet run. All norms are squared L2(P)
/// Monte Carlo estimates with standard errors.
#[derive(Debug, Clone, Copy)]
pub struct TripletPoint {
    pub step: usize,
    /// ||f - f*||^2: excess risk of the noisy run.
    pub er: f64,
    pub er_se: f64,
    /// ||f_b - f*||^2.
    pub ber: f64,
    pub ber_se: f64,
    /// ||f_v||^2.
    pub ver: f64,
    pub ver_se: f64,
    /// ||f - f_b||^2: the relaxed-coupling distance.
    pub emp_minus_bias: f64,
    pub emp_minus_bias_se: f64,
    pub train_loss: f64,
}

/// Full triplet trace.
#[derive(Debug, Clone)]
pub struct NnTripletTrace {
    pub points: Vec<TripletPoint>,
}

/// Sample mean of squares and its standard error.
pub fn l2p_norm_sq(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().map(|v| v * v).sum::<f64>() / m;
    let var = values
        .iter()
        .map(|v| {
            let d = v * v - mean;
            d * d
        })
        .sum::<f64>()
        / (m - 1.0).max(1.0);
    (mean, (var / m).sqrt())
}

/// Trains the noisy / clean / pure-noise regressions from one shared init
/// and records function-space risks on a shared Monte Carlo sample.
pub fn train_triplet(
    ds: &RegressionDataset,
    arch: &MlpArch,
    cfg: &TripletConfig,
) -> Result<NnTripletTrace> {
    arch.validate()?;
    if arch.input_dim != ds.d() {
        return Err(Error::dim(format!(
            "arch input_dim {} vs dataset d {}",
            arch.input_dim,
            ds.d()
        )));
    }
    if cfg.mc_points < 2 {
        return Err(Error::spec("mc_points must be >= 2"));
    }
    cfg.covariance.validate(ds.d())?;

    // shared MC sample and true-function values on it
    let mut mc_rng = stream_rng(cfg.seed, "mc", 0);
    let stds: Vec<f64> = (0..ds.d()).map(|j| cfg.covariance.variance(j).sqrt()).collect();
    let xs_mc = DMatrix::from_fn(cfg.mc_points, ds.d(), |_, j| {
        stds[j] * mc_rng.sample::<f64, _>(StandardNormal)
    });
    let f_star = &xs_mc * &ds.theta_star;

    let init = init_params(arch, cfg.init_std, cfg.seed)?;
    let mut runs = [init.clone(), init.clone(), init];
    let targets = [&ds.y_noisy, &ds.y_clean, &ds.eps];
    let mut states: Vec<OptState> = runs
        .iter()
        .map(|p| OptState::new(p, &cfg.optimizer))
        .collect();

    let record = |t: usize| {
        t == 0 || t == cfg.steps || (cfg.record_every > 0 && t % cfg.record_every == 0)
    };
    let mut points = Vec::new();
    let mut last_train_loss = 0.0;
    for t in 0..=cfg.steps {
        if t > 0 {
            for r in 0..3 {
                let (loss, grads) = batch_loss_and_grad(&runs[r], &ds.x, targets[r])?;
                if !loss.is_finite() || loss > 1e12 {
                    return Err(Error::Diverged { step: t, loss });
                }
                if r == 0 {
                    last_train_loss = loss;
                }
                optimizer_step(&mut runs[r], &grads, &cfg.optimizer, &mut states[r]);
            }
        }
        if record(t) {
            let f_emp = mlp_forward(&runs[0], &xs_mc);
            let f_bias = mlp_forward(&runs[1], &xs_mc);
            let f_var = mlp_forward(&runs[2], &xs_mc);
            let d_er: Vec<f64> = (0..cfg.mc_points).map(|i| f_emp[i] - f_star[i]).collect();
            let d_ber: Vec<f64> = (0..cfg.mc_points).map(|i| f_bias[i] - f_star[i]).collect();
            let d_ver: Vec<f64> = f_var.iter().cloned().collect();
            let d_eb: Vec<f64> = (0..cfg.mc_points).map(|i| f_emp[i] - f_bias[i]).collect();
            let (er, er_se) = l2p_norm_sq(&d_er);
            let (ber, ber_se) = l2p_norm_sq(&d_ber);
            let (ver, ver_se) = l2p_norm_sq(&d_ver);
            let (eb, eb_se) = l2p_norm_sq(&d_eb);
            points.push(TripletPoint {
                step: t,
                er,
                er_se,
                ber,
                ber_se,
                ver,
                ver_se,
                emp_minus_bias: eb,
                emp_minus_bias_se: eb_se,
                train_loss: last_train_loss,
            });
        }
    }
    Ok(NnTripletTrace { points })
}
