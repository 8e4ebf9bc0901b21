//! Optimizer-aware flow matching over weight trajectories.
//!
//! A trajectory `w_0 … w_T` is read as samples of a path `w(t)` on the
//! normalized clock `t = i/m`. A vector field `v_θ(w, t)` is trained so that
//! on the observed prefix (`t < n/m`) it reproduces the per-step finite
//! differences, and beyond the prefix it points along the displacement
//! `w_m − w_n`. A midpoint (RK2) rollout from `w_n` to `t = 1` is tied to the
//! true endpoint by a least-squares consistency penalty. Forecasting
//! integrates the learned field from `w_n` with explicit Euler steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format;
use crate::optim::{Optimizer, OptimizerConfig};
use crate::rng::{derive_seed, Stream};
use crate::smallnet::{self, init_params, Activation, FlatParams, InitScheme, NetSpec};
use crate::trajectory::Trajectory;

/// Where the extrapolation branch of the training path starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BridgeOrigin {
    /// `t·w_m + (1 − t)·w_0`, as in the reference training loop.
    Initial,
    /// Line through `w_n` at `t = n/m` and `w_m` at `t = 1`.
    Prefix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSampling {
    /// One `t` shared by the whole mini-batch.
    PerBatch,
    /// An independent `t` for every trajectory in the mini-batch.
    PerSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GfmConfig {
    /// Weight of the prefix (finite-difference) term.
    pub beta: f64,
    /// Weight of the extrapolation term.
    pub gamma: f64,
    /// Weight of the midpoint consistency penalty.
    pub zeta: f64,
    /// Index of the last observed prefix step.
    pub n: usize,
    /// Index of the forecast target.
    pub m: usize,
    /// Standard deviation of Gaussian noise on path points.
    pub sigma: f64,
    pub train_lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub time_sampling: TimeSampling,
    pub bridge: BridgeOrigin,
    pub init: InitScheme,
    pub hidden: Vec<usize>,
    /// Exponential decay rate (per step before `n`) of the prefix weight; 0 disables it.
    pub prefix_decay: f64,
    /// When set, only the last `k` prefix segments before `w_n` carry weight.
    pub last_k: Option<usize>,
}

impl Default for GfmConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            gamma: 1.0,
            zeta: 100.0,
            n: 4,
            m: 199,
            sigma: 0.0,
            train_lr: 1e-4,
            epochs: 1000,
            batch_size: 32,
            seed: 0,
            time_sampling: TimeSampling::PerBatch,
            bridge: BridgeOrigin::Initial,
            init: InitScheme::XavierNormal,
            hidden: vec![64, 64, 64],
            prefix_decay: 0.0,
            last_k: None,
        }
    }
}

impl GfmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n >= self.m {
            return Err(Error::invalid(format!(
                "prefix index n = {} must be below target index m = {}",
                self.n, self.m
            )));
        }
        for (name, v) in [
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("zeta", self.zeta),
            ("sigma", self.sigma),
            ("prefix_decay", self.prefix_decay),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if !(self.train_lr > 0.0) {
            return Err(Error::invalid("train_lr must be positive"));
        }
        Ok(())
    }

    /// `n/m`: the normalized time of the last observed step.
    pub fn t_prefix(&self) -> f64 {
        self.n as f64 / self.m as f64
    }

    fn check_trajectory(&self, traj: &Trajectory<'_>) -> Result<()> {
        if traj.len() <= self.m {
            return Err(Error::shape("trajectory length", self.m + 1, traj.len()));
        }
        Ok(())
    }
}

/// `ω` and `⌊tm⌋` for a normalized time, snapping `tm` to the grid when it is
/// within rounding error of an integer.
fn grid_position(t: f64, m: usize) -> (usize, f64) {
    let mut s = t * m as f64;
    let r = s.round();
    if (s - r).abs() <= 1e-9 * m.max(1) as f64 {
        s = r;
    }
    let k = s.floor();
    (k as usize, s - k)
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("time {t} outside [0, 1]")));
    }
    Ok(())
}

/// Piecewise-linear weight path: `(1 − ω)·w_⌊tm⌋ + ω·w_⌊tm⌋+1`, `ω = tm − ⌊tm⌋`.
pub fn interp_weights(traj: &Trajectory<'_>, t: f64, m: usize) -> Result<Vec<f64>> {
    check_time(t)?;
    if m == 0 || traj.len() <= m {
        return Err(Error::shape("trajectory length", m + 1, traj.len()));
    }
    let (k, omega) = grid_position(t, m);
    if k >= m || omega == 0.0 {
        return Ok(traj.step(k.min(m)).to_vec());
    }
    Ok(lerp(traj.step(k), traj.step(k + 1), omega))
}

fn lerp(a: &[f64], b: &[f64], omega: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (1.0 - omega) * x + omega * y)
        .collect()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// One draw of the training path: time, interpolation weight, prefix
/// indicator, path point and target velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub t: f64,
    pub omega: f64,
    /// `true` when `t < n/m` (the prefix branch).
    pub z: bool,
    pub w_t: Vec<f64>,
    pub v_target: Vec<f64>,
    /// `β` or `γ` after any decay/cutoff, i.e. the factor in front of the
    /// squared error.
    pub weight: f64,
}

impl PathSample {
    pub fn z_value(&self) -> f64 {
        if self.z {
            1.0
        } else {
            0.0
        }
    }
}

/// Path point and target at time `t` (noise-free).
pub fn path_sample(traj: &Trajectory<'_>, t: f64, cfg: &GfmConfig) -> Result<PathSample> {
    check_time(t)?;
    cfg.check_trajectory(traj)?;
    let m = cfg.m;
    let (k, omega) = grid_position(t, m);
    let z = t < cfg.t_prefix();
    let w_n = traj.step(cfg.n);
    let w_m = traj.step(m);
    let (w_t, v_target, weight) = if z {
        let w_t = if omega == 0.0 {
            traj.step(k).to_vec()
        } else {
            lerp(traj.step(k), traj.step(k + 1), omega)
        };
        let mut weight = cfg.beta;
        if cfg.prefix_decay > 0.0 {
            weight *= (-cfg.prefix_decay * (cfg.n - k - 1) as f64).exp();
        }
        if let Some(last) = cfg.last_k {
            if k + last < cfg.n {
                weight = 0.0;
            }
        }
        (w_t, sub(traj.step(k + 1), traj.step(k)), weight)
    } else {
        let w_t = match cfg.bridge {
            BridgeOrigin::Initial => lerp(traj.step(0), w_m, t),
            BridgeOrigin::Prefix => {
                let s = (t - cfg.t_prefix()) / (1.0 - cfg.t_prefix());
                lerp(w_n, w_m, s)
            }
        };
        (w_t, sub(w_m, w_n), cfg.gamma)
    };
    Ok(PathSample {
        t,
        omega,
        z,
        w_t,
        v_target,
        weight,
    })
}

/// Path point `w(t)` used for training.
pub fn path_point(traj: &Trajectory<'_>, t: f64, cfg: &GfmConfig) -> Result<Vec<f64>> {
    Ok(path_sample(traj, t, cfg)?.w_t)
}

/// Target velocity at time `t`.
pub fn target_field(traj: &Trajectory<'_>, t: f64, cfg: &GfmConfig) -> Result<Vec<f64>> {
    Ok(path_sample(traj, t, cfg)?.v_target)
}

/// Adds `N(0, σ²I)` noise to the path point.
pub fn perturb(sample: &mut PathSample, sigma: f64, rng: &mut Stream) {
    if sigma > 0.0 {
        for w in &mut sample.w_t {
            *w += sigma * rng.normal();
        }
    }
}

/// `(βZ + γ(1 − Z))·‖v_pred − v_target‖²`.
pub fn cfm_loss(v_pred: &[f64], sample: &PathSample) -> Result<f64> {
    if v_pred.len() != sample.v_target.len() {
        return Err(Error::shape("predicted velocity", sample.v_target.len(), v_pred.len()));
    }
    let sq: f64 = v_pred
        .iter()
        .zip(&sample.v_target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sample.weight * sq)
}

/// A time-dependent vector field on `R^D`.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, w: &[f64], t: f64) -> Vec<f64>;
}

/// Adapter for closures `(w, t) -> v`.
pub struct FnField<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64], f64) -> Vec<f64>> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, w: &[f64], t: f64) -> Vec<f64> {
        (self.f)(w, t)
    }
}

/// `v_θ(w, t)`: dense ELU network on the concatenation `[w, t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorFieldNet {
    pub spec: NetSpec,
    pub params: FlatParams,
}

impl VectorFieldNet {
    pub fn spec_for(d: usize, hidden: &[usize]) -> NetSpec {
        NetSpec {
            input_dim: d + 1,
            hidden_sizes: hidden.to_vec(),
            output_dim: d,
            activation: Activation::Elu,
        }
    }

    pub fn new(d: usize, hidden: &[usize], scheme: InitScheme, seed: u64) -> Self {
        let spec = Self::spec_for(d, hidden);
        let params = init_params(&spec, scheme, seed);
        Self { spec, params }
    }

    fn input(w: &[f64], t: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(w.len() + 1);
        x.extend_from_slice(w);
        x.push(t);
        x
    }
}

impl VectorField for VectorFieldNet {
    fn dim(&self) -> usize {
        self.spec.output_dim
    }

    fn eval(&self, w: &[f64], t: f64) -> Vec<f64> {
        smallnet::forward_trace(&self.spec, &self.params, &Self::input(w, t))
            .output()
            .to_vec()
    }
}

/// Midpoint (RK2) rollout from `w_n` at `t_n = n/m` to `t = 1`:
/// `ŵ_mid = w_n + ½Δt·v(w_n, t_n)`, `ŵ_m = w_n + Δt·v(ŵ_mid, t_n + ½Δt)`.
pub fn midpoint_predict<V: VectorField + ?Sized>(field: &V, w_n: &[f64], cfg: &GfmConfig) -> Vec<f64> {
    let t_n = cfg.t_prefix();
    let dt = 1.0 - t_n;
    let v1 = field.eval(w_n, t_n);
    let mid: Vec<f64> = w_n.iter().zip(&v1).map(|(w, v)| w + 0.5 * dt * v).collect();
    let v2 = field.eval(&mid, t_n + 0.5 * dt);
    w_n.iter().zip(&v2).map(|(w, v)| w + dt * v).collect()
}

/// Loss terms of one batch evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub cfm: f64,
    pub pred: f64,
}

/// Batch-mean `L_CFM + ζ·‖ŵ_m − w_m‖²` at the given path samples, with the
/// exact gradient with respect to the network parameters. The consistency
/// term is differentiated through both field evaluations of the midpoint
/// rollout.
pub fn gfm_loss_at(
    net: &VectorFieldNet,
    batch: &[Trajectory<'_>],
    samples: &[PathSample],
    cfg: &GfmConfig,
) -> Result<(LossParts, Vec<f64>)> {
    if batch.is_empty() || batch.len() != samples.len() {
        return Err(Error::shape("path samples", batch.len(), samples.len()));
    }
    let d = net.spec.output_dim;
    let spec = &net.spec;
    let theta: &[f64] = &net.params;
    let scale = 1.0 / batch.len() as f64;
    let t_n = cfg.t_prefix();
    let dt = 1.0 - t_n;
    let mut grad = vec![0.0; theta.len()];
    let mut cfm = 0.0;
    let mut pred = 0.0;
    let mut g_out = vec![0.0; d];
    for (traj, sample) in batch.iter().zip(samples) {
        if traj.dim() != d {
            return Err(Error::shape("trajectory dimension", d, traj.dim()));
        }
        // flow-matching term
        if sample.weight != 0.0 {
            let trace = smallnet::forward_trace(spec, theta, &VectorFieldNet::input(&sample.w_t, sample.t));
            let mut sq = 0.0;
            for ((g, &v), &target) in g_out.iter_mut().zip(trace.output()).zip(&sample.v_target) {
                let r = v - target;
                sq += r * r;
                *g = 2.0 * sample.weight * r * scale;
            }
            cfm += sample.weight * sq;
            smallnet::backward(spec, theta, &trace, &g_out, &mut grad);
        }

        // midpoint consistency term
        if cfg.zeta != 0.0 {
            let w_n = traj.step(cfg.n);
            let w_m = traj.step(cfg.m);
            let first = smallnet::forward_trace(spec, theta, &VectorFieldNet::input(w_n, t_n));
            let mid: Vec<f64> = w_n
                .iter()
                .zip(first.output())
                .map(|(w, v)| w + 0.5 * dt * v)
                .collect();
            let second = smallnet::forward_trace(spec, theta, &VectorFieldNet::input(&mid, t_n + 0.5 * dt));
            let mut sq = 0.0;
            for ((g, &v), (&wn, &wm)) in g_out.iter_mut().zip(second.output()).zip(w_n.iter().zip(w_m)) {
                let r = wn + dt * v - wm;
                sq += r * r;
                *g = 2.0 * cfg.zeta * r * scale * dt;
            }
            pred += sq;
            let g_in = smallnet::backward(spec, theta, &second, &g_out, &mut grad);
            for (g, &gm) in g_out.iter_mut().zip(&g_in[..d]) {
                *g = 0.5 * dt * gm;
            }
            smallnet::backward(spec, theta, &first, &g_out, &mut grad);
        }
    }
    let cfm = cfm * scale;
    let pred = pred * scale;
    Ok((
        LossParts {
            total: cfm + cfg.zeta * pred,
            cfm,
            pred,
        },
        grad,
    ))
}

/// Draws path samples for a mini-batch (one shared `t` unless per-sample
/// sampling is configured) and evaluates [`gfm_loss_at`].
pub fn gfm_total_loss(
    net: &VectorFieldNet,
    batch: &[Trajectory<'_>],
    cfg: &GfmConfig,
    rng: &mut Stream,
) -> Result<(LossParts, Vec<f64>, Vec<PathSample>)> {
    let samples = draw_samples(batch, cfg, rng)?;
    let (parts, grad) = gfm_loss_at(net, batch, &samples, cfg)?;
    Ok((parts, grad, samples))
}

fn draw_samples(batch: &[Trajectory<'_>], cfg: &GfmConfig, rng: &mut Stream) -> Result<Vec<PathSample>> {
    let shared = rng.uniform();
    let mut out = Vec::with_capacity(batch.len());
    for (j, traj) in batch.iter().enumerate() {
        let t = match cfg.time_sampling {
            TimeSampling::PerBatch => shared,
            TimeSampling::PerSample if j == 0 => shared,
            TimeSampling::PerSample => rng.uniform(),
        };
        let mut s = path_sample(traj, t, cfg)?;
        perturb(&mut s, cfg.sigma, rng);
        out.push(s);
    }
    Ok(out)
}

/// A trained field with its per-epoch mean training loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedGfm {
    pub net: VectorFieldNet,
    pub config: GfmConfig,
    pub loss_curve: Vec<f64>,
}

const INIT_STREAM: u64 = 0;
const TRAIN_STREAM: u64 = 1;

/// Mini-batch training with Adam: each epoch shuffles the trajectories,
/// and each mini-batch draws its path samples and takes one step.
pub fn train(trajectories: &[Trajectory<'_>], cfg: &GfmConfig) -> Result<TrainedGfm> {
    cfg.validate()?;
    let first = trajectories
        .first()
        .ok_or_else(|| Error::invalid("no training trajectories"))?;
    let d = first.dim();
    for traj in trajectories {
        cfg.check_trajectory(traj)?;
        if traj.dim() != d {
            return Err(Error::shape("trajectory dimension", d, traj.dim()));
        }
    }
    let mut net = VectorFieldNet::new(d, &cfg.hidden, cfg.init, derive_seed(cfg.seed, INIT_STREAM));
    let mut opt = Optimizer::new(OptimizerConfig::adam(cfg.train_lr));
    let mut rng = Stream::derived(cfg.seed, TRAIN_STREAM);
    let mut order: Vec<usize> = (0..trajectories.len()).collect();
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| trajectories[i]));
            let (parts, grad, samples) = gfm_total_loss(&net, &batch, cfg, &mut rng)?;
            if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                let s = &samples[0];
                return Err(Error::NonFinite(format!(
                    "training loss at epoch {epoch}, t = {:.6}, Z = {}",
                    s.t,
                    s.z_value()
                )));
            }
            opt.step(&mut net.params, &grad)?;
            epoch_loss += parts.total;
            batches += 1;
        }
        loss_curve.push(epoch_loss / batches as f64);
    }
    Ok(TrainedGfm {
        net,
        config: cfg.clone(),
        loss_curve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// `w + h·v(w, t)`.
    Euler,
    /// `w + h·v(w + ½h·v(w, t), t + ½h)`; with `h = 1 − n/m` this is exactly
    /// the rollout used by the consistency penalty.
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastOptions {
    pub integrator: Integrator,
    /// Step in normalized time.
    pub h: f64,
    /// Early-stop tolerance on `‖Δw‖`.
    pub tau: f64,
    pub max_steps: usize,
}

impl ForecastOptions {
    /// Euler with `h = (1 − n/m)/64` and `τ = 1e-6`.
    pub fn for_config(cfg: &GfmConfig) -> Self {
        Self::with_step(cfg, Integrator::Euler, (1.0 - cfg.t_prefix()) / 64.0, 1e-6)
    }

    /// One midpoint step over `[n/m, 1]`, matching training.
    pub fn rollout(cfg: &GfmConfig) -> Self {
        Self::with_step(cfg, Integrator::Midpoint, 1.0 - cfg.t_prefix(), 1e-6)
    }

    pub fn with_step(cfg: &GfmConfig, integrator: Integrator, h: f64, tau: f64) -> Self {
        let span = 1.0 - cfg.t_prefix();
        Self {
            integrator,
            h,
            tau,
            max_steps: (span / h - 1e-9).ceil().max(1.0) as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub weights: Vec<f64>,
    pub steps: usize,
    pub early_stopped: bool,
    pub t_end: f64,
}

/// Integrates the field from `w_n` at `t = n/m` toward `t = 1`.
///
/// Halts early, returning the current state, once a proposed update satisfies
/// `‖Δw‖ < τ`. The last step is shortened so the clock lands on `t = 1`.
pub fn forecast<V: VectorField + ?Sized>(
    field: &V,
    w_n: &[f64],
    cfg: &GfmConfig,
    opts: &ForecastOptions,
) -> Result<Forecast> {
    if !(opts.h > 0.0) || !(opts.tau > 0.0) {
        return Err(Error::invalid("forecast step h and tolerance tau must be positive"));
    }
    if w_n.len() != field.dim() {
        return Err(Error::shape("forecast start", field.dim(), w_n.len()));
    }
    let mut w = w_n.to_vec();
    let mut t = cfg.t_prefix();
    let mut steps = 0;
    while steps < opts.max_steps && t < 1.0 {
        let h = opts.h.min(1.0 - t);
        let v = match opts.integrator {
            Integrator::Euler => field.eval(&w, t),
            Integrator::Midpoint => {
                let v1 = field.eval(&w, t);
                let mid: Vec<f64> = w.iter().zip(&v1).map(|(x, v)| x + 0.5 * h * v).collect();
                field.eval(&mid, t + 0.5 * h)
            }
        };
        let norm = v.iter().map(|x| (h * x) * (h * x)).sum::<f64>().sqrt();
        if norm < opts.tau {
            return Ok(Forecast {
                weights: w,
                steps,
                early_stopped: true,
                t_end: t,
            });
        }
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi += h * vi;
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("forecast state at t = {t:.6}")));
        }
        steps += 1;
        t = if steps == opts.max_steps { 1.0 } else { t + h };
    }
    Ok(Forecast {
        weights: w,
        steps,
        early_stopped: false,
        t_end: t.min(1.0),
    })
}

/// Checkpoint header for a trained vector field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GfmCheckpoint {
    pub kind: String,
    pub spec: NetSpec,
    pub config: GfmConfig,
    pub seed: u64,
    pub loss_curve: Vec<f64>,
    /// Preprocessing applied to `[w, t]` before the network; always "none".
    pub input_normalization: String,
}

impl TrainedGfm {
    pub fn to_checkpoint_bytes(&self) -> Result<Vec<u8>> {
        let header = GfmCheckpoint {
            kind: "gfm".into(),
            spec: self.net.spec.clone(),
            config: self.config.clone(),
            seed: self.config.seed,
            loss_curve: self.loss_curve.clone(),
            input_normalization: "none".into(),
        };
        format::encode_checkpoint(&header, &self.net.params)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, params): (GfmCheckpoint, Vec<f64>) = format::decode_checkpoint(bytes)?;
        if header.kind != "gfm" {
            return Err(Error::format(16, format!("expected a gfm checkpoint, found `{}`", header.kind)));
        }
        if params.len() != header.spec.param_count() {
            return Err(Error::format(
                16,
                format!(
                    "payload has {} parameters, spec needs {}",
                    params.len(),
                    header.spec.param_count()
                ),
            ));
        }
        Ok(Self {
            net: VectorFieldNet {
                spec: header.spec,
                params: FlatParams(params),
            },
            config: header.config,
            loss_curve: header.loss_curve,
        })
    }
}
