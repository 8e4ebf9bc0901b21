//! Direct-regression forecasters that map an observed prefix to `w_m`.
//!
//! - LFD-2: one affine layer on `[w_0; w_n]`.
//! - Introspection: `4D → 100 → D` ReLU regressor on the last four prefix steps.
//! - DLinear: reversible per-channel normalization around a temporal
//!   projection `(n+1) → 1` and a channel projection `D → D`.
//!
//! All are fit with Adam on the mean squared error to `w_m`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format;
use crate::optim::{Optimizer, OptimizerConfig};
use crate::rng::{derive_seed, Stream};
use crate::smallnet::{self, init_params, Activation, InitScheme, NetSpec};
use crate::trajectory::Trajectory;

pub const INTROSPECTION_WIDTH: usize = 100;
pub const INTROSPECTION_STEPS: usize = 4;
/// Lower bound on the per-channel prefix std used by DLinear's normalization.
pub const REVIN_STD_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Lfd2,
    Introspection,
    Dlinear,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Lfd2 => "lfd2",
            BaselineKind::Introspection => "introspection",
            BaselineKind::Dlinear => "dlinear",
        }
    }

    /// Smallest prefix index `n` the model can consume.
    pub fn min_prefix(self) -> usize {
        match self {
            BaselineKind::Introspection => INTROSPECTION_STEPS - 1,
            _ => 0,
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lfd2" | "lfd-2" => Ok(BaselineKind::Lfd2),
            "introspection" => Ok(BaselineKind::Introspection),
            "dlinear" => Ok(BaselineKind::Dlinear),
            other => Err(Error::invalid(format!("unknown baseline `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            epochs: 1000,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    /// Prefix index the model was fit for.
    pub n: usize,
    pub d: usize,
    pub params: Vec<f64>,
}

impl BaselineModel {
    /// Freshly initialized model.
    pub fn init(kind: BaselineKind, n: usize, d: usize, seed: u64) -> Result<Self> {
        if n < kind.min_prefix() {
            return Err(Error::invalid(format!(
                "{kind} needs at least {} prefix steps, got n = {n}",
                kind.min_prefix() + 1
            )));
        }
        if d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        let params = match kind {
            BaselineKind::Lfd2 | BaselineKind::Introspection => {
                init_params(&net_spec(kind, d), InitScheme::FanInUniform, seed).into_inner()
            }
            BaselineKind::Dlinear => {
                let layout = DlinearLayout::new(n + 1, d);
                let mut rng = Stream::new(seed);
                let mut p = vec![0.0; layout.len()];
                let tb = 1.0 / (layout.steps as f64).sqrt();
                for v in &mut p[layout.temporal..layout.channel] {
                    *v = rng.uniform_in(-tb, tb);
                }
                let cb = 1.0 / (d as f64).sqrt();
                for v in &mut p[layout.channel..layout.gamma] {
                    *v = rng.uniform_in(-cb, cb);
                }
                p[layout.gamma..layout.beta].fill(1.0);
                p
            }
        };
        Ok(Self { kind, n, d, params })
    }

    /// Identity-like DLinear: temporal weight selects the last step, channel
    /// projection is the identity, normalization affine is `(1, 0)`.
    pub fn dlinear_identity(n: usize, d: usize) -> Self {
        let layout = DlinearLayout::new(n + 1, d);
        let mut p = vec![0.0; layout.len()];
        p[layout.temporal + n] = 1.0;
        for i in 0..d {
            p[layout.channel + i * d + i] = 1.0;
        }
        p[layout.gamma..layout.beta].fill(1.0);
        Self {
            kind: BaselineKind::Dlinear,
            n,
            d,
            params: p,
        }
    }

    fn features(&self, prefix: &[f64]) -> Vec<f64> {
        let d = self.d;
        match self.kind {
            BaselineKind::Lfd2 => {
                let mut x = prefix[..d].to_vec();
                x.extend_from_slice(&prefix[self.n * d..(self.n + 1) * d]);
                x
            }
            BaselineKind::Introspection => {
                prefix[(self.n + 1 - INTROSPECTION_STEPS) * d..(self.n + 1) * d].to_vec()
            }
            BaselineKind::Dlinear => prefix[..(self.n + 1) * d].to_vec(),
        }
    }

    fn check_prefix(&self, prefix: &[f64]) -> Result<()> {
        let need = (self.n + 1) * self.d;
        if prefix.len() < need || !prefix.len().is_multiple_of(self.d) {
            return Err(Error::shape("baseline prefix", need, prefix.len()));
        }
        Ok(())
    }

    /// Sum of squared errors for one sample and its parameter gradient
    /// (accumulated into `grad` with factor `scale`).
    fn sample_loss_grad(&self, prefix: &[f64], target: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let x = self.features(prefix);
        match self.kind {
            BaselineKind::Lfd2 | BaselineKind::Introspection => {
                let spec = net_spec(self.kind, self.d);
                let trace = smallnet::forward_trace(&spec, &self.params, &x);
                let mut sq = 0.0;
                let g: Vec<f64> = trace
                    .output()
                    .iter()
                    .zip(target)
                    .map(|(p, t)| {
                        sq += (p - t) * (p - t);
                        2.0 * (p - t) * scale
                    })
                    .collect();
                smallnet::backward(&spec, &self.params, &trace, &g, grad);
                sq
            }
            BaselineKind::Dlinear => dlinear_loss_grad(&self.params, self.n + 1, self.d, &x, target, scale, grad),
        }
    }

    /// Mean over samples and coordinates of the squared error, with gradient.
    pub fn loss_and_grad(&self, prefixes: &[&[f64]], targets: &[&[f64]]) -> Result<(f64, Vec<f64>)> {
        if prefixes.is_empty() || prefixes.len() != targets.len() {
            return Err(Error::shape("baseline batch", prefixes.len(), targets.len()));
        }
        let scale = 1.0 / (prefixes.len() * self.d) as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut total = 0.0;
        for (p, t) in prefixes.iter().zip(targets) {
            self.check_prefix(p)?;
            if t.len() != self.d {
                return Err(Error::shape("baseline target", self.d, t.len()));
            }
            total += self.sample_loss_grad(p, t, scale, &mut grad);
        }
        Ok((total * scale, grad))
    }

    pub fn to_checkpoint_bytes(&self, config: &BaselineConfig, seed: u64) -> Result<Vec<u8>> {
        let header = BaselineCheckpoint {
            kind: "baseline".into(),
            baseline: self.kind,
            n: self.n,
            d: self.d,
            config: config.clone(),
            seed,
        };
        format::encode_checkpoint(&header, &self.params)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<(Self, BaselineCheckpoint)> {
        let (header, params): (BaselineCheckpoint, Vec<f64>) = format::decode_checkpoint(bytes)?;
        if header.kind != "baseline" {
            return Err(Error::format(16, format!("expected a baseline checkpoint, found `{}`", header.kind)));
        }
        let model = Self {
            kind: header.baseline,
            n: header.n,
            d: header.d,
            params,
        };
        let expected = Self::init(model.kind, model.n, model.d, 0)?.params.len();
        if model.params.len() != expected {
            return Err(Error::format(16, "parameter payload does not match the model shape"));
        }
        Ok((model, header))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCheckpoint {
    pub kind: String,
    pub baseline: BaselineKind,
    pub n: usize,
    pub d: usize,
    pub config: BaselineConfig,
    pub seed: u64,
}

fn net_spec(kind: BaselineKind, d: usize) -> NetSpec {
    match kind {
        BaselineKind::Lfd2 => NetSpec::linear(2 * d, d),
        BaselineKind::Introspection => NetSpec {
            input_dim: INTROSPECTION_STEPS * d,
            hidden_sizes: vec![INTROSPECTION_WIDTH],
            output_dim: d,
            activation: Activation::Relu,
        },
        BaselineKind::Dlinear => unreachable!("dlinear is not a plain dense net"),
    }
}

/// Offsets of the DLinear parameter blocks.
struct DlinearLayout {
    steps: usize,
    d: usize,
    temporal: usize,
    temporal_bias: usize,
    channel: usize,
    channel_bias: usize,
    gamma: usize,
    beta: usize,
}

impl DlinearLayout {
    fn new(steps: usize, d: usize) -> Self {
        let temporal = 0;
        let temporal_bias = steps;
        let channel = steps + 1;
        let channel_bias = channel + d * d;
        let gamma = channel_bias + d;
        let beta = gamma + d;
        Self {
            steps,
            d,
            temporal,
            temporal_bias,
            channel,
            channel_bias,
            gamma,
            beta,
        }
    }

    fn len(&self) -> usize {
        self.beta + self.d
    }
}

struct RevinStats {
    mean: Vec<f64>,
    std: Vec<f64>,
}

fn revin_stats(x: &[f64], steps: usize, d: usize) -> RevinStats {
    let mut mean = vec![0.0; d];
    for row in x.chunks_exact(d).take(steps) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= steps as f64);
    let mut var = vec![0.0; d];
    for row in x.chunks_exact(d).take(steps) {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var
        .into_iter()
        .map(|s| (s / steps as f64).sqrt().max(REVIN_STD_FLOOR))
        .collect();
    RevinStats { mean, std }
}

struct DlinearPass {
    stats: RevinStats,
    xn: Vec<f64>,
    xt: Vec<f64>,
    z: Vec<f64>,
    y: Vec<f64>,
    out: Vec<f64>,
}

fn dlinear_forward(p: &[f64], steps: usize, d: usize, x: &[f64]) -> DlinearPass {
    let l = DlinearLayout::new(steps, d);
    let stats = revin_stats(x, steps, d);
    let gamma = &p[l.gamma..l.beta];
    let beta = &p[l.beta..l.len()];
    let mut xn = vec![0.0; steps * d];
    let mut xt = vec![0.0; steps * d];
    for j in 0..steps {
        for e in 0..d {
            let v = (x[j * d + e] - stats.mean[e]) / stats.std[e];
            xn[j * d + e] = v;
            xt[j * d + e] = gamma[e] * v + beta[e];
        }
    }
    let a = &p[l.temporal..l.temporal_bias];
    let a0 = p[l.temporal_bias];
    let z: Vec<f64> = (0..d)
        .map(|e| a0 + (0..steps).map(|j| a[j] * xt[j * d + e]).sum::<f64>())
        .collect();
    let c = &p[l.channel..l.channel_bias];
    let cb = &p[l.channel_bias..l.gamma];
    let y: Vec<f64> = (0..d)
        .map(|o| cb[o] + (0..d).map(|e| c[o * d + e] * z[e]).sum::<f64>())
        .collect();
    let out = (0..d)
        .map(|o| (y[o] - beta[o]) / gamma[o] * stats.std[o] + stats.mean[o])
        .collect();
    DlinearPass {
        stats,
        xn,
        xt,
        z,
        y,
        out,
    }
}

fn dlinear_loss_grad(
    p: &[f64],
    steps: usize,
    d: usize,
    x: &[f64],
    target: &[f64],
    scale: f64,
    grad: &mut [f64],
) -> f64 {
    let l = DlinearLayout::new(steps, d);
    let pass = dlinear_forward(p, steps, d, x);
    let gamma = &p[l.gamma..l.beta];
    let beta = &p[l.beta..l.len()];
    let mut sq = 0.0;
    let mut g_y = vec![0.0; d];
    for o in 0..d {
        let r = pass.out[o] - target[o];
        sq += r * r;
        let g_out = 2.0 * r * scale;
        let s = pass.stats.std[o];
        g_y[o] = g_out * s / gamma[o];
        grad[l.beta + o] -= g_y[o];
        grad[l.gamma + o] -= g_out * (pass.y[o] - beta[o]) * s / (gamma[o] * gamma[o]);
    }
    let c = &p[l.channel..l.channel_bias];
    let mut g_z = vec![0.0; d];
    for o in 0..d {
        grad[l.channel_bias + o] += g_y[o];
        for e in 0..d {
            grad[l.channel + o * d + e] += g_y[o] * pass.z[e];
            g_z[e] += c[o * d + e] * g_y[o];
        }
    }
    let a = &p[l.temporal..l.temporal_bias];
    for e in 0..d {
        grad[l.temporal_bias] += g_z[e];
        for j in 0..steps {
            grad[l.temporal + j] += g_z[e] * pass.xt[j * d + e];
            let g_xt = a[j] * g_z[e];
            grad[l.gamma + e] += g_xt * pass.xn[j * d + e];
            grad[l.beta + e] += g_xt;
        }
    }
    sq
}

/// Forecast `w_m` from a prefix of at least `n + 1` rows (row-major).
pub fn predict_baseline(model: &BaselineModel, prefix: &[f64]) -> Result<Vec<f64>> {
    model.check_prefix(prefix)?;
    let x = model.features(prefix);
    Ok(match model.kind {
        BaselineKind::Lfd2 | BaselineKind::Introspection => {
            smallnet::forward_trace(&net_spec(model.kind, model.d), &model.params, &x)
                .output()
                .to_vec()
        }
        BaselineKind::Dlinear => dlinear_forward(&model.params, model.n + 1, model.d, &x).out,
    })
}

const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;

/// Fits a baseline on training trajectories: inputs are prefixes `0..=n`,
/// targets are `w_m`.
pub fn fit_baseline(
    kind: BaselineKind,
    trajectories: &[Trajectory<'_>],
    n: usize,
    m: usize,
    seed: u64,
    config: &BaselineConfig,
) -> Result<BaselineModel> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::invalid("no training trajectories"))?;
    if n >= m {
        return Err(Error::invalid(format!("prefix index {n} must be below target index {m}")));
    }
    let d = first.dim();
    for traj in trajectories {
        if traj.dim() != d {
            return Err(Error::shape("trajectory dimension", d, traj.dim()));
        }
        if traj.len() <= m {
            return Err(Error::shape("trajectory length", m + 1, traj.len()));
        }
    }
    if config.batch_size == 0 {
        return Err(Error::invalid("batch_size must be positive"));
    }
    let mut model = BaselineModel::init(kind, n, d, derive_seed(seed, INIT_STREAM))?;
    let mut opt = Optimizer::new(OptimizerConfig::adam(config.lr));
    let mut rng = Stream::derived(seed, SHUFFLE_STREAM);
    let prefixes: Vec<&[f64]> = trajectories.iter().map(|t| t.prefix(n)).collect();
    let targets: Vec<&[f64]> = trajectories.iter().map(|t| t.step(m)).collect();
    let mut order: Vec<usize> = (0..trajectories.len()).collect();
    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(config.batch_size) {
            let bp: Vec<&[f64]> = chunk.iter().map(|&i| prefixes[i]).collect();
            let bt: Vec<&[f64]> = chunk.iter().map(|&i| targets[i]).collect();
            let (loss, grad) = model.loss_and_grad(&bp, &bt)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("{kind} training loss at epoch {epoch}")));
            }
            opt.step(&mut model.params, &grad)?;
        }
    }
    Ok(model)
}

/// Mean squared error of a fitted model over trajectories.
pub fn baseline_mse(model: &BaselineModel, trajectories: &[Trajectory<'_>], m: usize) -> Result<f64> {
    let prefixes: Vec<&[f64]> = trajectories.iter().map(|t| t.prefix(model.n)).collect();
    let targets: Vec<&[f64]> = trajectories.iter().map(|t| t.step(m)).collect();
    Ok(model.loss_and_grad(&prefixes, &targets)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(t: usize, d: usize, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
        (0..t).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| f(i, j)).collect()
    }

    #[test]
    fn lfd2_selector_returns_w0() {
        let d = 2;
        let mut model = BaselineModel::init(BaselineKind::Lfd2, 4, d, 0).unwrap();
        model.params.fill(0.0);
        // weight rows are [I | 0]
        model.params[0] = 1.0;
        model.params[2 * d + 1] = 1.0;
        let prefix = rows(5, d, |i, j| (i * 10 + j) as f64 + 0.5);
        assert_eq!(predict_baseline(&model, &prefix).unwrap(), vec![0.5, 1.5]);
    }

    #[test]
    fn zero_introspection_outputs_bias() {
        let mut model = BaselineModel::init(BaselineKind::Introspection, 4, 2, 0).unwrap();
        model.params.fill(0.0);
        let len = model.params.len();
        model.params[len - 2] = 0.25;
        model.params[len - 1] = -3.0;
        let prefix = rows(5, 2, |i, j| (i + j) as f64);
        assert_eq!(predict_baseline(&model, &prefix).unwrap(), vec![0.25, -3.0]);
    }

    #[test]
    fn introspection_needs_four_steps() {
        assert!(BaselineModel::init(BaselineKind::Introspection, 2, 2, 0).is_err());
        assert!(BaselineModel::init(BaselineKind::Introspection, 3, 2, 0).is_ok());
    }

    #[test]
    fn dlinear_identity_returns_last_step() {
        let model = BaselineModel::dlinear_identity(4, 3);
        let prefix = rows(5, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.3 - j as f64);
        let out = predict_baseline(&model, &prefix).unwrap();
        for (o, w) in out.iter().zip(&prefix[12..15]) {
            assert!((o - w).abs() < 1e-12, "{o} vs {w}");
        }
    }

    #[test]
    fn dlinear_constant_prefix_is_finite() {
        let model = BaselineModel::init(BaselineKind::Dlinear, 4, 2, 3).unwrap();
        let prefix = rows(5, 2, |_, j| j as f64 + 1.0);
        let out = predict_baseline(&model, &prefix).unwrap();
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn prefix_shape_error() {
        let model = BaselineModel::init(BaselineKind::Lfd2, 4, 2, 0).unwrap();
        assert!(matches!(
            predict_baseline(&model, &[0.0; 6]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let d = 3;
        let n = 4;
        let trajs: Vec<Vec<f64>> = (0..3)
            .map(|k| rows(6, d, |i, j| ((i * 13 + j * 7 + k * 5) % 11) as f64 * 0.2 - 1.0))
            .collect();
        let prefixes: Vec<&[f64]> = trajs.iter().map(|t| &t[..(n + 1) * d]).collect();
        let targets: Vec<&[f64]> = trajs.iter().map(|t| &t[(n + 1) * d..]).collect();
        for kind in [BaselineKind::Lfd2, BaselineKind::Introspection, BaselineKind::Dlinear] {
            let mut model = BaselineModel::init(kind, n, d, 11).unwrap();
            if kind == BaselineKind::Dlinear {
                let mut rng = Stream::new(5);
                model.params.iter_mut().for_each(|p| *p += 0.3 * rng.normal());
            }
            let (_, grad) = model.loss_and_grad(&prefixes, &targets).unwrap();
            let h = 1e-6;
            for i in 0..model.params.len() {
                let mut plus = model.clone();
                plus.params[i] += h;
                let mut minus = model.clone();
                minus.params[i] -= h;
                let fp = plus.loss_and_grad(&prefixes, &targets).unwrap().0;
                let fm = minus.loss_and_grad(&prefixes, &targets).unwrap().0;
                let fd = (fp - fm) / (2.0 * h);
                let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
                assert!(err < 1e-4, "{kind} param {i}: fd {fd} analytic {}", grad[i]);
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let model = BaselineModel::init(BaselineKind::Dlinear, 4, 2, 1).unwrap();
        let cfg = BaselineConfig::default();
        let bytes = model.to_checkpoint_bytes(&cfg, 1).unwrap();
        let (back, header) = BaselineModel::from_checkpoint_bytes(&bytes).unwrap();
        assert_eq!(back, model);
        assert_eq!(header.config, cfg);
    }
}
