//! First-order update rules: SGD, SGD with dampened momentum, Adam, AdamW,
//! RMSProp and Adagrad.
//!
//! [`step`] is the pure form used by tests and trajectory replay;
//! [`Optimizer`] owns its state and updates parameters in place.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    SgdMomentum,
    Adam,
    #[serde(rename = "adamw")]
    AdamW,
    #[serde(rename = "rmsprop")]
    RmsProp,
    Adagrad,
}

impl OptimizerKind {
    /// The five optimizers of the synthetic benchmark, in table order.
    pub const BENCHMARK: [OptimizerKind; 5] = [
        OptimizerKind::Sgd,
        OptimizerKind::Adam,
        OptimizerKind::AdamW,
        OptimizerKind::RmsProp,
        OptimizerKind::Adagrad,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::SgdMomentum => "sgd_momentum",
            OptimizerKind::Adam => "adam",
            OptimizerKind::AdamW => "adamw",
            OptimizerKind::RmsProp => "rmsprop",
            OptimizerKind::Adagrad => "adagrad",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "sgd" => OptimizerKind::Sgd,
            "sgd_momentum" | "momentum" => OptimizerKind::SgdMomentum,
            "adam" => OptimizerKind::Adam,
            "adamw" => OptimizerKind::AdamW,
            "rmsprop" => OptimizerKind::RmsProp,
            "adagrad" => OptimizerKind::Adagrad,
            other => return Err(Error::invalid(format!("unknown optimizer `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// RMSProp smoothing constant.
    pub rms_alpha: f64,
    pub weight_decay: f64,
    pub eps: f64,
}

impl OptimizerConfig {
    /// Trajectory-generation defaults: lr 0.01 (0.1 for Adagrad), betas
    /// (0.9, 0.999), RMSProp smoothing 0.99 with weight decay 0.01, AdamW
    /// decoupled decay 0.01, momentum 0.9.
    pub fn trajectory_default(kind: OptimizerKind) -> Self {
        let mut cfg = Self::new(kind, 0.01);
        match kind {
            OptimizerKind::Adagrad => cfg.lr = 0.1,
            OptimizerKind::RmsProp | OptimizerKind::AdamW => cfg.weight_decay = 0.01,
            _ => {}
        }
        cfg
    }

    /// Plain config with zero weight decay.
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self {
            kind,
            lr,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            rms_alpha: 0.99,
            weight_decay: 0.0,
            eps: 1e-8,
        }
    }

    pub fn adam(lr: f64) -> Self {
        Self::new(OptimizerKind::Adam, lr)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must lie in [0, 1), got {v}")))
            }
        };
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        unit("momentum", self.momentum)?;
        unit("beta1", self.beta1)?;
        unit("beta2", self.beta2)?;
        unit("rms_alpha", self.rms_alpha)?;
        if self.weight_decay < 0.0 || self.eps <= 0.0 {
            return Err(Error::invalid("weight_decay must be >= 0 and eps > 0"));
        }
        Ok(())
    }
}

/// Per-parameter accumulators. `m` holds first moments (momentum buffer for
/// SGD with momentum); `v` holds second moments or squared-gradient sums.
/// Both are empty until the first step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new() -> Self {
        Self::default()
    }

    fn ensure(&mut self, kind: OptimizerKind, len: usize) -> Result<()> {
        let (needs_m, needs_v) = match kind {
            OptimizerKind::Sgd => (false, false),
            OptimizerKind::SgdMomentum => (true, false),
            OptimizerKind::Adam | OptimizerKind::AdamW => (true, true),
            OptimizerKind::RmsProp | OptimizerKind::Adagrad => (false, true),
        };
        for (needed, buf) in [(needs_m, &mut self.m), (needs_v, &mut self.v)] {
            if !needed {
                continue;
            }
            if buf.is_empty() {
                buf.resize(len, 0.0);
            } else if buf.len() != len {
                return Err(Error::shape("optimizer state", len, buf.len()));
            }
        }
        Ok(())
    }
}

/// Stateful optimizer for in-place training loops.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    pub state: OptimizerState,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Self {
            config,
            state: OptimizerState::new(),
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        apply(&self.config, &mut self.state, params, grad)
    }
}

/// Pure update: returns new parameters and state, leaving inputs untouched.
pub fn step(
    config: &OptimizerConfig,
    state: &OptimizerState,
    params: &[f64],
    grad: &[f64],
) -> Result<(Vec<f64>, OptimizerState)> {
    let mut p = params.to_vec();
    let mut s = state.clone();
    apply(config, &mut s, &mut p, grad)?;
    Ok((p, s))
}

fn apply(
    cfg: &OptimizerConfig,
    state: &mut OptimizerState,
    params: &mut [f64],
    grad: &[f64],
) -> Result<()> {
    if grad.len() != params.len() {
        return Err(Error::shape("gradient", params.len(), grad.len()));
    }
    state.ensure(cfg.kind, params.len())?;
    state.step += 1;
    let lr = cfg.lr;
    let wd = cfg.weight_decay;
    match cfg.kind {
        OptimizerKind::Sgd => {
            for (w, &g) in params.iter_mut().zip(grad) {
                let g = g + wd * *w;
                *w -= lr * g;
            }
        }
        OptimizerKind::SgdMomentum => {
            let mu = cfg.momentum;
            for ((w, &g), m) in params.iter_mut().zip(grad).zip(&mut state.m) {
                let g = g + wd * *w;
                *m = mu * *m + (1.0 - mu) * g;
                *w -= lr * *m;
            }
        }
        OptimizerKind::Adam | OptimizerKind::AdamW => {
            let (b1, b2) = (cfg.beta1, cfg.beta2);
            let t = state.step as i32;
            let c1 = 1.0 - b1.powi(t);
            let c2 = 1.0 - b2.powi(t);
            let decoupled = cfg.kind == OptimizerKind::AdamW;
            for (((w, &g), m), v) in params.iter_mut().zip(grad).zip(&mut state.m).zip(&mut state.v) {
                let g = if decoupled {
                    *w -= lr * wd * *w;
                    g
                } else {
                    g + wd * *w
                };
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
        OptimizerKind::RmsProp => {
            let a = cfg.rms_alpha;
            for ((w, &g), v) in params.iter_mut().zip(grad).zip(&mut state.v) {
                let g = g + wd * *w;
                *v = a * *v + (1.0 - a) * g * g;
                *w -= lr * g / (v.sqrt() + cfg.eps);
            }
        }
        OptimizerKind::Adagrad => {
            for ((w, &g), v) in params.iter_mut().zip(grad).zip(&mut state.v) {
                let g = g + wd * *w;
                *v += g * g;
                *w -= lr * g / (v.sqrt() + cfg.eps);
            }
        }
    }
    Ok(())
}

/// Closed-form displacement `w_{i+1} − w_i = −α(1−μ) Σ_k μ^k g_{i−k}` of SGD
/// with dampened momentum. `history` is ordered oldest first; the last entry
/// is the current gradient.
pub fn momentum_unroll_check(config: &OptimizerConfig, history: &[Vec<f64>]) -> Result<Vec<f64>> {
    if config.kind != OptimizerKind::SgdMomentum {
        return Err(Error::invalid(format!(
            "momentum unrolling needs sgd_momentum, got {}",
            config.kind
        )));
    }
    let current = history
        .last()
        .ok_or_else(|| Error::invalid("gradient history is empty"))?;
    let mu = config.momentum;
    let mut acc = vec![0.0; current.len()];
    let mut weight = 1.0;
    for g in history.iter().rev() {
        if g.len() != acc.len() {
            return Err(Error::shape("gradient history", acc.len(), g.len()));
        }
        for (a, &gi) in acc.iter_mut().zip(g) {
            *a += weight * gi;
        }
        weight *= mu;
    }
    let scale = -config.lr * (1.0 - mu);
    Ok(acc.into_iter().map(|a| scale * a).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step() {
        let cfg = OptimizerConfig::new(OptimizerKind::Sgd, 0.1);
        let (w, _) = step(&cfg, &OptimizerState::new(), &[0.0, 0.0], &[1.0, 2.0]).unwrap();
        assert_eq!(w, vec![-0.1, -0.2]);
    }

    #[test]
    fn adam_first_step() {
        let cfg = OptimizerConfig::adam(0.001);
        let (w, s) = step(&cfg, &OptimizerState::new(), &[0.0], &[2.0]).unwrap();
        assert!((s.m[0] - 0.2).abs() < 1e-15);
        assert!((s.v[0] - 0.004).abs() < 1e-15);
        // m̂ = 2, v̂ = 4, Δw = −0.001·2/(2 + 1e-8)
        let expected = -0.001 * 2.0 / (2.0 + 1e-8);
        assert!((w[0] - expected).abs() < 1e-18);
        assert!((w[0] + 0.000999999995).abs() < 1e-15);
    }

    #[test]
    fn adagrad_first_step() {
        let cfg = OptimizerConfig::new(OptimizerKind::Adagrad, 0.1);
        let (w, s) = step(&cfg, &OptimizerState::new(), &[0.0], &[3.0]).unwrap();
        assert_eq!(s.v[0], 9.0);
        assert!((w[0] + 0.1 * 3.0 / (3.0 + 1e-8)).abs() < 1e-18);
        assert!((w[0] + 0.1).abs() < 1e-9);
    }

    #[test]
    fn rmsprop_couples_weight_decay() {
        let mut cfg = OptimizerConfig::new(OptimizerKind::RmsProp, 0.01);
        cfg.weight_decay = 0.5;
        let (w, s) = step(&cfg, &OptimizerState::new(), &[2.0], &[1.0]).unwrap();
        // g' = 1 + 0.5·2 = 2, v = 0.01·4
        assert!((s.v[0] - 0.04).abs() < 1e-15);
        assert!((w[0] - (2.0 - 0.01 * 2.0 / (0.2 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn adamw_decay_is_decoupled() {
        let mut cfg = OptimizerConfig::new(OptimizerKind::AdamW, 0.1);
        cfg.weight_decay = 0.1;
        let (w, s) = step(&cfg, &OptimizerState::new(), &[1.0], &[0.0]).unwrap();
        // zero gradient: only the decay acts and the moments stay zero
        assert_eq!(s.m[0], 0.0);
        assert!((w[0] - 0.99).abs() < 1e-15);
    }

    #[test]
    fn pure_step_leaves_inputs() {
        let cfg = OptimizerConfig::adam(0.1);
        let state = OptimizerState::new();
        let params = vec![1.0, 2.0];
        let _ = step(&cfg, &state, &params, &[0.5, 0.5]).unwrap();
        assert_eq!(params, vec![1.0, 2.0]);
        assert_eq!(state, OptimizerState::new());
    }

    #[test]
    fn length_mismatch() {
        let cfg = OptimizerConfig::adam(0.1);
        assert!(step(&cfg, &OptimizerState::new(), &[1.0, 2.0], &[0.5]).is_err());
        let mut s = OptimizerState::new();
        s.m = vec![0.0; 3];
        s.v = vec![0.0; 3];
        assert!(step(&cfg, &s, &[1.0, 2.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn unroll_degenerate_cases() {
        let mut cfg = OptimizerConfig::new(OptimizerKind::SgdMomentum, 0.1);
        cfg.momentum = 0.0;
        let d = momentum_unroll_check(&cfg, &[vec![5.0], vec![1.0, 2.0][..1].to_vec()]).unwrap();
        assert_eq!(d, vec![-0.1]);
        cfg.momentum = 0.5;
        let d = momentum_unroll_check(&cfg, &[vec![4.0]]).unwrap();
        assert_eq!(d, vec![-0.1 * 0.5 * 4.0]);
        assert!(momentum_unroll_check(&OptimizerConfig::adam(0.1), &[vec![1.0]]).is_err());
        assert!(momentum_unroll_check(&cfg, &[]).is_err());
    }

    #[test]
    fn parse_names() {
        for kind in OptimizerKind::BENCHMARK {
            assert_eq!(kind.name().parse::<OptimizerKind>().unwrap(), kind);
        }
        assert!("lion".parse::<OptimizerKind>().is_err());
    }

    #[test]
    fn trajectory_defaults() {
        assert_eq!(OptimizerConfig::trajectory_default(OptimizerKind::Adagrad).lr, 0.1);
        let rms = OptimizerConfig::trajectory_default(OptimizerKind::RmsProp);
        assert_eq!((rms.lr, rms.rms_alpha, rms.weight_decay), (0.01, 0.99, 0.01));
    }
}
