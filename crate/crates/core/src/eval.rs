//! Seed-repeated forecasting experiments.
//!
//! A cell is one `(model, optimizer, seed)` triple: generate the trajectory
//! dataset for `(optimizer, seed)`, split it, fit the model on the training
//! part and score forecasts of `w_m` on the test part. Cells are aggregated
//! per `(model, optimizer)` into mean and sample standard deviation.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineConfig, BaselineKind};
use crate::error::{Error, Result};
use crate::format;
use crate::gfm::{self, ForecastOptions, GfmConfig, Integrator};
use crate::optim::{OptimizerConfig, OptimizerKind};
use crate::rng::Stream;
use crate::smallnet::{Activation, InitScheme, NetSpec};
use crate::trajectory::{
    self, generate_linreg_trajectories, generate_mlp_trajectories, RegressionTask, Trajectory,
    TrajectoryDataset,
};

/// Train/test partition of trajectory indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffled split with `round(N·fraction)` training trajectories.
pub fn split_dataset(ds: &TrajectoryDataset, train_fraction: f64, seed: u64) -> Result<Split> {
    split_indices(ds.n(), train_fraction, seed)
}

pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::invalid(format!(
            "split of {n} trajectories at {train_fraction} leaves an empty side"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Stream::derived(seed, SPLIT_STREAM).shuffle(&mut order);
    let (train, test) = order.split_at(n_train);
    Ok(Split {
        train: train.to_vec(),
        test: test.to_vec(),
    })
}

const SPLIT_STREAM: u64 = 0x5317;

/// Mean over coordinates of squared differences.
pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::shape("mse operands", truth.len(), pred.len()));
    }
    if pred.is_empty() {
        return Err(Error::invalid("mse of empty vectors"));
    }
    Ok(pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64)
}

/// Task loss of the network `spec` instantiated at `params`.
pub fn f_source(spec: &NetSpec, params: &[f64], task: &RegressionTask) -> Result<f64> {
    task.loss(spec, params)
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gfm,
    Baseline(BaselineKind),
}

impl ModelKind {
    pub const TABLE: [ModelKind; 4] = [
        ModelKind::Baseline(BaselineKind::Introspection),
        ModelKind::Baseline(BaselineKind::Dlinear),
        ModelKind::Baseline(BaselineKind::Lfd2),
        ModelKind::Gfm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gfm => "gfm",
            ModelKind::Baseline(b) => b.name(),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("gfm") {
            Ok(ModelKind::Gfm)
        } else {
            Ok(ModelKind::Baseline(s.parse()?))
        }
    }
}

/// How GFM forecasts are integrated at test time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inference {
    /// One midpoint step over `[n/m, 1]`, the same rollout the consistency
    /// penalty trains.
    Rollout,
    /// Euler with `steps` equal sub-steps and early-stop tolerance `tau`.
    Euler { steps: usize, tau: f64 },
}

impl Inference {
    pub fn options(&self, cfg: &GfmConfig) -> ForecastOptions {
        match *self {
            Inference::Rollout => ForecastOptions::rollout(cfg),
            Inference::Euler { steps, tau } => ForecastOptions::with_step(
                cfg,
                Integrator::Euler,
                (1.0 - cfg.t_prefix()) / steps.max(1) as f64,
                tau,
            ),
        }
    }
}

/// Everything needed to reproduce a cell besides `(model, optimizer, seed)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub gfm: GfmConfig,
    pub baseline: BaselineConfig,
    pub n_traj: usize,
    pub train_fraction: f64,
    /// Task-model initialization used to generate trajectories.
    pub init: InitScheme,
    pub inference: Inference,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            gfm: GfmConfig::default(),
            baseline: BaselineConfig::default(),
            n_traj: 50,
            train_fraction: 0.6,
            init: InitScheme::StdNormal,
            inference: Inference::Rollout,
        }
    }
}

/// Aggregated test MSE of one `(model, optimizer)` pair over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub model: ModelKind,
    pub optimizer: OptimizerKind,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub f_source: Option<Vec<f64>>,
    pub config: ExperimentConfig,
}

impl ExperimentResult {
    fn from_cells(
        model: ModelKind,
        optimizer: OptimizerKind,
        seeds: Vec<u64>,
        per_seed: Vec<f64>,
        config: ExperimentConfig,
    ) -> Self {
        let mean = per_seed.iter().sum::<f64>() / per_seed.len().max(1) as f64;
        let std = sample_std(&per_seed);
        Self {
            model,
            optimizer,
            seeds,
            per_seed,
            mean,
            std,
            f_source: None,
            config,
        }
    }

    /// `mean (std)` with three decimals.
    pub fn formatted(&self) -> String {
        format!("{:.3} ({:.3})", self.mean, self.std)
    }
}

/// Linear-regression dataset of one `(optimizer, seed)` cell.
pub fn cell_dataset(optimizer: OptimizerKind, seed: u64, cfg: &ExperimentConfig) -> Result<TrajectoryDataset> {
    generate_linreg_trajectories(
        &OptimizerConfig::trajectory_default(optimizer),
        cfg.n_traj,
        seed,
        cfg.init,
    )
}

/// Test MSE of one model on one dataset.
pub fn run_cell(model: ModelKind, ds: &TrajectoryDataset, seed: u64, cfg: &ExperimentConfig) -> Result<f64> {
    let split = split_dataset(ds, cfg.train_fraction, seed)?;
    let train: Vec<Trajectory<'_>> = split.train.iter().map(|&i| ds.trajectory(i)).collect();
    let test: Vec<Trajectory<'_>> = split.test.iter().map(|&i| ds.trajectory(i)).collect();
    let (n, m) = (cfg.gfm.n, cfg.gfm.m);
    let mut total = 0.0;
    match model {
        ModelKind::Gfm => {
            let gcfg = GfmConfig {
                seed,
                ..cfg.gfm.clone()
            };
            let trained = gfm::train(&train, &gcfg)?;
            let opts = cfg.inference.options(&gcfg);
            for traj in &test {
                let f = gfm::forecast(&trained.net, traj.step(n), &gcfg, &opts)?;
                total += mse(&f.weights, traj.step(m))?;
            }
        }
        ModelKind::Baseline(kind) => {
            let fitted = baselines::fit_baseline(kind, &train, n, m, seed, &cfg.baseline)?;
            for traj in &test {
                let pred = baselines::predict_baseline(&fitted, traj.prefix(n))?;
                total += mse(&pred, traj.step(m))?;
            }
        }
    }
    Ok(total / test.len() as f64)
}

fn cell_error(e: Error, model: ModelKind, optimizer: OptimizerKind, seed: u64) -> Error {
    match e {
        Error::NonFinite(msg) => Error::NonFinite(format!("[{model} × {optimizer} × seed {seed}] {msg}")),
        Error::InvalidArgument(msg) => {
            Error::InvalidArgument(format!("[{model} × {optimizer} × seed {seed}] {msg}"))
        }
        other => other,
    }
}

fn datasets(
    optimizers: &[OptimizerKind],
    seeds: &[u64],
    cfg: &ExperimentConfig,
) -> Result<BTreeMap<(OptimizerKind, u64), TrajectoryDataset>> {
    let keys: Vec<(OptimizerKind, u64)> = optimizers
        .iter()
        .flat_map(|&o| seeds.iter().map(move |&s| (o, s)))
        .collect();
    keys.par_iter()
        .map(|&(o, s)| Ok(((o, s), cell_dataset(o, s, cfg)?)))
        .collect()
}

/// Every `(model, optimizer, seed)` cell, aggregated per `(model, optimizer)`
/// in the order given.
pub fn run_experiment(
    models: &[ModelKind],
    optimizers: &[OptimizerKind],
    seeds: &[u64],
    cfg: &ExperimentConfig,
) -> Result<Vec<ExperimentResult>> {
    if models.is_empty() || optimizers.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("experiment needs at least one model, optimizer and seed"));
    }
    cfg.gfm.validate()?;
    let data = datasets(optimizers, seeds, cfg)?;
    run_on(&data, models, optimizers, seeds, cfg)
}

fn run_on(
    data: &BTreeMap<(OptimizerKind, u64), TrajectoryDataset>,
    models: &[ModelKind],
    optimizers: &[OptimizerKind],
    seeds: &[u64],
    cfg: &ExperimentConfig,
) -> Result<Vec<ExperimentResult>> {
    let cells: Vec<(ModelKind, OptimizerKind, u64)> = models
        .iter()
        .flat_map(|&mk| {
            optimizers
                .iter()
                .flat_map(move |&o| seeds.iter().map(move |&s| (mk, o, s)))
        })
        .collect();
    let scores = cells
        .par_iter()
        .map(|&(mk, o, s)| run_cell(mk, &data[&(o, s)], s, cfg).map_err(|e| cell_error(e, mk, o, s)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(cells
        .chunks(seeds.len())
        .zip(scores.chunks(seeds.len()))
        .map(|(c, sc)| ExperimentResult::from_cells(c[0].0, c[0].1, seeds.to_vec(), sc.to_vec(), cfg.clone()))
        .collect())
}

/// Full-factorial `β × γ × ζ` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub zetas: Vec<f64>,
}

impl SweepGrid {
    /// β, γ ∈ {0, 0.1, 1, 10}; ζ ∈ {0, 1, 10, 100}.
    pub fn sensitivity() -> Self {
        Self {
            betas: vec![0.0, 0.1, 1.0, 10.0],
            gammas: vec![0.0, 0.1, 1.0, 10.0],
            zetas: vec![0.0, 1.0, 10.0, 100.0],
        }
    }

    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &b in &self.betas {
            for &g in &self.gammas {
                for &z in &self.zetas {
                    out.push((b, g, z));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub gamma: f64,
    pub zeta: f64,
    pub result: ExperimentResult,
    /// Lowest mean MSE for this optimizer across the grid.
    pub best: bool,
}

/// GFM over every grid point, optimizer and seed. Datasets are shared across
/// grid points.
pub fn sensitivity_sweep(
    grid: &SweepGrid,
    optimizers: &[OptimizerKind],
    seeds: &[u64],
    cfg: &ExperimentConfig,
) -> Result<Vec<SweepRow>> {
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::invalid("sweep grid is empty"));
    }
    if optimizers.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("sweep needs at least one optimizer and seed"));
    }
    let data = datasets(optimizers, seeds, cfg)?;
    let mut rows = Vec::with_capacity(points.len() * optimizers.len());
    for (beta, gamma, zeta) in points {
        let point_cfg = ExperimentConfig {
            gfm: GfmConfig {
                beta,
                gamma,
                zeta,
                ..cfg.gfm.clone()
            },
            ..cfg.clone()
        };
        point_cfg.gfm.validate()?;
        for result in run_on(&data, &[ModelKind::Gfm], optimizers, seeds, &point_cfg)? {
            rows.push(SweepRow {
                beta,
                gamma,
                zeta,
                result,
                best: false,
            });
        }
    }
    for &o in optimizers {
        let best = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.result.optimizer == o)
            .min_by(|a, b| a.1.result.mean.total_cmp(&b.1.result.mean))
            .map(|(i, _)| i);
        if let Some(i) = best {
            rows[i].best = true;
        }
    }
    Ok(rows)
}

/// Per-optimizer best cells `(β, γ, ζ)` reported for the sensitivity grid.
pub fn best_config(optimizer: OptimizerKind) -> (f64, f64, f64) {
    match optimizer {
        OptimizerKind::Sgd | OptimizerKind::SgdMomentum => (0.0, 0.0, 10.0),
        OptimizerKind::Adam => (0.0, 0.1, 1.0),
        OptimizerKind::AdamW => (0.0, 1.0, 100.0),
        OptimizerKind::RmsProp => (0.1, 1.0, 100.0),
        OptimizerKind::Adagrad => (0.1, 1.0, 100.0),
    }
}

/// Result of the cross-architecture experiment for one `(optimizer, seed)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationResult {
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Task loss at the forecast weights, one per test trajectory.
    pub f_source: Vec<f64>,
    /// Task loss at the recorded final weights, same order.
    pub final_loss: Vec<f64>,
    pub parameter_mse: Vec<f64>,
    pub median_f_source: f64,
    pub median_final_loss: f64,
}

/// Optimizers of the cross-architecture experiment.
pub const GENERALIZATION_OPTIMIZERS: [OptimizerKind; 4] = [
    OptimizerKind::Sgd,
    OptimizerKind::Adam,
    OptimizerKind::AdamW,
    OptimizerKind::RmsProp,
];

/// Learning rate of the MLP runs in the cross-architecture experiment.
pub const GENERALIZATION_LR: f64 = 1e-3;

/// Trains GFM on the 30 three-hidden-layer MLP trajectories (rows 0–29) and
/// forecasts the 20 two-hidden-layer trajectories (rows 30–49), scoring the
/// forecasts by their task loss. `lr` is the learning rate of the recorded
/// MLP runs.
pub fn run_generalization(
    optimizer: OptimizerKind,
    seed: u64,
    lr: f64,
    activation: Activation,
    cfg: &ExperimentConfig,
) -> Result<GeneralizationResult> {
    let mix = trajectory::default_mlp_mix(activation);
    let n_train = mix[0].1;
    let ds = generate_mlp_trajectories(
        &mix,
        &OptimizerConfig {
            lr,
            ..OptimizerConfig::trajectory_default(optimizer)
        },
        seed,
        InitScheme::StdNormal,
    )?;
    let train: Vec<Trajectory<'_>> = (0..n_train).map(|i| ds.trajectory(i)).collect();
    let gcfg = GfmConfig {
        seed,
        ..cfg.gfm.clone()
    };
    let trained = gfm::train(&train, &gcfg).map_err(|e| cell_error(e, ModelKind::Gfm, optimizer, seed))?;
    let opts = cfg.inference.options(&gcfg);
    let mut f_src = Vec::new();
    let mut finals = Vec::new();
    let mut pmse = Vec::new();
    for i in n_train..ds.n() {
        let traj = ds.trajectory(i);
        let f = gfm::forecast(&trained.net, traj.step(gcfg.n), &gcfg, &opts)?;
        f_src.push(f_source(ds.spec_of(i), &f.weights, &ds.task_of(i))?);
        finals.push(ds.meta.records[i].final_loss);
        pmse.push(mse(&f.weights, traj.step(gcfg.m))?);
    }
    Ok(GeneralizationResult {
        optimizer,
        seed,
        median_f_source: median(&f_src),
        median_final_loss: median(&finals),
        f_source: f_src,
        final_loss: finals,
        parameter_mse: pmse,
    })
}

/// One CSV row per `(model, optimizer, seed)` cell with the config snapshot.
pub fn write_cells_csv<W: Write>(results: &[ExperimentResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model",
        "optimizer",
        "seed",
        "test_mse",
        "beta",
        "gamma",
        "zeta",
        "n",
        "m",
        "epochs",
        "train_lr",
        "batch_size",
        "n_traj",
        "train_fraction",
        "init",
        "inference",
    ])?;
    for r in results {
        let c = &r.config;
        for (seed, v) in r.seeds.iter().zip(&r.per_seed) {
            let (epochs, lr, batch) = match r.model {
                ModelKind::Gfm => (c.gfm.epochs, c.gfm.train_lr, c.gfm.batch_size),
                ModelKind::Baseline(_) => (c.baseline.epochs, c.baseline.lr, c.baseline.batch_size),
            };
            w.write_record([
                r.model.name().to_string(),
                r.optimizer.name().to_string(),
                seed.to_string(),
                format!("{v:.9}"),
                c.gfm.beta.to_string(),
                c.gfm.gamma.to_string(),
                c.gfm.zeta.to_string(),
                c.gfm.n.to_string(),
                c.gfm.m.to_string(),
                epochs.to_string(),
                lr.to_string(),
                batch.to_string(),
                c.n_traj.to_string(),
                c.train_fraction.to_string(),
                c.init.name().to_string(),
                inference_label(&c.inference),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

fn inference_label(inf: &Inference) -> String {
    match inf {
        Inference::Rollout => "rollout".into(),
        Inference::Euler { steps, tau } => format!("euler:{steps}:{tau}"),
    }
}

/// Sweep rows as CSV: one row per grid point and optimizer.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["beta", "gamma", "zeta", "optimizer", "mean", "std", "per_seed", "best"])?;
    for r in rows {
        let per_seed = r
            .result
            .per_seed
            .iter()
            .map(|v| format!("{v:.9}"))
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            r.beta.to_string(),
            r.gamma.to_string(),
            r.zeta.to_string(),
            r.result.optimizer.name().to_string(),
            format!("{:.9}", r.result.mean),
            format!("{:.9}", r.result.std),
            per_seed,
            r.best.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Markdown grid of `mean (std)` with models as rows and optimizers as columns.
pub fn markdown_table(results: &[ExperimentResult]) -> String {
    let mut models: Vec<ModelKind> = Vec::new();
    let mut opts: Vec<OptimizerKind> = Vec::new();
    for r in results {
        if !models.contains(&r.model) {
            models.push(r.model);
        }
        if !opts.contains(&r.optimizer) {
            opts.push(r.optimizer);
        }
    }
    let mut s = String::from("| model |");
    for o in &opts {
        let _ = write!(s, " {o} |");
    }
    s.push_str("\n|---|");
    s.push_str(&"---|".repeat(opts.len()));
    s.push('\n');
    for m in &models {
        let _ = write!(s, "| {m} |");
        for o in &opts {
            let cell = results
                .iter()
                .find(|r| r.model == *m && r.optimizer == *o)
                .map(|r| r.formatted())
                .unwrap_or_default();
            let _ = write!(s, " {cell} |");
        }
        s.push('\n');
    }
    s
}

/// Writes `results.csv`, `summary.json` and `table.md` under `dir`.
pub fn write_experiment(dir: &Path, results: &[ExperimentResult]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut buf = Vec::new();
    write_cells_csv(results, &mut buf)?;
    format::write_bytes(&dir.join("results.csv"), &buf)?;
    format::write_json(&dir.join("summary.json"), &results)?;
    format::write_bytes(&dir.join("table.md"), markdown_table(results).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_and_partition() {
        let s = split_indices(50, 0.6, 3).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (30, 20));
        assert_eq!(s, split_indices(50, 0.6, 3).unwrap());
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert!(split_indices(50, 0.0, 0).is_err());
        assert!(split_indices(2, 0.1, 0).is_err());
    }

    #[test]
    fn mse_basics() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(mse(&[3.0, 0.5], &[1.0, 2.0]).unwrap(), mse(&[1.0, 2.0], &[3.0, 0.5]).unwrap());
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn std_and_median() {
        assert!((sample_std(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn zero_weights_f_source() {
        let task = trajectory::sample_linreg_task(2);
        let spec = trajectory::linear_model();
        let got = f_source(&spec, &[0.0, 0.0], &task).unwrap();
        let direct = task.ys.iter().map(|y| y * y).sum::<f64>() / task.ys.len() as f64;
        assert!((got - direct).abs() < 1e-12);
        let w = trajectory::closed_form_optimum(&task).unwrap();
        assert!(f_source(&spec, &w, &task).unwrap() <= got);
        assert!(f_source(&spec, &[1.0], &task).is_err());
    }

    #[test]
    fn model_names_parse() {
        for m in ModelKind::TABLE {
            assert_eq!(m.name().parse::<ModelKind>().unwrap(), m);
        }
    }

    #[test]
    fn grid_size() {
        assert_eq!(SweepGrid::sensitivity().points().len(), 64);
    }
}
