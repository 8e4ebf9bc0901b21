//! Command-line front end.
//!
//! Every subcommand writes a `*.config.json` (or `config.json` inside an
//! output directory) holding the resolved arguments, so each artifact can be
//! regenerated from its neighbor.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::baselines::{self, BaselineConfig, BaselineModel};
use crate::error::{Error, Result};
use crate::eval::{self, ExperimentConfig, Inference, ModelKind, SweepGrid};
use crate::format;
use crate::gfm::{self, BridgeOrigin, GfmConfig, TimeSampling, TrainedGfm};
use crate::optim::{OptimizerConfig, OptimizerKind};
use crate::plot::{self, PlotOptions};
use crate::smallnet::{Activation, InitScheme};
use crate::trajectory::{self, TaskFamily, Trajectory, TrajectoryDataset};

#[derive(Debug, Parser, Serialize)]
#[command(name = "gfm-lab", version, about = "Forecast final network weights from early optimizer trajectories")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "GFM_LAB_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Record optimizer trajectories to GFMT + JSON files.
    Generate(GenerateArgs),
    /// Fit GFM or a baseline on the training split of a dataset.
    Train(TrainArgs),
    /// Forecast final weights for a dataset from a checkpoint (or a fresh fit).
    Forecast(ForecastArgs),
    /// Seed-repeated evaluation suites.
    Eval(EvalArgs),
    /// Loss-weight sensitivity grid.
    Sweep(SweepArgs),
    /// Render trajectories (and forecasts) to SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyArg {
    Linreg,
    Mlp,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitArg {
    StdNormal,
    XavierUniform,
    XavierNormal,
    FanInUniform,
}

impl From<InitArg> for InitScheme {
    fn from(a: InitArg) -> Self {
        match a {
            InitArg::StdNormal => InitScheme::StdNormal,
            InitArg::XavierUniform => InitScheme::XavierUniform,
            InitArg::XavierNormal => InitScheme::XavierNormal,
            InitArg::FanInUniform => InitScheme::FanInUniform,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationArg {
    Relu,
    Elu,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Relu => Activation::Relu,
            ActivationArg::Elu => Activation::Elu,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSamplingArg {
    PerBatch,
    PerSample,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BridgeArg {
    Initial,
    Prefix,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceArg {
    Rollout,
    Euler,
}

/// Inclusive seed list: `0..4`, `1,3,5` or a single number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Seeds(pub Vec<u64>);

impl FromStr for Seeds {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("cannot parse seed list `{s}`"));
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if let Some((a, b)) = part.split_once("..") {
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
                if b < a {
                    return Err(bad());
                }
                out.extend(a..=b);
            } else {
                out.push(part.parse().map_err(|_| bad())?);
            }
        }
        if out.is_empty() {
            return Err(bad());
        }
        Ok(Seeds(out))
    }
}

/// Comma-separated values. `all` expands to the full default set for
/// optimizers and models.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct List<T>(pub Vec<T>);

pub trait ListAll: Sized {
    fn all() -> Option<Vec<Self>> {
        None
    }
}

impl ListAll for f64 {}
impl ListAll for usize {}

impl ListAll for OptimizerKind {
    fn all() -> Option<Vec<Self>> {
        Some(OptimizerKind::BENCHMARK.to_vec())
    }
}

impl ListAll for ModelKind {
    fn all() -> Option<Vec<Self>> {
        Some(ModelKind::TABLE.to_vec())
    }
}

impl<T> FromStr for List<T>
where
    T: FromStr + ListAll,
    T::Err: std::fmt::Display,
{
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "all" {
            if let Some(all) = T::all() {
                return Ok(List(all));
            }
        }
        let items = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<T>().map_err(|e| Error::invalid(format!("`{p}`: {e}"))))
            .collect::<Result<Vec<T>>>()?;
        if items.is_empty() {
            return Err(Error::invalid(format!("empty list `{s}`")));
        }
        Ok(List(items))
    }
}

/// Overrides for the trajectory optimizer; unset fields keep the defaults for
/// the chosen optimizer.
#[derive(Debug, Clone, Args, Serialize, Default)]
pub struct OptimizerFlags {
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub rms_alpha: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
}

impl OptimizerFlags {
    pub fn resolve(&self, kind: OptimizerKind) -> Result<OptimizerConfig> {
        let mut c = OptimizerConfig::trajectory_default(kind);
        if let Some(v) = self.lr {
            c.lr = v;
        }
        if let Some(v) = self.momentum {
            c.momentum = v;
        }
        if let Some(v) = self.beta1 {
            c.beta1 = v;
        }
        if let Some(v) = self.beta2 {
            c.beta2 = v;
        }
        if let Some(v) = self.rms_alpha {
            c.rms_alpha = v;
        }
        if let Some(v) = self.weight_decay {
            c.weight_decay = v;
        }
        if let Some(v) = self.eps {
            c.eps = v;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GfmFlags {
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 100.0)]
    pub zeta: f64,
    /// Last observed prefix step.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Forecast target step.
    #[arg(long, default_value_t = 199)]
    pub m: usize,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub train_lr: f64,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value_t = TimeSamplingArg::PerBatch)]
    pub time_sampling: TimeSamplingArg,
    #[arg(long, value_enum, default_value_t = BridgeArg::Initial)]
    pub bridge: BridgeArg,
    /// Initialization of the vector-field network.
    #[arg(long, value_enum, default_value_t = InitArg::XavierNormal)]
    pub field_init: InitArg,
    #[arg(long, default_value = "64,64,64")]
    pub hidden: List<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub prefix_decay: f64,
    #[arg(long)]
    pub last_k: Option<usize>,
    #[arg(long, value_enum, default_value_t = InferenceArg::Rollout)]
    pub inference: InferenceArg,
    /// Sub-steps for Euler inference.
    #[arg(long, default_value_t = 64)]
    pub euler_steps: usize,
    /// Early-stop tolerance on the update norm.
    #[arg(long, default_value_t = 1e-6)]
    pub tau: f64,
}

impl GfmFlags {
    pub fn config(&self, seed: u64) -> Result<GfmConfig> {
        let cfg = GfmConfig {
            beta: self.beta,
            gamma: self.gamma,
            zeta: self.zeta,
            n: self.n,
            m: self.m,
            sigma: self.sigma,
            train_lr: self.train_lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            time_sampling: match self.time_sampling {
                TimeSamplingArg::PerBatch => TimeSampling::PerBatch,
                TimeSamplingArg::PerSample => TimeSampling::PerSample,
            },
            bridge: match self.bridge {
                BridgeArg::Initial => BridgeOrigin::Initial,
                BridgeArg::Prefix => BridgeOrigin::Prefix,
            },
            init: self.field_init.into(),
            hidden: self.hidden.0.clone(),
            prefix_decay: self.prefix_decay,
            last_k: self.last_k,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn inference(&self) -> Inference {
        match self.inference {
            InferenceArg::Rollout => Inference::Rollout,
            InferenceArg::Euler => Inference::Euler {
                steps: self.euler_steps,
                tau: self.tau,
            },
        }
    }

    fn baseline(&self) -> BaselineConfig {
        BaselineConfig {
            lr: self.train_lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = FamilyArg::Linreg)]
    pub family: FamilyArg,
    /// Comma-separated optimizers, or `all`.
    #[arg(long, default_value = "sgd")]
    pub optimizer: List<OptimizerKind>,
    #[arg(long, default_value = "0")]
    pub seeds: Seeds,
    /// Trajectories per file (linreg only).
    #[arg(long, default_value_t = 50)]
    pub n_traj: usize,
    /// Initialization of the task model.
    #[arg(long, value_enum, default_value_t = InitArg::StdNormal)]
    pub init: InitArg,
    /// Hidden activation (mlp only).
    #[arg(long, value_enum, default_value_t = ActivationArg::Relu)]
    pub activation: ActivationArg,
    #[command(flatten)]
    pub optim: OptimizerFlags,
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
    /// Overwrite existing files.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Dataset (`.gfmt`, with its `.json` sidecar).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "gfm")]
    pub model: ModelKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.6)]
    pub train_fraction: f64,
    #[command(flatten)]
    pub gfm: GfmFlags,
    /// Checkpoint path.
    #[arg(long, default_value = "model.ckpt")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ForecastArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Trained checkpoint. Without one, a model is fit on the training split
    /// using the flags below.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "gfm")]
    pub model: ModelKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.6)]
    pub train_fraction: f64,
    #[command(flatten)]
    pub gfm: GfmFlags,
    /// Forecast every trajectory instead of only the test split.
    #[arg(long)]
    pub all: bool,
    /// Forecast CSV; a JSON summary is written next to it.
    #[arg(long, default_value = "forecasts.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// Every model against every optimizer.
    Table1,
    /// GFM with only the initialization observed.
    N0,
    /// Trajectories started from Xavier-normal initialization.
    Xavier,
    /// GFM at the per-optimizer best loss weights.
    Best,
    /// Train on one MLP architecture, forecast another.
    Generalization,
    /// Models and optimizers as given on the command line.
    Custom,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long, value_enum, default_value_t = Suite::Table1)]
    pub suite: Suite,
    #[arg(long, default_value = "all")]
    pub models: List<ModelKind>,
    #[arg(long, default_value = "all")]
    pub optimizers: List<OptimizerKind>,
    #[arg(long, default_value = "0..4")]
    pub seeds: Seeds,
    #[arg(long, default_value_t = 50)]
    pub n_traj: usize,
    #[arg(long, default_value_t = 0.6)]
    pub train_fraction: f64,
    /// Learning rate of the MLP runs for the generalization suite.
    #[arg(long, default_value_t = eval::GENERALIZATION_LR)]
    pub mlp_lr: f64,
    #[command(flatten)]
    pub gfm: GfmFlags,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// `grid` is the full 4 × 4 × 4 grid; `custom` uses the lists below.
    #[arg(long, default_value = "grid", value_parser = ["grid", "appendixE", "custom"])]
    pub suite: String,
    #[arg(long)]
    pub betas: Option<List<f64>>,
    #[arg(long)]
    pub gammas: Option<List<f64>>,
    #[arg(long)]
    pub zetas: Option<List<f64>>,
    #[arg(long, default_value = "all")]
    pub optimizers: List<OptimizerKind>,
    #[arg(long, default_value = "0..4")]
    pub seeds: Seeds,
    #[arg(long, default_value_t = 50)]
    pub n_traj: usize,
    #[command(flatten)]
    pub gfm: GfmFlags,
    #[arg(long, default_value = "sweep")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PlotArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Forecast CSV from `forecast`; endpoints are overlaid.
    #[arg(long)]
    pub forecasts: Option<PathBuf>,
    #[arg(long)]
    pub title: Option<String>,
    /// Reference point, comma-separated (defaults to the mean optimum for linreg).
    #[arg(long)]
    pub reference: Option<List<f64>>,
    #[arg(long, default_value = "trajectories.svg")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Resolved<'a, A: Serialize, R: Serialize> {
    command: &'static str,
    version: &'static str,
    args: &'a A,
    resolved: R,
}

fn write_resolved<A: Serialize, R: Serialize>(path: &Path, command: &'static str, args: &A, resolved: R) -> Result<()> {
    format::write_json(
        path,
        &Resolved {
            command,
            version: env!("CARGO_PKG_VERSION"),
            args,
            resolved,
        },
    )
}

/// `foo.csv` → `foo.config.json`.
fn config_path(out: &Path) -> PathBuf {
    out.with_extension("config.json")
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => std::fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

/// Parses `args` and runs the selected subcommand.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                Err(Error::Usage(e.kind().to_string()))
            } else {
                Ok(())
            }
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        // The global pool can only be set once per process; later calls keep it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Forecast(a) => cmd_forecast(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Plot(a) => cmd_plot(a),
    }
}

/// `out/<optimizer>/seed<k>/trajectories.gfmt`.
pub fn dataset_path(out: &Path, optimizer: OptimizerKind, seed: u64) -> PathBuf {
    out.join(optimizer.name())
        .join(format!("seed{seed}"))
        .join("trajectories.gfmt")
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let mut jobs = Vec::new();
    for &kind in &a.optimizer.0 {
        let cfg = a.optim.resolve(kind)?;
        for &seed in &a.seeds.0 {
            let path = dataset_path(&a.out, kind, seed);
            if !a.force && (path.exists() || format::sidecar_path(&path).exists()) {
                return Err(Error::invalid(format!(
                    "{} already exists; pass --force to overwrite",
                    path.display()
                )));
            }
            jobs.push((cfg.clone(), seed, path));
        }
    }
    for (cfg, seed, path) in jobs {
        let ds = match a.family {
            FamilyArg::Linreg => trajectory::generate_linreg_trajectories(&cfg, a.n_traj, seed, a.init.into())?,
            FamilyArg::Mlp => trajectory::generate_mlp_trajectories(
                &trajectory::default_mlp_mix(a.activation.into()),
                &cfg,
                seed,
                a.init.into(),
            )?,
        };
        format::save_dataset(&ds, &path)?;
        write_resolved(&path.with_file_name("config.json"), "generate", a, &ds.meta.optimizer)?;
        println!("{} ({}, {}, {})", path.display(), ds.n(), ds.t(), ds.d());
    }
    Ok(())
}

/// A fitted forecaster of either kind.
pub enum Fitted {
    Gfm(TrainedGfm),
    Baseline(BaselineModel, BaselineConfig, u64),
}

impl Fitted {
    pub fn predict(&self, traj: &Trajectory<'_>, inference: &Inference) -> Result<Vec<f64>> {
        match self {
            Fitted::Gfm(t) => {
                let opts = inference.options(&t.config);
                Ok(gfm::forecast(&t.net, traj.step(t.config.n), &t.config, &opts)?.weights)
            }
            Fitted::Baseline(b, _, _) => baselines::predict_baseline(b, traj.prefix(b.n)),
        }
    }

    pub fn to_checkpoint_bytes(&self) -> Result<Vec<u8>> {
        match self {
            Fitted::Gfm(t) => t.to_checkpoint_bytes(),
            Fitted::Baseline(b, c, s) => b.to_checkpoint_bytes(c, *s),
        }
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, _): (serde_json::Value, Vec<f64>) = format::decode_checkpoint(bytes)?;
        match header.get("kind").and_then(|k| k.as_str()) {
            Some("gfm") => Ok(Fitted::Gfm(TrainedGfm::from_checkpoint_bytes(bytes)?)),
            Some("baseline") => {
                let (model, h) = BaselineModel::from_checkpoint_bytes(bytes)?;
                Ok(Fitted::Baseline(model, h.config, h.seed))
            }
            other => Err(Error::format(16, format!("unknown checkpoint kind {other:?}"))),
        }
    }

    fn target(&self) -> usize {
        match self {
            Fitted::Gfm(t) => t.config.m,
            Fitted::Baseline(..) => usize::MAX,
        }
    }
}

fn fit(
    model: ModelKind,
    ds: &TrajectoryDataset,
    train: &[usize],
    flags: &GfmFlags,
    seed: u64,
) -> Result<Fitted> {
    let trajs: Vec<Trajectory<'_>> = train.iter().map(|&i| ds.trajectory(i)).collect();
    match model {
        ModelKind::Gfm => Ok(Fitted::Gfm(gfm::train(&trajs, &flags.config(seed)?)?)),
        ModelKind::Baseline(kind) => {
            let cfg = flags.baseline();
            let b = baselines::fit_baseline(kind, &trajs, flags.n, flags.m, seed, &cfg)?;
            Ok(Fitted::Baseline(b, cfg, seed))
        }
    }
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let ds = format::load_dataset(&a.data)?;
    let split = eval::split_dataset(&ds, a.train_fraction, a.seed)?;
    let fitted = fit(a.model, &ds, &split.train, &a.gfm, a.seed)?;
    ensure_parent(&a.out)?;
    format::write_bytes(&a.out, &fitted.to_checkpoint_bytes()?)?;
    write_resolved(&config_path(&a.out), "train", a, &split)?;
    if let Fitted::Gfm(t) = &fitted {
        if let Some(last) = t.loss_curve.last() {
            println!("final training loss {last:.6}");
        }
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct ForecastSummary {
    model: String,
    trajectories: usize,
    mean_mse: f64,
    median_f_source: f64,
    median_final_loss: f64,
}

pub fn cmd_forecast(a: &ForecastArgs) -> Result<()> {
    let ds = format::load_dataset(&a.data)?;
    let split = eval::split_dataset(&ds, a.train_fraction, a.seed)?;
    let fitted = match &a.checkpoint {
        Some(p) => Fitted::from_checkpoint_bytes(&format::read_bytes(p)?)?,
        None => fit(a.model, &ds, &split.train, &a.gfm, a.seed)?,
    };
    let m = fitted.target().min(a.gfm.m);
    if m >= ds.t() {
        return Err(Error::shape("trajectory length", m + 1, ds.t()));
    }
    let indices: Vec<usize> = if a.all { (0..ds.n()).collect() } else { split.test.clone() };
    let inference = a.gfm.inference();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["trajectory".to_string(), "mse".into(), "f_source".into(), "final_loss".into()];
    header.extend((0..ds.d()).map(|k| format!("w{k}")));
    w.write_record(&header)?;
    let (mut mses, mut fs, mut finals) = (Vec::new(), Vec::new(), Vec::new());
    for &i in &indices {
        let traj = ds.trajectory(i);
        let pred = fitted.predict(&traj, &inference)?;
        let err = eval::mse(&pred, traj.step(m))?;
        let f = eval::f_source(ds.spec_of(i), &pred, &ds.task_of(i))?;
        let fl = ds.meta.records[i].final_loss;
        let mut row = vec![i.to_string(), format!("{err:.9}"), format!("{f:.9}"), format!("{fl:.9}")];
        row.extend(pred.iter().map(|v| format!("{v:.9}")));
        w.write_record(&row)?;
        mses.push(err);
        fs.push(f);
        finals.push(fl);
    }
    let bytes = w.into_inner().map_err(|e| Error::io(&a.out, e.into_error()))?;
    ensure_parent(&a.out)?;
    format::write_bytes(&a.out, &bytes)?;
    let summary = ForecastSummary {
        model: match &fitted {
            Fitted::Gfm(_) => "gfm".into(),
            Fitted::Baseline(b, ..) => b.kind.name().into(),
        },
        trajectories: indices.len(),
        mean_mse: mses.iter().sum::<f64>() / mses.len().max(1) as f64,
        median_f_source: eval::median(&fs),
        median_final_loss: eval::median(&finals),
    };
    format::write_json(&a.out.with_extension("json"), &summary)?;
    write_resolved(&config_path(&a.out), "forecast", a, &split)?;
    println!("{} trajectories, mean mse {:.6}", summary.trajectories, summary.mean_mse);
    Ok(())
}

fn experiment_config(flags: &GfmFlags, n_traj: usize, train_fraction: f64, init: InitScheme) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        gfm: flags.config(0)?,
        baseline: flags.baseline(),
        n_traj,
        train_fraction,
        init,
        inference: flags.inference(),
    })
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let seeds = &a.seeds.0;
    let base = experiment_config(&a.gfm, a.n_traj, a.train_fraction, InitScheme::StdNormal)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let results = match a.suite {
        Suite::Table1 => eval::run_experiment(&ModelKind::TABLE, &a.optimizers.0, seeds, &base)?,
        Suite::Custom => eval::run_experiment(&a.models.0, &a.optimizers.0, seeds, &base)?,
        Suite::N0 => {
            let cfg = ExperimentConfig {
                gfm: GfmConfig { n: 0, ..base.gfm.clone() },
                ..base.clone()
            };
            eval::run_experiment(&[ModelKind::Gfm], &a.optimizers.0, seeds, &cfg)?
        }
        Suite::Xavier => {
            let cfg = ExperimentConfig {
                init: InitScheme::XavierNormal,
                ..base.clone()
            };
            eval::run_experiment(&[ModelKind::Gfm], &a.optimizers.0, seeds, &cfg)?
        }
        Suite::Best => {
            let mut all = Vec::new();
            for &o in &a.optimizers.0 {
                let (beta, gamma, zeta) = eval::best_config(o);
                let cfg = ExperimentConfig {
                    gfm: GfmConfig {
                        beta,
                        gamma,
                        zeta,
                        ..base.gfm.clone()
                    },
                    ..base.clone()
                };
                all.extend(eval::run_experiment(&[ModelKind::Gfm], &[o], seeds, &cfg)?);
            }
            all
        }
        Suite::Generalization => {
            let mut rows = Vec::new();
            for &o in &a.optimizers.0 {
                for &s in seeds {
                    rows.push(eval::run_generalization(o, s, a.mlp_lr, Activation::Relu, &base)?);
                }
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["optimizer", "seed", "median_f_source", "median_final_loss", "mean_parameter_mse"])?;
            for r in &rows {
                let pm = r.parameter_mse.iter().sum::<f64>() / r.parameter_mse.len().max(1) as f64;
                w.write_record([
                    r.optimizer.name().to_string(),
                    r.seed.to_string(),
                    format!("{:.9}", r.median_f_source),
                    format!("{:.9}", r.median_final_loss),
                    format!("{pm:.9}"),
                ])?;
            }
            let path = a.out.join("generalization.csv");
            format::write_bytes(&path, &w.into_inner().map_err(|e| Error::io(&path, e.into_error()))?)?;
            format::write_json(&a.out.join("summary.json"), &rows)?;
            write_resolved(&a.out.join("config.json"), "eval", a, &base)?;
            println!("wrote {}", path.display());
            return Ok(());
        }
    };
    eval::write_experiment(&a.out, &results)?;
    write_resolved(&a.out.join("config.json"), "eval", a, &base)?;
    print!("{}", eval::markdown_table(&results));
    Ok(())
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let mut grid = SweepGrid::sensitivity();
    if a.suite == "custom" || a.betas.is_some() || a.gammas.is_some() || a.zetas.is_some() {
        if let Some(b) = &a.betas {
            grid.betas = b.0.clone();
        }
        if let Some(g) = &a.gammas {
            grid.gammas = g.0.clone();
        }
        if let Some(z) = &a.zetas {
            grid.zetas = z.0.clone();
        }
    }
    let base = experiment_config(&a.gfm, a.n_traj, 0.6, InitScheme::StdNormal)?;
    let rows = eval::sensitivity_sweep(&grid, &a.optimizers.0, &a.seeds.0, &base)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let mut buf = Vec::new();
    eval::write_sweep_csv(&rows, &mut buf)?;
    format::write_bytes(&a.out.join("sweep.csv"), &buf)?;
    write_resolved(&a.out.join("config.json"), "sweep", a, (&grid, &base))?;
    for r in rows.iter().filter(|r| r.best) {
        println!(
            "{}: best beta={} gamma={} zeta={} mse {}",
            r.result.optimizer,
            r.beta,
            r.gamma,
            r.zeta,
            r.result.formatted()
        );
    }
    Ok(())
}

fn read_forecast_endpoints(path: &Path, d: usize) -> Result<Vec<f64>> {
    let bytes = format::read_bytes(path)?;
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let header = rdr.headers()?.clone();
    let cols: Vec<usize> = (0..d)
        .map(|k| {
            let name = format!("w{k}");
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::format(0, format!("{} has no column {name}", path.display())))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        for &c in &cols {
            let v: f64 = rec
                .get(c)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::format(0, format!("bad number in {}", path.display())))?;
            out.push(v);
        }
    }
    Ok(out)
}

pub fn cmd_plot(a: &PlotArgs) -> Result<()> {
    let ds = format::load_dataset(&a.data)?;
    let endpoints = match &a.forecasts {
        Some(p) => Some(read_forecast_endpoints(p, ds.d())?),
        None => None,
    };
    let reference = match (&a.reference, ds.meta.family) {
        (Some(r), _) => Some(r.0.clone()),
        (None, TaskFamily::Linreg) if ds.d() == 2 => Some(vec![trajectory::SLOPE_MEAN, trajectory::INTERCEPT_MEAN]),
        _ => None,
    };
    let title = a.title.clone().unwrap_or_else(|| {
        format!(
            "{} trajectories, {} (seed {})",
            ds.n(),
            ds.meta.optimizer.kind,
            ds.meta.seed
        )
    });
    let svg = plot::render_svg(&ds, endpoints.as_deref(), &PlotOptions { title, reference })?;
    ensure_parent(&a.out)?;
    format::write_bytes(&a.out, svg.as_bytes())?;
    write_resolved(&config_path(&a.out), "plot", a, ())?;
    println!("wrote {}", a.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!("0..4".parse::<Seeds>().unwrap().0, vec![0, 1, 2, 3, 4]);
        assert_eq!("1,3, 5".parse::<Seeds>().unwrap().0, vec![1, 3, 5]);
        assert_eq!("7".parse::<Seeds>().unwrap().0, vec![7]);
        assert!("4..1".parse::<Seeds>().is_err());
        assert!("x".parse::<Seeds>().is_err());
    }

    #[test]
    fn parser_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn unknown_flag_rejected() {
        assert!(Cli::try_parse_from(["gfm-lab", "generate", "--bogus"]).is_err());
    }

    #[test]
    fn optimizer_overrides() {
        let flags = OptimizerFlags {
            lr: Some(0.5),
            ..Default::default()
        };
        assert_eq!(flags.resolve(OptimizerKind::Adagrad).unwrap().lr, 0.5);
        assert_eq!(OptimizerFlags::default().resolve(OptimizerKind::Adagrad).unwrap().lr, 0.1);
    }
}
