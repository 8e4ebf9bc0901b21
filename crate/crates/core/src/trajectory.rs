//! Synthetic regression tasks and recorded training trajectories.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{Optimizer, OptimizerConfig};
use crate::rng::{derive_seed, Stream};
use crate::smallnet::{self, init_params, Activation, InitScheme, NetSpec};

pub const TASK_POINTS: usize = 100;
pub const NOISE_SIGMA: f64 = 0.1;
pub const SLOPE_MEAN: f64 = 2.0;
pub const INTERCEPT_MEAN: f64 = 1.0;
/// Standard deviation of slope and intercept (variance 0.01).
pub const COEF_STD: f64 = 0.1;
/// 199 updates plus the initialization.
pub const TRAJECTORY_LEN: usize = 200;
pub const MLP_BATCH: usize = 64;

// Sub-stream tags under a per-trajectory seed.
const TASK_STREAM: u64 = 0;
const INIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

/// `y = a·x + b + ε` on 100 points with `x ~ U[−1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTask {
    pub slope: f64,
    pub intercept: f64,
    pub noise_sigma: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl RegressionTask {
    /// Task loss (MSE) of `spec` evaluated at `params`.
    pub fn loss(&self, spec: &NetSpec, params: &[f64]) -> Result<f64> {
        smallnet::loss(spec, params, &self.xs, &self.ys)
    }
}

pub fn sample_linreg_task(seed: u64) -> RegressionTask {
    sample_task_with_noise(seed, NOISE_SIGMA)
}

pub fn sample_task_with_noise(seed: u64, noise_sigma: f64) -> RegressionTask {
    let mut rng = Stream::new(seed);
    let slope = rng.normal_with(SLOPE_MEAN, COEF_STD);
    let intercept = rng.normal_with(INTERCEPT_MEAN, COEF_STD);
    let xs: Vec<f64> = (0..TASK_POINTS).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
    let ys = xs
        .iter()
        .map(|&x| slope * x + intercept + noise_sigma * rng.normal())
        .collect();
    RegressionTask {
        slope,
        intercept,
        noise_sigma,
        xs,
        ys,
    }
}

/// Least-squares `(slope, intercept)` from the 2×2 normal equations.
pub fn closed_form_optimum(task: &RegressionTask) -> Result<[f64; 2]> {
    let n = task.xs.len() as f64;
    if task.xs.is_empty() || task.xs.len() != task.ys.len() {
        return Err(Error::invalid("task needs matching, non-empty xs and ys"));
    }
    let sx: f64 = task.xs.iter().sum();
    let sy: f64 = task.ys.iter().sum();
    let sxx: f64 = task.xs.iter().map(|x| x * x).sum();
    let sxy: f64 = task.xs.iter().zip(&task.ys).map(|(x, y)| x * y).sum();
    let det = n * sxx - sx * sx;
    if det.abs() <= 1e-12 * n * sxx.max(1.0) {
        return Err(Error::invalid("singular design: all inputs identical"));
    }
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / n;
    Ok([slope, intercept])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskFamily {
    Linreg,
    Mlp,
}

/// Per-trajectory provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// Seed from which the task, initialization and shuffling streams derive.
    pub seed: u64,
    pub slope: f64,
    pub intercept: f64,
    /// Index into [`DatasetMeta::architectures`].
    pub arch: usize,
    /// Task loss at the initial weights.
    pub initial_loss: f64,
    /// Task loss at the final recorded weights.
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub family: TaskFamily,
    pub optimizer: OptimizerConfig,
    pub init: InitScheme,
    pub seed: u64,
    pub noise_sigma: f64,
    pub batch_size: Option<usize>,
    pub architectures: Vec<NetSpec>,
    pub n: usize,
    pub t: usize,
    pub d: usize,
    pub records: Vec<TrajectoryRecord>,
}

/// `N × T × D` weight snapshots, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    pub data: Vec<f64>,
    pub meta: DatasetMeta,
}

/// Borrowed `T × D` trajectory.
#[derive(Debug, Clone, Copy)]
pub struct Trajectory<'a> {
    rows: &'a [f64],
    d: usize,
}

impl<'a> Trajectory<'a> {
    pub fn new(rows: &'a [f64], d: usize) -> Result<Self> {
        if d == 0 || !rows.len().is_multiple_of(d) || rows.is_empty() {
            return Err(Error::shape("trajectory rows", d, rows.len()));
        }
        Ok(Self { rows, d })
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn step(&self, i: usize) -> &'a [f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    /// Rows `0..=n` as one flat slice.
    pub fn prefix(&self, n: usize) -> &'a [f64] {
        &self.rows[..(n + 1) * self.d]
    }

    pub fn rows(&self) -> &'a [f64] {
        self.rows
    }
}

impl TrajectoryDataset {
    pub fn n(&self) -> usize {
        self.meta.n
    }

    pub fn t(&self) -> usize {
        self.meta.t
    }

    pub fn d(&self) -> usize {
        self.meta.d
    }

    pub fn trajectory(&self, i: usize) -> Trajectory<'_> {
        let stride = self.meta.t * self.meta.d;
        Trajectory {
            rows: &self.data[i * stride..(i + 1) * stride],
            d: self.meta.d,
        }
    }

    pub fn trajectories(&self) -> impl Iterator<Item = Trajectory<'_>> {
        (0..self.n()).map(move |i| self.trajectory(i))
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.meta.n * self.meta.t * self.meta.d;
        if self.data.len() != expected {
            return Err(Error::shape("dataset payload", expected, self.data.len()));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("dataset entry {i}")));
        }
        Ok(())
    }

    /// Spec of the architecture that produced trajectory `i`.
    pub fn spec_of(&self, i: usize) -> &NetSpec {
        &self.meta.architectures[self.meta.records[i].arch]
    }

    /// Regenerates the regression task of trajectory `i`.
    pub fn task_of(&self, i: usize) -> RegressionTask {
        let seed = self.meta.records[i].seed;
        sample_task_with_noise(derive_seed(seed, TASK_STREAM), self.meta.noise_sigma)
    }
}

/// Seed of trajectory `index` in a dataset generated with `seed`.
pub fn trajectory_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, index as u64)
}

/// Task of the 2-parameter linear model `(slope, intercept)`.
pub fn linear_model() -> NetSpec {
    NetSpec::linear(1, 1)
}

struct RunOutput {
    rows: Vec<f64>,
    record: TrajectoryRecord,
}

/// Trains one network and records its weights before training and after each
/// of `TRAJECTORY_LEN − 1` updates (full-batch steps, or epochs of shuffled
/// mini-batches when `batch` is set).
fn record_run(
    spec: &NetSpec,
    arch: usize,
    optimizer: &OptimizerConfig,
    init: InitScheme,
    traj_seed: u64,
    batch: Option<usize>,
    noise_sigma: f64,
    index: usize,
) -> Result<RunOutput> {
    let task = sample_task_with_noise(derive_seed(traj_seed, TASK_STREAM), noise_sigma);
    let mut params = init_params(spec, init, derive_seed(traj_seed, INIT_STREAM)).into_inner();
    let mut shuffle = Stream::derived(traj_seed, SHUFFLE_STREAM);
    let mut opt = Optimizer::new(optimizer.clone());
    let d = params.len();
    let mut rows = Vec::with_capacity(TRAJECTORY_LEN * d);
    rows.extend_from_slice(&params);
    let initial_loss = task.loss(spec, &params)?;
    let mut order: Vec<usize> = (0..task.xs.len()).collect();
    let mut bx = Vec::new();
    let mut by = Vec::new();
    for epoch in 1..TRAJECTORY_LEN {
        match batch {
            None => {
                let (loss, grad) = smallnet::loss_and_grad(spec, &params, &task.xs, &task.ys)?;
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "loss of trajectory {index} at step {epoch}"
                    )));
                }
                opt.step(&mut params, &grad)?;
            }
            Some(size) => {
                shuffle.shuffle(&mut order);
                for chunk in order.chunks(size) {
                    bx.clear();
                    by.clear();
                    bx.extend(chunk.iter().map(|&i| task.xs[i]));
                    by.extend(chunk.iter().map(|&i| task.ys[i]));
                    let (loss, grad) = smallnet::loss_and_grad(spec, &params, &bx, &by)?;
                    if !loss.is_finite() {
                        return Err(Error::NonFinite(format!(
                            "loss of trajectory {index} at epoch {epoch}"
                        )));
                    }
                    opt.step(&mut params, &grad)?;
                }
            }
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!(
                "weights of trajectory {index} at step {epoch}"
            )));
        }
        rows.extend_from_slice(&params);
    }
    let final_loss = task.loss(spec, &params)?;
    Ok(RunOutput {
        rows,
        record: TrajectoryRecord {
            seed: traj_seed,
            slope: task.slope,
            intercept: task.intercept,
            arch,
            initial_loss,
            final_loss,
        },
    })
}

fn assemble(runs: Vec<RunOutput>, meta_base: DatasetMeta) -> TrajectoryDataset {
    let mut meta = meta_base;
    let mut data = Vec::with_capacity(runs.len() * TRAJECTORY_LEN * meta.d);
    for run in runs {
        data.extend_from_slice(&run.rows);
        meta.records.push(run.record);
    }
    meta.n = meta.records.len();
    TrajectoryDataset { data, meta }
}

/// Full-batch training of the 2-parameter linear model on `n_traj` fresh
/// tasks. Output shape `(n_traj, 200, 2)`.
pub fn generate_linreg_trajectories(
    optimizer: &OptimizerConfig,
    n_traj: usize,
    seed: u64,
    init: InitScheme,
) -> Result<TrajectoryDataset> {
    if n_traj == 0 {
        return Err(Error::invalid("n_traj must be at least 1"));
    }
    optimizer.validate()?;
    let spec = linear_model();
    let runs = (0..n_traj)
        .into_par_iter()
        .map(|i| record_run(&spec, 0, optimizer, init, trajectory_seed(seed, i), None, NOISE_SIGMA, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(
        runs,
        DatasetMeta {
            family: TaskFamily::Linreg,
            optimizer: optimizer.clone(),
            init,
            seed,
            noise_sigma: NOISE_SIGMA,
            batch_size: None,
            architectures: vec![spec.clone()],
            n: 0,
            t: TRAJECTORY_LEN,
            d: spec.param_count(),
            records: Vec::new(),
        },
    ))
}

/// The two 15-parameter MLPs: hidden `[2, 2, 1]` and hidden `[4, 1]`.
pub fn mlp_pair(activation: Activation) -> (NetSpec, NetSpec) {
    (
        NetSpec {
            input_dim: 1,
            hidden_sizes: vec![2, 2, 1],
            output_dim: 1,
            activation,
        },
        NetSpec {
            input_dim: 1,
            hidden_sizes: vec![4, 1],
            output_dim: 1,
            activation,
        },
    )
}

/// Default architecture mix: 30 three-hidden-layer nets then 20 two-hidden-layer nets.
pub fn default_mlp_mix(activation: Activation) -> Vec<(NetSpec, usize)> {
    let (a, b) = mlp_pair(activation);
    vec![(a, 30), (b, 20)]
}

/// Mini-batch (64) training of small MLPs on fresh tasks, one recorded row
/// per epoch.
pub fn generate_mlp_trajectories(
    arch_mix: &[(NetSpec, usize)],
    optimizer: &OptimizerConfig,
    seed: u64,
    init: InitScheme,
) -> Result<TrajectoryDataset> {
    let first = arch_mix
        .first()
        .ok_or_else(|| Error::invalid("architecture mix is empty"))?;
    let d = first.0.param_count();
    for (spec, _) in arch_mix {
        spec.validate()?;
        if spec.param_count() != d {
            return Err(Error::shape("architecture parameter count", d, spec.param_count()));
        }
    }
    optimizer.validate()?;
    let jobs: Vec<usize> = arch_mix
        .iter()
        .enumerate()
        .flat_map(|(arch, (_, count))| std::iter::repeat_n(arch, *count))
        .collect();
    if jobs.is_empty() {
        return Err(Error::invalid("architecture mix has no trajectories"));
    }
    let runs = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &arch)| {
            record_run(
                &arch_mix[arch].0,
                arch,
                optimizer,
                init,
                trajectory_seed(seed, i),
                Some(MLP_BATCH),
                NOISE_SIGMA,
                i,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(
        runs,
        DatasetMeta {
            family: TaskFamily::Mlp,
            optimizer: optimizer.clone(),
            init,
            seed,
            noise_sigma: NOISE_SIGMA,
            batch_size: Some(MLP_BATCH),
            architectures: arch_mix.iter().map(|(s, _)| s.clone()).collect(),
            n: 0,
            t: TRAJECTORY_LEN,
            d,
            records: Vec::new(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{self, OptimizerKind, OptimizerState};

    #[test]
    fn task_is_deterministic() {
        assert_eq!(sample_linreg_task(11), sample_linreg_task(11));
        assert_ne!(sample_linreg_task(11), sample_linreg_task(12));
        let t = sample_linreg_task(3);
        assert_eq!(t.xs.len(), TASK_POINTS);
        assert!(t.xs.iter().all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn coefficient_statistics() {
        let n = 10_000;
        let slopes: Vec<f64> = (0..n).map(|s| sample_linreg_task(s).slope).collect();
        let mean = slopes.iter().sum::<f64>() / n as f64;
        let std = (slopes.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((mean - 2.0).abs() <= 0.01, "mean {mean}");
        assert!((std - 0.1).abs() <= 0.01, "std {std}");
    }

    #[test]
    fn normal_equations() {
        let mut t = sample_linreg_task(5);
        t.ys = t.xs.iter().map(|x| t.slope * x + t.intercept).collect();
        let [a, b] = closed_form_optimum(&t).unwrap();
        assert!((a - t.slope).abs() < 1e-10 && (b - t.intercept).abs() < 1e-10);

        let xs = vec![-1.0, -0.5, 0.0, 0.5, 1.0];
        let sym = RegressionTask {
            slope: 1.0,
            intercept: 0.0,
            noise_sigma: 0.0,
            ys: xs.clone(),
            xs,
        };
        let [a, b] = closed_form_optimum(&sym).unwrap();
        assert!((a - 1.0).abs() < 1e-15 && b.abs() < 1e-15);

        let noisy = sample_linreg_task(8);
        let w = closed_form_optimum(&noisy).unwrap();
        let (_, g) = smallnet::loss_and_grad(&linear_model(), &w, &noisy.xs, &noisy.ys).unwrap();
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-8);

        let flat = RegressionTask {
            xs: vec![0.3; 4],
            ys: vec![1.0, 2.0, 3.0, 4.0],
            ..sym
        };
        assert!(closed_form_optimum(&flat).is_err());
    }

    #[test]
    fn linreg_shape_and_replay() {
        let cfg = OptimizerConfig::trajectory_default(OptimizerKind::Adam);
        let ds = generate_linreg_trajectories(&cfg, 4, 0, InitScheme::StdNormal).unwrap();
        assert_eq!((ds.n(), ds.t(), ds.d()), (4, 200, 2));
        ds.validate().unwrap();
        let traj = ds.trajectory(2);
        let task = ds.task_of(2);
        let spec = linear_model();
        let mut state = OptimizerState::new();
        for i in 0..traj.len() - 1 {
            let w = traj.step(i);
            let (_, g) = smallnet::loss_and_grad(&spec, w, &task.xs, &task.ys).unwrap();
            let (next, s) = optim::step(&cfg, &state, w, &g).unwrap();
            state = s;
            for (a, b) in next.iter().zip(traj.step(i + 1)) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn sgd_stays_at_noiseless_optimum() {
        let spec = linear_model();
        let mut task = sample_linreg_task(1);
        task.ys = task.xs.iter().map(|x| task.slope * x + task.intercept).collect();
        let w_star = closed_form_optimum(&task).unwrap();
        let mut w = w_star.to_vec();
        let mut opt = Optimizer::new(OptimizerConfig::new(OptimizerKind::Sgd, 0.01));
        for _ in 0..199 {
            let (_, g) = smallnet::loss_and_grad(&spec, &w, &task.xs, &task.ys).unwrap();
            opt.step(&mut w, &g).unwrap();
        }
        assert!((w[0] - w_star[0]).abs() < 1e-12 && (w[1] - w_star[1]).abs() < 1e-12);
    }

    #[test]
    fn mlp_mix_requires_equal_counts() {
        let cfg = OptimizerConfig::trajectory_default(OptimizerKind::Sgd);
        let bad = vec![(linear_model(), 2), (mlp_pair(Activation::Relu).0, 2)];
        assert!(generate_mlp_trajectories(&bad, &cfg, 0, InitScheme::StdNormal).is_err());
    }

    #[test]
    fn mlp_first_row_is_init() {
        let cfg = OptimizerConfig::trajectory_default(OptimizerKind::Adam);
        let (a, b) = mlp_pair(Activation::Relu);
        let ds = generate_mlp_trajectories(&[(a.clone(), 2), (b, 1)], &cfg, 3, InitScheme::StdNormal).unwrap();
        assert_eq!((ds.n(), ds.t(), ds.d()), (3, 200, 15));
        let init = init_params(&a, InitScheme::StdNormal, derive_seed(ds.meta.records[0].seed, INIT_STREAM));
        assert_eq!(ds.trajectory(0).step(0), &init[..]);
        assert_eq!(ds.meta.records[2].arch, 1);
    }

    #[test]
    fn parallel_generation_is_deterministic() {
        let cfg = OptimizerConfig::trajectory_default(OptimizerKind::RmsProp);
        let a = generate_linreg_trajectories(&cfg, 8, 4, InitScheme::XavierNormal).unwrap();
        let b = generate_linreg_trajectories(&cfg, 8, 4, InitScheme::XavierNormal).unwrap();
        assert_eq!(a, b);
        let c = generate_linreg_trajectories(&cfg, 8, 5, InitScheme::XavierNormal).unwrap();
        assert_ne!(a.data, c.data);
    }
}
