//! Fit the flow-matching forecaster on 30 SGD trajectories, forecast the
//! remaining 20 from their first five weights, and checkpoint the model.
//!
//! cargo run --release --example train_and_forecast

use gfm_lab::eval::{mse, split_dataset};
use gfm_lab::gfm::{self, ForecastOptions, GfmConfig, TrainedGfm};
use gfm_lab::optim::{OptimizerConfig, OptimizerKind};
use gfm_lab::smallnet::InitScheme;
use gfm_lab::trajectory::generate_linreg_trajectories;

fn main() -> gfm_lab::Result<()> {
    let ds = generate_linreg_trajectories(
        &OptimizerConfig::trajectory_default(OptimizerKind::Sgd),
        50,
        0,
        InitScheme::StdNormal,
    )?;
    let split = split_dataset(&ds, 0.6, 0)?;
    let train: Vec<_> = split.train.iter().map(|&i| ds.trajectory(i)).collect();

    let cfg = GfmConfig::default();
    let trained = gfm::train(&train, &cfg)?;
    let curve = &trained.loss_curve;
    println!("training loss: epoch 1 {:.4}, epoch {} {:.4}", curve[0], curve.len(), curve[curve.len() - 1]);

    let rollout = ForecastOptions::rollout(&cfg);
    let euler = ForecastOptions::for_config(&cfg);
    let (mut e_roll, mut e_euler, mut e_hold) = (0.0, 0.0, 0.0);
    for &i in &split.test {
        let traj = ds.trajectory(i);
        let w_n = traj.step(cfg.n);
        let target = traj.step(cfg.m);
        e_roll += mse(&gfm::forecast(&trained.net, w_n, &cfg, &rollout)?.weights, target)?;
        e_euler += mse(&gfm::forecast(&trained.net, w_n, &cfg, &euler)?.weights, target)?;
        e_hold += mse(w_n, target)?;
    }
    let k = split.test.len() as f64;
    println!("test MSE, midpoint rollout : {:.4}", e_roll / k);
    println!("test MSE, Euler (64 steps) : {:.4}", e_euler / k);
    println!("test MSE, keep w_n          : {:.4}", e_hold / k);

    let bytes = trained.to_checkpoint_bytes()?;
    let restored = TrainedGfm::from_checkpoint_bytes(&bytes)?;
    assert_eq!(restored, trained);
    println!("checkpoint: {} bytes, restores exactly", bytes.len());
    Ok(())
}
