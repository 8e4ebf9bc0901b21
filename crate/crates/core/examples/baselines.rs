//! Fit the three baseline forecasters on Adam trajectories and compare them
//! with simply keeping the last observed weights.
//!
//! cargo run --release --example baselines

use gfm_lab::baselines::{baseline_mse, fit_baseline, BaselineConfig, BaselineKind};
use gfm_lab::eval::{mse, split_dataset};
use gfm_lab::optim::{OptimizerConfig, OptimizerKind};
use gfm_lab::smallnet::InitScheme;
use gfm_lab::trajectory::generate_linreg_trajectories;

fn main() -> gfm_lab::Result<()> {
    let ds = generate_linreg_trajectories(
        &OptimizerConfig::trajectory_default(OptimizerKind::Adam),
        50,
        1,
        InitScheme::StdNormal,
    )?;
    let split = split_dataset(&ds, 0.6, 1)?;
    let train: Vec<_> = split.train.iter().map(|&i| ds.trajectory(i)).collect();
    let test: Vec<_> = split.test.iter().map(|&i| ds.trajectory(i)).collect();
    let (n, m) = (4, 199);

    for kind in [BaselineKind::Lfd2, BaselineKind::Introspection, BaselineKind::Dlinear] {
        let model = fit_baseline(kind, &train, n, m, 1, &BaselineConfig::default())?;
        println!("{:<14} {:>3} params  test MSE {:.4}", kind, model.params.len(), baseline_mse(&model, &test, m)?);
    }
    let hold = test.iter().map(|t| mse(t.step(n), t.step(m))).sum::<gfm_lab::Result<f64>>()?;
    println!("{:<14}              test MSE {:.4}", "keep w_n", hold / test.len() as f64);
    Ok(())
}
