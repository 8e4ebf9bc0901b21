//! Train the forecaster on trajectories of one MLP architecture and forecast
//! trajectories of a different architecture with the same parameter count.
//! Forecasts are scored by the task loss they reach.
//!
//! cargo run --release --example generalization

use gfm_lab::eval::{run_generalization, ExperimentConfig, GENERALIZATION_LR, GENERALIZATION_OPTIMIZERS};
use gfm_lab::smallnet::Activation;

fn main() -> gfm_lab::Result<()> {
    let cfg = ExperimentConfig::default();
    println!("{:<8} {:>16} {:>18} {:>14}", "opt", "median f_source", "median final loss", "param MSE");
    for opt in GENERALIZATION_OPTIMIZERS {
        let r = run_generalization(opt, 0, GENERALIZATION_LR, Activation::Relu, &cfg)?;
        let pm = r.parameter_mse.iter().sum::<f64>() / r.parameter_mse.len() as f64;
        println!("{:<8} {:>16.4} {:>18.4} {:>14.4}", opt, r.median_f_source, r.median_final_loss, pm);
    }
    Ok(())
}
