//! Sweep the three loss weights for two optimizers and report the best cell.
//! The full grid is 4 x 4 x 4; pass `full` to run it, otherwise only the
//! consistency weight is varied.
//!
//! cargo run --release --example sensitivity_sweep -- [full]

use gfm_lab::eval::{self, ExperimentConfig, SweepGrid};
use gfm_lab::optim::OptimizerKind;

fn main() -> gfm_lab::Result<()> {
    let grid = if std::env::args().any(|a| a == "full") {
        SweepGrid::sensitivity()
    } else {
        SweepGrid {
            betas: vec![1.0],
            gammas: vec![1.0],
            zetas: vec![0.0, 1.0, 10.0, 100.0],
        }
    };
    let cfg = ExperimentConfig::default();
    let rows = eval::sensitivity_sweep(&grid, &[OptimizerKind::Sgd, OptimizerKind::Adagrad], &[0, 1], &cfg)?;

    println!("{:>6} {:>6} {:>6}  {:<8} mse", "beta", "gamma", "zeta", "opt");
    for r in &rows {
        println!(
            "{:>6} {:>6} {:>6}  {:<8} {}{}",
            r.beta,
            r.gamma,
            r.zeta,
            r.result.optimizer,
            r.result.formatted(),
            if r.best { "  <- best" } else { "" }
        );
    }
    let mut csv = Vec::new();
    eval::write_sweep_csv(&rows, &mut csv)?;
    std::fs::create_dir_all("target").ok();
    gfm_lab::format::write_bytes("target/sweep.csv".as_ref(), &csv)?;
    Ok(())
}
