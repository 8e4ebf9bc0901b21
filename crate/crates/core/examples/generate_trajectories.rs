//! Record linear-regression trajectories for every benchmark optimizer and
//! save them as GFMT files.
//!
//! cargo run --release --example generate_trajectories -- [out_dir]

use std::path::PathBuf;

use gfm_lab::format;
use gfm_lab::optim::{OptimizerConfig, OptimizerKind};
use gfm_lab::smallnet::InitScheme;
use gfm_lab::trajectory::{closed_form_optimum, generate_linreg_trajectories};

fn main() -> gfm_lab::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "target/example-data".into()).into();
    for kind in OptimizerKind::BENCHMARK {
        let cfg = OptimizerConfig::trajectory_default(kind);
        let ds = generate_linreg_trajectories(&cfg, 50, 0, InitScheme::StdNormal)?;

        // distance of each endpoint from the least-squares solution of its task
        let mut gap = 0.0;
        for i in 0..ds.n() {
            let w_star = closed_form_optimum(&ds.task_of(i))?;
            let end = ds.trajectory(i).step(ds.t() - 1);
            gap += ((end[0] - w_star[0]).powi(2) + (end[1] - w_star[1]).powi(2)).sqrt();
        }
        let path = out.join(kind.name()).join("seed0").join("trajectories.gfmt");
        format::save_dataset(&ds, &path)?;
        println!(
            "{:<8} lr {:<5} shape ({}, {}, {})  mean |w_T - w*| = {:.4}  -> {}",
            kind,
            cfg.lr,
            ds.n(),
            ds.t(),
            ds.d(),
            gap / ds.n() as f64,
            path.display()
        );
    }
    Ok(())
}
