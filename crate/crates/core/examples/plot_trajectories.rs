//! Draw SGD trajectories in the (slope, intercept) plane with GFM forecasts
//! overlaid, and an MLP dataset projected onto its principal plane.
//!
//! cargo run --release --example plot_trajectories

use gfm_lab::gfm::{self, ForecastOptions, GfmConfig};
use gfm_lab::optim::{OptimizerConfig, OptimizerKind};
use gfm_lab::plot::{render_svg, PlotOptions};
use gfm_lab::smallnet::{Activation, InitScheme};
use gfm_lab::trajectory::{default_mlp_mix, generate_linreg_trajectories, generate_mlp_trajectories};

fn main() -> gfm_lab::Result<()> {
    let sgd = OptimizerConfig::trajectory_default(OptimizerKind::Sgd);
    let ds = generate_linreg_trajectories(&sgd, 50, 0, InitScheme::StdNormal)?;

    let cfg = GfmConfig {
        epochs: 300,
        ..GfmConfig::default()
    };
    let train: Vec<_> = (0..30).map(|i| ds.trajectory(i)).collect();
    let trained = gfm::train(&train, &cfg)?;
    let opts = ForecastOptions::rollout(&cfg);
    let mut ends = Vec::new();
    for i in 0..ds.n() {
        ends.extend(gfm::forecast(&trained.net, ds.trajectory(i).step(cfg.n), &cfg, &opts)?.weights);
    }
    let svg = render_svg(
        &ds,
        Some(&ends),
        &PlotOptions {
            title: "SGD on linear regression, GFM forecasts in red".into(),
            reference: Some(vec![2.0, 1.0]),
        },
    )?;
    std::fs::create_dir_all("target").ok();
    std::fs::write("target/linreg_sgd.svg", svg).expect("write svg");

    let mlp = generate_mlp_trajectories(&default_mlp_mix(Activation::Relu), &sgd, 0, InitScheme::StdNormal)?;
    let svg = render_svg(&mlp, None, &PlotOptions { title: "MLP trajectories".into(), reference: None })?;
    std::fs::write("target/mlp_sgd.svg", svg).expect("write svg");
    println!("wrote target/linreg_sgd.svg and target/mlp_sgd.svg");
    Ok(())
}
