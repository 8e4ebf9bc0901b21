//! Every model against every benchmark optimizer, repeated over seeds.
//! Writes results.csv, summary.json and table.md.
//!
//! cargo run --release --example table1 -- [n_seeds] [out_dir]

use std::path::PathBuf;
use std::time::Instant;

use gfm_lab::eval::{self, ExperimentConfig, ModelKind};
use gfm_lab::optim::OptimizerKind;

fn main() -> gfm_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let out: PathBuf = args.next().unwrap_or_else(|| "target/table1".into()).into();
    let seeds: Vec<u64> = (0..n_seeds).collect();

    let start = Instant::now();
    let results = eval::run_experiment(&ModelKind::TABLE, &OptimizerKind::BENCHMARK, &seeds, &ExperimentConfig::default())?;
    eval::write_experiment(&out, &results)?;
    print!("{}", eval::markdown_table(&results));
    println!("\n{} cells in {:.1?}; written to {}", results.len() * seeds.len(), start.elapsed(), out.display());
    Ok(())
}
