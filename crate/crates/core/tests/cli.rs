use std::path::Path;
use std::process::{Command, Output};

use gfm_lab::format::load_dataset;

fn gfm_lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfm-lab"))
        .current_dir(dir)
        .env("GFM_LAB_JOBS", "1")
        .args(args)
        .output()
        .expect("spawn gfm-lab")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn generate_writes_one_dataset_per_seed_and_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["generate", "--family", "linreg", "--optimizer", "sgd", "--seeds", "0..4", "--n-traj", "50", "--out", "data"];
    ok(&gfm_lab(dir.path(), &args));
    for seed in 0..5 {
        let ds = load_dataset(&dir.path().join(format!("data/sgd/seed{seed}/trajectories.gfmt"))).unwrap();
        assert_eq!((ds.n(), ds.t(), ds.d()), (50, 200, 2));
        assert!(dir.path().join(format!("data/sgd/seed{seed}/config.json")).exists());
    }
    let again = gfm_lab(dir.path(), &args);
    assert_eq!(again.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    let mut forced = args.to_vec();
    forced.push("--force");
    ok(&gfm_lab(dir.path(), &forced));
}

#[test]
fn adagrad_metadata_records_its_learning_rate() {
    let dir = tempfile::tempdir().unwrap();
    ok(&gfm_lab(dir.path(), &["generate", "--optimizer", "adagrad", "--n-traj", "4", "--out", "d"]));
    let ds = load_dataset(&dir.path().join("d/adagrad/seed0/trajectories.gfmt")).unwrap();
    assert_eq!(ds.meta.optimizer.lr, 0.1);
}

#[test]
fn mlp_generation_has_fifteen_parameters() {
    let dir = tempfile::tempdir().unwrap();
    ok(&gfm_lab(dir.path(), &["generate", "--family", "mlp", "--optimizer", "adam", "--out", "d"]));
    let ds = load_dataset(&dir.path().join("d/adam/seed0/trajectories.gfmt")).unwrap();
    assert_eq!((ds.n(), ds.t(), ds.d()), (50, 200, 15));
}

#[test]
fn train_forecast_plot_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&gfm_lab(p, &["generate", "--n-traj", "10", "--out", "d"]));
    let data = "d/sgd/seed0/trajectories.gfmt";
    ok(&gfm_lab(p, &["train", "--data", data, "--epochs", "20", "--hidden", "16,16", "--out", "m/gfm.ckpt"]));
    assert!(p.join("m/gfm.config.json").exists());
    ok(&gfm_lab(p, &["forecast", "--data", data, "--checkpoint", "m/gfm.ckpt", "--out", "f.csv"]));
    let csv = std::fs::read_to_string(p.join("f.csv")).unwrap();
    assert!(csv.starts_with("trajectory,mse,f_source,final_loss,w0,w1\n"));
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(p.join("f.json").exists() && p.join("f.config.json").exists());

    // initialization-only ablation, fitting on the fly
    ok(&gfm_lab(p, &["forecast", "--data", data, "--n", "0", "--epochs", "5", "--hidden", "8", "--out", "f0.csv"]));
    ok(&gfm_lab(p, &["forecast", "--data", data, "--model", "lfd2", "--epochs", "5", "--out", "fl.csv"]));

    ok(&gfm_lab(p, &["plot", "--data", data, "--forecasts", "f.csv", "--out", "a.svg"]));
    ok(&gfm_lab(p, &["plot", "--data", data, "--forecasts", "f.csv", "--out", "b.svg"]));
    let a = std::fs::read(p.join("a.svg")).unwrap();
    assert_eq!(a, std::fs::read(p.join("b.svg")).unwrap());
    let svg = String::from_utf8(a).unwrap();
    assert_eq!(svg.matches("<g id=\"traj").count(), 10);
    assert!(svg.contains("version=\"1.1\""));
}

#[test]
fn eval_and_sweep_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let common = ["--seeds", "0", "--n-traj", "10", "--epochs", "2", "--hidden", "8"];
    let mut eval = vec!["eval", "--suite", "table1", "--optimizers", "sgd,adam", "--out", "ev"];
    eval.extend(common);
    ok(&gfm_lab(p, &eval));
    let csv = std::fs::read_to_string(p.join("ev/results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 2);
    for model in ["gfm", "lfd2", "introspection", "dlinear"] {
        assert!(csv.lines().any(|l| l.starts_with(&format!("{model},"))));
    }
    assert!(p.join("ev/summary.json").exists() && p.join("ev/table.md").exists() && p.join("ev/config.json").exists());

    let mut sweep = vec!["sweep", "--betas", "0,1", "--gammas", "1", "--zetas", "1,10", "--optimizers", "sgd", "--out", "sw"];
    sweep.extend(common);
    ok(&gfm_lab(p, &sweep));
    let csv = std::fs::read_to_string(p.join("sw/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    assert_eq!(csv.lines().filter(|l| l.ends_with(",true")).count(), 1);
}

#[test]
fn exit_codes_partition_failures() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    // missing input file
    assert_eq!(gfm_lab(p, &["train", "--data", "missing.gfmt"]).status.code(), Some(2));
    // corrupt dataset
    std::fs::write(p.join("bad.gfmt"), b"NOPE").unwrap();
    std::fs::write(p.join("bad.json"), b"{}").unwrap();
    assert_eq!(gfm_lab(p, &["plot", "--data", "bad.gfmt"]).status.code(), Some(2));
    // invalid model configuration
    ok(&gfm_lab(p, &["generate", "--n-traj", "10", "--out", "d"]));
    let bad = gfm_lab(p, &["train", "--data", "d/sgd/seed0/trajectories.gfmt", "--n", "250"]);
    assert_eq!(bad.status.code(), Some(1));
    // unknown flag
    assert_ne!(gfm_lab(p, &["generate", "--bogus"]).status.code(), Some(0));
}
