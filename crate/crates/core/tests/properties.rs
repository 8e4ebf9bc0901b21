use gfm_lab::baselines::{predict_baseline, BaselineModel};
use gfm_lab::eval::f_source;
use gfm_lab::gfm::{path_point, target_field, GfmConfig};
use gfm_lab::optim::{self, momentum_unroll_check, Optimizer, OptimizerConfig, OptimizerKind, OptimizerState};
use gfm_lab::smallnet::{self, flatten, unflatten, Activation, NetSpec};
use gfm_lab::trajectory::{closed_form_optimum, linear_model, sample_linreg_task, Trajectory};
use proptest::prelude::*;

fn activation() -> impl Strategy<Value = Activation> {
    prop_oneof![Just(Activation::Identity), Just(Activation::Relu), Just(Activation::Elu)]
}

fn net_case() -> impl Strategy<Value = (NetSpec, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..4, prop::collection::vec(1usize..5, 0..3), 1usize..3, activation(), 1usize..5).prop_flat_map(
        |(input, hidden, output, act, batch)| {
            let spec = NetSpec::new(input, hidden, output, act).unwrap();
            let p = spec.param_count();
            (
                Just(spec),
                prop::collection::vec(-1.5f64..1.5, p),
                prop::collection::vec(-2.0f64..2.0, batch * input),
                prop::collection::vec(-2.0f64..2.0, batch * output),
            )
        },
    )
}

/// Smallest |pre-activation| over hidden units, used to steer clear of relu kinks.
fn min_hidden_preactivation(spec: &NetSpec, params: &[f64], xs: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for x in xs.chunks_exact(spec.input_dim) {
        let trace = smallnet::forward_trace(spec, params, x);
        for l in 0..trace.layers().saturating_sub(1) {
            for z in trace.pre_activation(l) {
                best = best.min(z.abs());
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn network_gradient_matches_central_differences((spec, params, xs, ys) in net_case()) {
        if spec.activation == Activation::Relu {
            prop_assume!(min_hidden_preactivation(&spec, &params, &xs) > 1e-3);
        }
        let (_, grad) = smallnet::loss_and_grad(&spec, &params, &xs, &ys).unwrap();
        prop_assert_eq!(grad.len(), spec.param_count());
        let h = 1e-6;
        let mut p = params.clone();
        for i in 0..params.len() {
            p[i] = params[i] + h;
            let up = smallnet::loss(&spec, &p, &xs, &ys).unwrap();
            p[i] = params[i] - h;
            let down = smallnet::loss(&spec, &p, &xs, &ys).unwrap();
            p[i] = params[i];
            let fd = (up - down) / (2.0 * h);
            let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1.0);
            let tol = if spec.activation == Activation::Relu { 1e-3 } else { 1e-4 };
            prop_assert!(rel < tol, "param {}: analytic {} fd {}", i, grad[i], fd);
        }
    }

    #[test]
    fn flatten_unflatten_is_bit_exact((spec, params, _xs, _ys) in net_case()) {
        let layers = unflatten(&spec, &params).unwrap();
        prop_assert_eq!(flatten(&layers).0, params);
    }

    #[test]
    fn momentum_unroll_matches_stepping(
        grads in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 1..=10),
        lr in 1e-3f64..0.5,
        mu in 0.0f64..0.99,
    ) {
        let mut cfg = OptimizerConfig::new(OptimizerKind::SgdMomentum, lr);
        cfg.momentum = mu;
        let mut opt = Optimizer::new(cfg.clone());
        let mut w = vec![0.5, -1.0, 2.0];
        for (i, g) in grads.iter().enumerate() {
            let before = w.clone();
            opt.step(&mut w, g).unwrap();
            let expected = momentum_unroll_check(&cfg, &grads[..=i]).unwrap();
            for k in 0..3 {
                prop_assert!(((w[k] - before[k]) - expected[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adam_step_is_bounded_by_lr(g in prop::collection::vec(-100.0f64..100.0, 1..6), lr in 1e-4f64..0.1, steps in 2usize..50) {
        for kind in [OptimizerKind::Adam, OptimizerKind::AdamW] {
            let mut cfg = OptimizerConfig::new(kind, lr);
            cfg.weight_decay = 0.0;
            let mut opt = Optimizer::new(cfg);
            let mut w = vec![0.0; g.len()];
            for s in 0..steps {
                let before = w.clone();
                opt.step(&mut w, &g).unwrap();
                if s >= 1 {
                    for (a, b) in w.iter().zip(&before) {
                        prop_assert!((a - b).abs() <= lr * (1.0 + 1e-6));
                    }
                }
            }
        }
    }

    #[test]
    fn adagrad_accumulator_never_decreases(grads in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 1..20)) {
        let cfg = OptimizerConfig::trajectory_default(OptimizerKind::Adagrad);
        let mut state = OptimizerState::new();
        let mut w = vec![1.0; 4];
        let mut prev = vec![0.0; 4];
        for g in &grads {
            let (next, s) = optim::step(&cfg, &state, &w, g).unwrap();
            for (v, p) in s.v.iter().zip(&prev) {
                prop_assert!(*v >= *p && *v >= 0.0);
            }
            prev = s.v.clone();
            state = s;
            w = next;
        }
    }

    #[test]
    fn sgd_descends_on_a_quadratic(curv in 0.1f64..10.0, frac in 0.05f64..0.95, w0 in -10.0f64..10.0) {
        prop_assume!(w0.abs() > 1e-6);
        let lr = frac * 2.0 / curv;
        let mut opt = Optimizer::new(OptimizerConfig::new(OptimizerKind::Sgd, lr));
        let mut w = vec![w0];
        let f = |w: f64| 0.5 * curv * w * w;
        for _ in 0..20 {
            let before = f(w[0]);
            let g = vec![curv * w[0]];
            opt.step(&mut w, &g).unwrap();
            if before < 1e-280 {
                break;
            }
            prop_assert!(f(w[0]) < before);
        }
    }

    #[test]
    fn data_path_is_scale_equivariant(
        rows in prop::collection::vec(-3.0f64..3.0, 12 * 2),
        t in 0.0f64..=1.0,
        exp in -3i32..4,
    ) {
        let s = 2f64.powi(exp);
        let cfg = GfmConfig { n: 3, m: 11, ..GfmConfig::default() };
        let scaled: Vec<f64> = rows.iter().map(|v| v * s).collect();
        let a = Trajectory::new(&rows, 2).unwrap();
        let b = Trajectory::new(&scaled, 2).unwrap();
        let (pa, pb) = (path_point(&a, t, &cfg).unwrap(), path_point(&b, t, &cfg).unwrap());
        let (ta, tb) = (target_field(&a, t, &cfg).unwrap(), target_field(&b, t, &cfg).unwrap());
        for k in 0..2 {
            prop_assert_eq!(pa[k] * s, pb[k]);
            prop_assert_eq!(ta[k] * s, tb[k]);
        }
    }

    #[test]
    fn closed_form_optimum_minimizes_task_loss(seed in 0u64..1000, dw in prop::collection::vec(-1.0f64..1.0, 2)) {
        let task = sample_linreg_task(seed);
        let spec = linear_model();
        let w = closed_form_optimum(&task).unwrap();
        let best = f_source(&spec, &w, &task).unwrap();
        let other = f_source(&spec, &[w[0] + dw[0], w[1] + dw[1]], &task).unwrap();
        prop_assert!(best <= other + 1e-12);
    }

    #[test]
    fn dlinear_with_identity_projections_returns_last_step(prefix in prop::collection::vec(-5.0f64..5.0, 5 * 3)) {
        let model = BaselineModel::dlinear_identity(4, 3);
        let out = predict_baseline(&model, &prefix).unwrap();
        let last = &prefix[12..15];
        for (o, l) in out.iter().zip(last) {
            prop_assert!((o - l).abs() <= 1e-12 * l.abs().max(1.0));
        }
    }
}

#[test]
fn two_point_reduction_gives_a_constant_field() {
    let rows: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64 - 1.5).collect();
    let traj = Trajectory::new(&rows, 2).unwrap();
    let cfg = GfmConfig { n: 0, m: 9, ..GfmConfig::default() };
    let expected = [rows[18] - rows[0], rows[19] - rows[1]];
    for k in 1..100 {
        let t = k as f64 / 100.0;
        assert_eq!(target_field(&traj, t, &cfg).unwrap(), expected);
    }
}
