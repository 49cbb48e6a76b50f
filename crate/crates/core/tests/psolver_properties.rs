use luva::netgen::{sample_layout, sample_weights, SystemParams, WeightDist};
use luva::psolver::{
    init_state, pd_step, run, run_with, viva_defaults, SolverMode, SolverOptions, StepSchedule,
    ABLATION_STEPS,
};
use luva::rates::{RateEval, ScalarizationFrame};
use luva::NetworkInstance;
use proptest::prelude::*;

fn instance(k: usize, seed: u64) -> (NetworkInstance, Vec<f64>) {
    let net = sample_layout(&SystemParams::default(), k, seed).unwrap();
    let w = sample_weights(k, WeightDist::Uniform01, seed + 10_000);
    (net, w)
}

fn std_dev(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

#[test]
fn normalized_steps_stay_feasible() {
    for seed in 0..20 {
        let (net, w) = instance(8, seed);
        let frame = ScalarizationFrame::new(&net, &w).unwrap();
        let mut s = init_state(&net, &frame);
        for k in 0..100 {
            let a = 0.05 * (1.0 + (k % 7) as f64);
            s = pd_step(&s, &frame, &net, [a, a, a], SolverMode::Normalized).unwrap();
            assert!(s.x.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(s.lambda >= 0.0);
        }
    }
}

#[test]
fn permuting_links_permutes_the_output() {
    for seed in 0..10 {
        let (net, w) = instance(6, seed);
        let perm = [3, 0, 5, 1, 4, 2];
        let pnet = net.permuted(&perm);
        let pw: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
        let sched = viva_defaults(30);
        let (x, _) = run(&net, &w, &sched, SolverMode::Normalized).unwrap();
        let (px, _) = run(&pnet, &pw, &sched, SolverMode::Normalized).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            let (a, b) = (px.as_slice()[new], x.as_slice()[old]);
            assert!((a - b).abs() <= 1e-12, "seed {seed} link {old}: {a} vs {b}");
        }
    }
}

#[test]
fn normalized_mode_oscillates_less_than_plain() {
    let (net, w) = instance(10, 5);
    let mut wins = 0;
    for &a in &ABLATION_STEPS {
        let sched = StepSchedule::constant(200, a);
        let tail_std = |mode| {
            let opts = SolverOptions {
                mode,
                ..Default::default()
            };
            let (_, trace) = run_with(&net, &w, &sched, &opts).unwrap();
            let series = trace.wsr_series();
            std_dev(&series[series.len() - 50..])
        };
        if tail_std(SolverMode::Normalized) <= tail_std(SolverMode::Plain) {
            wins += 1;
        }
    }
    assert!(
        wins >= 3,
        "normalized steadier in only {wins} of 4 settings"
    );
}

#[test]
fn update_direction_is_scale_invariant() {
    for seed in 0..20 {
        let (net, w) = instance(7, seed);
        let x: Vec<f64> = (0..7).map(|i| 0.1 + 0.12 * i as f64).collect();
        let eval = RateEval::new(&x, &net);
        let unit = |w: &[f64]| {
            let g = eval.jacobian_t_w(&net, w);
            let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            g.into_iter().map(|v| v / n).collect::<Vec<_>>()
        };
        let base = unit(&w);
        for c in [1e-3, 0.5, 7.0, 1e4] {
            let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
            for (a, b) in base.iter().zip(unit(&scaled)) {
                assert!(
                    (a - b).abs() <= 1e-10,
                    "seed {seed} c {c}: {:e}",
                    (a - b).abs()
                );
            }
        }
    }
}

proptest! {
    #[test]
    fn clamp_is_idempotent(v in proptest::collection::vec(-5.0f64..5.0, 1..20)) {
        let once: Vec<f64> = v.iter().map(|x| x.clamp(0.0, 1.0)).collect();
        let twice: Vec<f64> = once.iter().map(|x| x.clamp(0.0, 1.0)).collect();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn solver_output_in_box(seed in 0u64..10_000, k in 1usize..8, a in 1e-4f64..0.5) {
        let (net, w) = instance(k, seed);
        let (x, _) = run(&net, &w, &StepSchedule::constant(15, a), SolverMode::Normalized).unwrap();
        prop_assert!(x.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
