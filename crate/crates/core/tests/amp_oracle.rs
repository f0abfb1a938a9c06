mod support;

use kdense::amp::{amp_step, jacobian_diag, threshold_bernoulli, threshold_vectorial, AmpConfig, AmpState, SquareTerm, ThresholdKind};
use kdense::instance::{generate_instance, ProblemParams, Snr};
use kdense::rng::{stream, Purpose};
use kdense::Exec;
use rand::Rng;
use support::oracle;

const KINDS: [ThresholdKind; 2] = [ThresholdKind::Bernoulli, ThresholdKind::Vectorial];
const SQUARES: [SquareTerm; 2] = [SquareTerm::Expected, SquareTerm::Observed];

fn random_state<R: Rng>(p: usize, rng: &mut R) -> AmpState {
    let mut v = |lo: f64, hi: f64| -> Vec<f64> { (0..p).map(|_| rng.random_range(lo..hi)).collect() };
    AmpState {
        xhat_cur: v(0.02, 0.98),
        xhat_prev: v(0.02, 0.98),
        sigma: v(0.0, 0.25),
        x_msg: vec![0.0; p],
        a_msg: vec![0.0; p],
        iter: 3,
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn amp_step_matches_nested_loop_update() {
    let mut rng = stream(11, 0, Purpose::Misc);
    let mut worst: f64 = 0.0;
    for (p, d) in [(6, 2), (6, 3), (8, 2), (8, 3)] {
        let params = ProblemParams::new(p, 3, d, Snr::Gamma(1.5), 7).unwrap();
        let inst = generate_instance(&params, 0).unwrap();
        for kind in KINDS {
            for square_term in SQUARES {
                for exec in [Exec::Sequential, Exec::Parallel] {
                    let config = AmpConfig { threshold: kind, square_term, lambda_tol: 1e-13, exec, ..AmpConfig::default() };
                    for _ in 0..50 {
                        let state = random_state(p, &mut rng);
                        let next = amp_step(&state, &inst, &config).unwrap();
                        let (x, a, f, s) = oracle::step(&state, &inst.observations, inst.beta, 3, kind, square_term);
                        for (got, want) in [(&next.x_msg, &x), (&next.a_msg, &a), (&next.xhat_cur, &f), (&next.sigma, &s)] {
                            worst = worst.max(max_abs_diff(got, want));
                        }
                        assert_eq!(next.xhat_prev, state.xhat_cur);
                        assert_eq!(next.iter, 4);
                    }
                }
            }
        }
    }
    assert!(worst < 1e-10, "largest deviation from nested-loop update: {worst:e}");
}

#[test]
fn order_two_messages_match_matrix_form() {
    let mut rng = stream(12, 0, Purpose::Misc);
    let params = ProblemParams::new(20, 4, 2, Snr::Gamma(2.0), 3).unwrap();
    let inst = generate_instance(&params, 1).unwrap();
    for square_term in SQUARES {
        for _ in 0..20 {
            let state = random_state(20, &mut rng);
            // the prev-iterate product is empty when d = 2
            let (x, a) = kdense::amp::amp_messages(
                &inst.observations,
                inst.beta,
                &state.xhat_cur,
                &state.xhat_prev,
                &state.sigma,
                square_term,
                Exec::Sequential,
            )
            .unwrap();
            let (mx, ma) = oracle::matrix_messages(&inst.observations, inst.beta, &state.xhat_cur, &state.sigma, square_term);
            assert!(max_abs_diff(&x, &mx) < 1e-10);
            assert!(max_abs_diff(&a, &ma) < 1e-10);
        }
    }
}

#[test]
fn jacobian_matches_central_differences() {
    let mut rng = stream(13, 0, Purpose::Misc);
    let (p, k) = (10, 3);
    for kind in KINDS {
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let x: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
            let a: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..4.0)).collect();
            let f = match kind {
                ThresholdKind::Bernoulli => threshold_bernoulli(&a, &x, k as f64 / p as f64).unwrap(),
                ThresholdKind::Vectorial => threshold_vectorial(&a, &x, k, 1e-13).unwrap().0,
            };
            let analytic = jacobian_diag(&f, kind).unwrap();
            let fd = oracle::jacobian_fd(&a, &x, k, kind, 1e-5);
            for (an, num) in analytic.iter().zip(&fd) {
                worst = worst.max((an - num).abs() / num.abs().max(1e-8));
            }
        }
        assert!(worst < 1e-4, "{kind:?}: relative Jacobian error {worst:e}");
    }
}

#[test]
fn vectorial_threshold_hits_target_sum() {
    let mut rng = stream(14, 0, Purpose::Misc);
    for _ in 0..200 {
        let p = rng.random_range(5..40);
        let k = rng.random_range(1..p);
        let x: Vec<f64> = (0..p).map(|_| rng.random_range(-50.0..50.0)).collect();
        let a: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..20.0)).collect();
        let (f, _) = threshold_vectorial(&a, &x, k, 1e-10).unwrap();
        assert!((f.iter().sum::<f64>() - k as f64).abs() < 1e-6);
        assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
