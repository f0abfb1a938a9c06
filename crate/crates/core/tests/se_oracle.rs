mod support;

use kdense::amp::ThresholdKind;
use kdense::combinatorics::ln_binom;
use kdense::quadrature::NormalQuadrature;
use kdense::rng::{stream, Purpose};
use kdense::se::{se_step_multidimensional, SeModel};
use kdense::Exec;
use rand::Rng;
use rand_distr::StandardNormal;
use support::oracle;

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

#[test]
fn factorized_step_matches_monte_carlo() {
    // delta = 0.05, beta picked so that m_hat(0.02) = 2
    let (p, k, d) = (100, 5, 3);
    let m: f64 = 0.02;
    let b = ln_binom(99.0, 2.0).exp();
    let beta = (2.0 / (b * m * m)).sqrt();
    let model = SeModel::new(p, k, d, beta).unwrap();
    let mh = model.m_hat(m);
    assert!((mh - 2.0).abs() < 1e-12);
    let got = model.step(m, &NormalQuadrature::new(61).unwrap());

    let delta = 0.05f64;
    let shift = (1.0 / delta - 1.0).ln();
    let mut rng = stream(21, 0, Purpose::Misc);
    let n = 1_000_000;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        let v = delta * sigmoid(mh / 2.0 + mh.sqrt() * z - shift);
        s += v;
        s2 += v * v;
    }
    let mean = s / n as f64;
    let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
    assert!((got - mean).abs() < 4.0 * se, "quadrature {got} vs MC {mean} +- {se}");
}

#[test]
fn factorized_step_quadrature_orders_agree() {
    let model = SeModel::new(1000, 20, 3, 0.05).unwrap();
    let lo = NormalQuadrature::new(31).unwrap();
    let hi = NormalQuadrature::new(201).unwrap();
    for m in [0.0, 1e-4, 1e-3, 5e-3, 0.01, 0.02] {
        assert!((model.step(m, &lo) - model.step(m, &hi)).abs() < 1e-10);
    }
}

#[test]
fn multidimensional_step_matches_exhaustive_support_average() {
    let (p, k, d) = (8, 3, 2);
    let beta = 0.6;
    let m: Vec<f64> = (0..p).map(|i| 0.05 + 0.04 * i as f64).collect();
    let b = (p - 1) as f64;
    let m_hat: Vec<f64> = m.iter().map(|&mi| beta * beta * b * mi).collect();

    // every support equally likely, z sampled per support
    let supports = oracle::subsets(p, k);
    let per = 2_000;
    let mut rng = stream(22, 0, Purpose::Misc);
    let mut sum = vec![0.0; p];
    let mut sum2 = vec![0.0; p];
    for s in &supports {
        let x: Vec<f64> = (0..p).map(|i| if s.contains(&i) { 1.0 } else { 0.0 }).collect();
        for _ in 0..per {
            let msg: Vec<f64> = (0..p).map(|i| m_hat[i] * x[i] + m_hat[i].sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
            let f = oracle::threshold(&m_hat, &msg, k, ThresholdKind::Vectorial);
            let total: f64 = (0..p).map(|j| x[j] * f[j]).sum();
            for i in 0..p {
                let v = (total - x[i] * f[i]) / b;
                sum[i] += v;
                sum2[i] += v * v;
            }
        }
    }
    let n = (supports.len() * per) as f64;
    let est = se_step_multidimensional(200_000, p, k, d, beta, &m, 23, Exec::Parallel).unwrap();
    for i in 0..p {
        let mean = sum[i] / n;
        let se = ((sum2[i] / n - mean * mean) / n).sqrt();
        let tol = 5.0 * (se * se + est.std_err[i] * est.std_err[i]).sqrt();
        assert!((est.mean[i] - mean).abs() < tol, "node {i}: {} vs {mean} (tol {tol})", est.mean[i]);
    }
}

#[test]
fn multidimensional_step_is_deterministic_across_exec() {
    let m = vec![0.1; 12];
    let a = se_step_multidimensional(5_000, 12, 4, 3, 0.3, &m, 5, Exec::Sequential).unwrap();
    let b = se_step_multidimensional(5_000, 12, 4, 3, 0.3, &m, 5, Exec::Parallel).unwrap();
    assert_eq!(a.mean, b.mean);
    assert_eq!(a.std_err, b.std_err);
}
