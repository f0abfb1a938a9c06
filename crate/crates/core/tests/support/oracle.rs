//! Slow reference implementations used as independent oracles.
//!
//! Everything here is written as plain nested loops over explicit index sets,
//! sharing nothing with the library beyond reading tensor entries.

#![allow(dead_code)]

use kdense::amp::{AmpState, SquareTerm, ThresholdKind};
use kdense::SymTensor;

/// All increasing `d`-subsets of `0..p`.
pub fn subsets(p: usize, d: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, p: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..p {
            cur.push(i);
            go(i + 1, p, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, p, d, &mut Vec::new(), &mut out);
    out
}

/// The `(x, a)` messages by literal summation over every hyperedge containing
/// each node and every second node in that hyperedge.
pub fn messages(
    y: &SymTensor,
    beta: f64,
    xhat: &[f64],
    xhat_prev: &[f64],
    sigma: &[f64],
    square_term: SquareTerm,
) -> (Vec<f64>, Vec<f64>) {
    let (p, d) = (y.p(), y.order());
    let tuples = subsets(p, d);
    let mut x = vec![0.0; p];
    let mut a = vec![0.0; p];
    for i in 0..p {
        let (mut lin, mut quad, mut ons) = (0.0, 0.0, 0.0);
        for t in tuples.iter().filter(|t| t.contains(&i)) {
            let yt = y.get(t).unwrap();
            let y2 = match square_term {
                SquareTerm::Observed => yt * yt,
                SquareTerm::Expected => 1.0,
            };
            let others: Vec<usize> = t.iter().copied().filter(|&l| l != i).collect();
            lin += yt * others.iter().map(|&l| xhat[l]).product::<f64>();
            quad += y2 * others.iter().map(|&l| xhat[l] * xhat[l]).product::<f64>();
            for &j in &others {
                let rest: f64 = others.iter().filter(|&&l| l != j).map(|&l| xhat[l] * xhat_prev[l]).product();
                ons += y2 * sigma[j] * rest;
            }
        }
        x[i] = beta * lin - beta * beta * (d as f64 - 1.0) * ons;
        a[i] = beta * beta * quad;
    }
    (x, a)
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Threshold by plain bisection on the shift.
pub fn threshold(a: &[f64], x: &[f64], k: usize, kind: ThresholdKind) -> Vec<f64> {
    let p = x.len();
    let f_at = |lambda: f64| -> Vec<f64> { (0..p).map(|i| sigmoid(x[i] - a[i] / 2.0 - lambda)).collect() };
    match kind {
        ThresholdKind::Bernoulli => {
            let delta = k as f64 / p as f64;
            f_at((1.0 / delta - 1.0).ln())
        }
        ThresholdKind::Vectorial => {
            let (mut lo, mut hi) = (-1e4, 1e4);
            for _ in 0..400 {
                let mid = 0.5 * (lo + hi);
                if f_at(mid).iter().sum::<f64>() > k as f64 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            f_at(0.5 * (lo + hi))
        }
    }
}

/// `d f_i / d x_i` by central differences, re-solving the shift each time.
pub fn jacobian_fd(a: &[f64], x: &[f64], k: usize, kind: ThresholdKind, h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += h;
            dn[i] -= h;
            (threshold(a, &up, k, kind)[i] - threshold(a, &dn, k, kind)[i]) / (2.0 * h)
        })
        .collect()
}

/// Jacobian diagonal written out from the definitions.
pub fn jacobian(f: &[f64], kind: ThresholdKind) -> Vec<f64> {
    let v: Vec<f64> = f.iter().map(|&fi| fi * (1.0 - fi)).collect();
    let total: f64 = v.iter().sum();
    match kind {
        ThresholdKind::Bernoulli => v,
        ThresholdKind::Vectorial => v.iter().map(|&vi| vi - vi * vi / total).collect(),
    }
}

/// A full AMP update built from the pieces above.
pub fn step(
    state: &AmpState,
    y: &SymTensor,
    beta: f64,
    k: usize,
    kind: ThresholdKind,
    square_term: SquareTerm,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let (x, a) = messages(y, beta, &state.xhat_cur, &state.xhat_prev, &state.sigma, square_term);
    let f = threshold(&a, &x, k, kind);
    let s = jacobian(&f, kind);
    (x, a, f, s)
}

/// Matrix form of the `d = 2` messages: `x = beta W xhat - beta^2 (W∘W) sigma ∘ ...`.
pub fn matrix_messages(
    y: &SymTensor,
    beta: f64,
    xhat: &[f64],
    sigma: &[f64],
    square_term: SquareTerm,
) -> (Vec<f64>, Vec<f64>) {
    let p = y.p();
    let mut w = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            if i != j {
                w[i][j] = y.get(&[i.min(j), i.max(j)]).unwrap();
            }
        }
    }
    let w2 = |i: usize, j: usize| match square_term {
        SquareTerm::Observed => w[i][j] * w[i][j],
        SquareTerm::Expected if i != j => 1.0,
        SquareTerm::Expected => 0.0,
    };
    let x = (0..p)
        .map(|i| {
            let mv: f64 = (0..p).map(|j| w[i][j] * xhat[j]).sum();
            let ons: f64 = (0..p).map(|j| w2(i, j) * sigma[j]).sum();
            beta * mv - beta * beta * ons
        })
        .collect();
    let a = (0..p).map(|i| beta * beta * (0..p).map(|j| w2(i, j) * xhat[j] * xhat[j]).sum::<f64>()).collect();
    (x, a)
}
