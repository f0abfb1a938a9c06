//! State evolution: scalar predictions of the AMP overlap.
//!
//! With `B = binom(p-1, d-1)` and per-coordinate overlap `m` in `[0, delta]`,
//! the effective SNR fed to the threshold is `m_hat = beta^2 B m^(d-1)`, and
//!
//! ```text
//! m_{t+1} = delta * E_z[ f(m_hat, m_hat + sqrt(m_hat) z) ]
//! ```
//!
//! for the Bernoulli threshold `f`. For small `delta` this becomes
//! `m_{t+1} = delta^2 exp(m_hat)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::amp::{logistic, threshold_vectorial};
use crate::combinatorics::ln_binom;
use crate::error::{check_len, Error, Result};
use crate::exec::{map_indexed, Exec};
use crate::instance::beta_to_gamma;
use crate::quadrature::NormalQuadrature;
use crate::rng::{stream, Purpose};
use crate::thresholds::gamma_amp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeState {
    pub m: f64,
    pub m_hat: f64,
    /// `m / delta`.
    pub normalized: f64,
    pub iter: usize,
}

/// Model constants shared by the scalar maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeModel {
    pub delta: f64,
    pub d: usize,
    /// `beta^2 binom(p-1, d-1)`.
    pub coupling: f64,
}

impl SeModel {
    pub fn new(p: usize, k: usize, d: usize, beta: f64) -> Result<Self> {
        if !(d >= 2 && k >= 1 && k < p) {
            return Err(Error::Parameter(format!("need 1 <= k < p and d >= 2, got p={p} k={k} d={d}")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Parameter(format!("beta must be finite and >= 0, got {beta}")));
        }
        let coupling = beta * beta * ln_binom(p as f64 - 1.0, d as f64 - 1.0).exp();
        Ok(SeModel { delta: k as f64 / p as f64, d, coupling })
    }

    pub fn m_hat(&self, m: f64) -> f64 {
        self.coupling * m.max(0.0).powi(self.d as i32 - 1)
    }

    fn state(&self, m: f64, iter: usize) -> SeState {
        SeState { m, m_hat: self.m_hat(m), normalized: m / self.delta, iter }
    }

    /// `delta * E_z[f(m_hat, m_hat + sqrt(m_hat) z)]`, clipped to `[0, delta]`.
    pub fn step(&self, m: f64, quad: &NormalQuadrature) -> f64 {
        let mh = self.m_hat(m);
        let shift = (1.0 / self.delta - 1.0).ln();
        let root = mh.sqrt();
        let e = quad.expect_scaled(|z| logistic(0.5 * mh + root * z - shift), root);
        (self.delta * e).clamp(0.0, self.delta)
    }
}

/// One step of the factorized state evolution.
pub fn se_step_factorized(state: &SeState, p: usize, k: usize, d: usize, beta: f64, order: usize) -> Result<SeState> {
    let model = SeModel::new(p, k, d, beta)?;
    let quad = NormalQuadrature::new(order)?;
    if !(0.0..=model.delta).contains(&state.m) {
        return Err(Error::Domain(format!("m must lie in [0, delta = {}], got {}", model.delta, state.m)));
    }
    Ok(model.state(model.step(state.m, &quad), state.iter + 1))
}

/// `delta^2 exp(m_hat)`, uncapped.
pub fn se_step_small_delta(m: f64, p: usize, k: usize, d: usize, beta: f64) -> Result<f64> {
    let model = SeModel::new(p, k, d, beta)?;
    Ok(model.delta * model.delta * model.m_hat(m).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeInit {
    /// `m_0 = 0`.
    Ui,
    /// `m_0 = delta` (normalized overlap 1).
    Ii,
}

impl SeInit {
    pub fn name(self) -> &'static str {
        match self {
            SeInit::Ui => "ui",
            SeInit::Ii => "ii",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint {
    pub m_star: f64,
    pub normalized: f64,
    pub iterations: usize,
    /// False when `max_iter` ran out; `m_star` is then the mean of the last
    /// two iterates.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub order: usize,
}

impl Default for SeOptions {
    fn default() -> Self {
        SeOptions { tol: 1e-10, max_iter: 10_000, order: crate::quadrature::DEFAULT_ORDER }
    }
}

/// Iterates the factorized map until `|m_{t+1} - m_t| < tol * delta`.
pub fn se_fixed_point(p: usize, k: usize, d: usize, beta: f64, init: SeInit, opts: SeOptions) -> Result<FixedPoint> {
    let model = SeModel::new(p, k, d, beta)?;
    let quad = NormalQuadrature::new(opts.order)?;
    Ok(fixed_point_with(&model, &quad, init, opts))
}

fn fixed_point_with(model: &SeModel, quad: &NormalQuadrature, init: SeInit, opts: SeOptions) -> FixedPoint {
    let mut prev = match init {
        SeInit::Ui => 0.0,
        SeInit::Ii => model.delta,
    };
    let mut m = prev;
    for it in 1..=opts.max_iter {
        m = model.step(prev, quad);
        if (m - prev).abs() < opts.tol * model.delta {
            return FixedPoint { m_star: m, normalized: m / model.delta, iterations: it, converged: true };
        }
        prev = m;
    }
    let next = model.step(m, quad);
    let avg = 0.5 * (m + next);
    FixedPoint { m_star: avg, normalized: avg / model.delta, iterations: opts.max_iter, converged: false }
}

/// Smallest `beta` whose fixed point from `init` reaches normalized overlap
/// `level`, located by bisection on `[0, beta_hi]`. `None` if even `beta_hi`
/// stays below the level.
pub fn transition_beta(
    p: usize,
    k: usize,
    d: usize,
    init: SeInit,
    level: f64,
    beta_hi: f64,
    opts: SeOptions,
) -> Result<Option<f64>> {
    let quad = NormalQuadrature::new(opts.order)?;
    let reaches = |beta: f64| -> Result<bool> {
        let model = SeModel::new(p, k, d, beta)?;
        Ok(fixed_point_with(&model, &quad, init, opts).normalized >= level)
    };
    if !reaches(beta_hi)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, beta_hi);
    while hi - lo > 1e-6 * beta_hi {
        let mid = 0.5 * (lo + hi);
        if reaches(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// One point of a state-evolution phase diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub p: usize,
    pub k: usize,
    pub d: usize,
    pub beta: f64,
    pub gamma: f64,
    pub init: SeInit,
    pub m_star_normalized: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gamma_amp: f64,
}

/// Fixed points over every `(p, k, d, beta)` in `grid` and every init kind, in
/// grid order with inits innermost.
pub fn phase_grid(grid: &[(usize, usize, usize, f64)], inits: &[SeInit], opts: SeOptions, exec: Exec) -> Result<Vec<PhasePoint>> {
    if grid.is_empty() || inits.is_empty() {
        return Err(Error::Parameter("phase grid needs at least one point and one init kind".into()));
    }
    let quad = NormalQuadrature::new(opts.order)?;
    let n = grid.len() * inits.len();
    map_indexed(exec, n, |idx| {
        let (p, k, d, beta) = grid[idx / inits.len()];
        let init = inits[idx % inits.len()];
        let model = SeModel::new(p, k, d, beta)?;
        let fp = fixed_point_with(&model, &quad, init, opts);
        Ok(PhasePoint {
            p,
            k,
            d,
            beta,
            gamma: beta_to_gamma(beta, p, k, d)?,
            init,
            m_star_normalized: fp.normalized,
            iterations: fp.iterations,
            converged: fp.converged,
            gamma_amp: gamma_amp(p, k, d)?,
        })
    })
    .into_iter()
    .collect()
}

/// Monte Carlo estimate of the multidimensional overlap update.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiSeEstimate {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    pub samples: usize,
}

impl MultiSeEstimate {
    /// Mean over components, used as the scalar summary.
    pub fn component_mean(&self) -> f64 {
        self.mean.iter().sum::<f64>() / self.mean.len() as f64
    }
}

/// Samples drawn per random stream in [`se_step_multidimensional`].
pub const MULTI_SE_CHUNK: usize = 1024;

/// `e_r(v without index skip)` for `r = d - 1`, over the support of `v`.
pub(crate) fn elementary_excluding(v: &[(usize, f64)], skip: Option<usize>, r: usize) -> f64 {
    let mut e = vec![0.0; r + 1];
    e[0] = 1.0;
    for &(idx, val) in v {
        if Some(idx) == skip {
            continue;
        }
        for j in (1..=r).rev() {
            e[j] += val * e[j - 1];
        }
    }
    e[r]
}

/// The overlap map `m_i <- E[ sum_{T ∋ i} prod_{l in T\i} x_l xhat_l ] / B`
/// for `xhat = f_vect(m_hat, m_hat o x + sqrt(m_hat) o z)`, `m_hat = beta^2 B m`,
/// `x` uniform over `k`-subsets and `z` standard normal.
pub fn se_step_multidimensional(
    samples: usize,
    p: usize,
    k: usize,
    d: usize,
    beta: f64,
    m: &[f64],
    seed: u64,
    exec: Exec,
) -> Result<MultiSeEstimate> {
    if samples < 100 {
        return Err(Error::Parameter(format!("need at least 100 samples, got {samples}")));
    }
    check_len(p, m.len())?;
    let model = SeModel::new(p, k, d, beta)?;
    let b = ln_binom(p as f64 - 1.0, d as f64 - 1.0).exp();
    let m_hat: Vec<f64> = m.iter().map(|&mi| beta * beta * b * mi.max(0.0)).collect();
    let _ = model;
    let n_chunks = samples.div_ceil(MULTI_SE_CHUNK);
    let partials: Vec<Result<Vec<f64>>> = map_indexed(exec, n_chunks, |c| {
        let count = MULTI_SE_CHUNK.min(samples - c * MULTI_SE_CHUNK);
        let mut rng = stream(seed, c as u64, Purpose::StateEvolution);
        let mut acc = vec![0.0; 2 * p];
        let mut out = vec![0.0; p];
        for _ in 0..count {
            let members = rand::seq::index::sample(&mut rng, p, k).into_vec();
            let mut x = vec![0.0; p];
            for &i in &members {
                x[i] = 1.0;
            }
            let msg: Vec<f64> = (0..p)
                .map(|i| {
                    let z: f64 = rng.sample(StandardNormal);
                    m_hat[i] * x[i] + m_hat[i].sqrt() * z
                })
                .collect();
            let (f, _) = threshold_vectorial(&m_hat, &msg, k, 1e-12)?;
            let support: Vec<(usize, f64)> = members.iter().map(|&i| (i, f[i])).collect();
            overlap_contraction(&support, p, d, &mut out);
            for i in 0..p {
                acc[i] += out[i];
                acc[p + i] += out[i] * out[i];
            }
        }
        Ok(acc)
    });
    let mut sum = vec![0.0; 2 * p];
    for part in partials {
        for (s, v) in sum.iter_mut().zip(part?) {
            *s += v;
        }
    }
    let n = samples as f64;
    let mut mean = Vec::with_capacity(p);
    let mut std_err = Vec::with_capacity(p);
    for i in 0..p {
        let mu = sum[i] / n;
        let var = ((sum[p + i] / n - mu * mu) * n / (n - 1.0)).max(0.0);
        mean.push(mu / b);
        std_err.push((var / n).sqrt() / b);
    }
    Ok(MultiSeEstimate { mean, std_err, samples })
}

/// `out_i = e_{d-1}(v without i)` for a vector given by its support.
pub(crate) fn overlap_contraction(support: &[(usize, f64)], p: usize, d: usize, out: &mut [f64]) {
    let outside = elementary_excluding(support, None, d - 1);
    out[..p].iter_mut().for_each(|o| *o = outside);
    for &(i, _) in support {
        out[i] = elementary_excluding(support, Some(i), d - 1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thresholds::beta_amp;

    const ORDER: usize = 61;

    #[test]
    fn zero_snr_gives_delta_squared() {
        let s = SeState { m: 0.0, m_hat: 0.0, normalized: 0.0, iter: 0 };
        let next = se_step_factorized(&s, 100, 5, 3, 0.0, ORDER).unwrap();
        assert!((next.m - 0.0025).abs() < 1e-14);
        assert!((next.normalized - 0.05).abs() < 1e-12);
        assert_eq!(next.iter, 1);
    }

    #[test]
    fn saturation_reaches_delta() {
        let s = SeState { m: 0.05, m_hat: 0.0, normalized: 1.0, iter: 0 };
        let next = se_step_factorized(&s, 100, 5, 3, 50.0, ORDER).unwrap();
        assert!((next.normalized - 1.0).abs() < 1e-9);
    }

    #[test]
    fn order_and_domain_errors() {
        let s = SeState { m: 0.0, m_hat: 0.0, normalized: 0.0, iter: 0 };
        assert!(matches!(se_step_factorized(&s, 100, 5, 3, 1.0, 2), Err(Error::Parameter(_))));
        let bad = SeState { m: 0.5, ..s };
        assert!(se_step_factorized(&bad, 100, 5, 3, 1.0, ORDER).is_err());
    }

    #[test]
    fn trivial_fixed_point() {
        let fp = se_fixed_point(1000, 50, 3, 0.0, SeInit::Ui, SeOptions::default()).unwrap();
        assert!(fp.converged);
        assert!((fp.normalized - 0.05).abs() < 1e-9);
    }

    #[test]
    fn fixed_points_either_side_of_beta_amp() {
        let b = beta_amp(1000, 50, 3).unwrap();
        let above = se_fixed_point(1000, 50, 3, 3.0 * b, SeInit::Ui, SeOptions::default()).unwrap();
        assert!(above.normalized >= 0.9, "{above:?}");
        let below = se_fixed_point(1000, 50, 3, 0.3 * b, SeInit::Ui, SeOptions::default()).unwrap();
        assert!(below.normalized <= 0.1, "{below:?}");
    }

    #[test]
    fn small_delta_map() {
        assert!((se_step_small_delta(0.0, 1000, 1, 3, 2.0).unwrap() - 1e-6).abs() < 1e-20);
        // quadrature and closed form agree in the small-delta limit
        let (p, k, d) = (100_000usize, 100usize, 3usize);
        let quad = NormalQuadrature::new(ORDER).unwrap();
        for &target in &[0.1, 0.5, 1.0] {
            let delta = k as f64 / p as f64;
            let model = SeModel::new(p, k, d, 1.0).unwrap();
            let m = (target / model.coupling).sqrt();
            let beta = 1.0;
            let quad_val = model.step(m, &quad);
            let closed = se_step_small_delta(m, p, k, d, beta).unwrap();
            assert!(((quad_val - closed) / closed).abs() < 0.05, "m_hat {target}: {quad_val} vs {closed} (delta {delta})");
        }
    }

    #[test]
    fn monotone_in_m() {
        let model = SeModel::new(1000, 20, 3, 0.02).unwrap();
        let quad = NormalQuadrature::new(ORDER).unwrap();
        let mut last = -1.0;
        for i in 0..100 {
            let m = model.delta * i as f64 / 99.0;
            let v = model.step(m, &quad);
            assert!(v >= last);
            assert!((0.0..=model.delta).contains(&v));
            last = v;
        }
    }

    #[test]
    fn quadrature_orders_agree() {
        let q31 = NormalQuadrature::new(31).unwrap();
        let q61 = NormalQuadrature::new(61).unwrap();
        let model = SeModel::new(1000, 20, 3, 1.0).unwrap();
        for i in 0..=50 {
            let mh = i as f64;
            let m = (mh / model.coupling).sqrt();
            assert!((model.step(m, &q31) - model.step(m, &q61)).abs() < 1e-8);
        }
    }

    #[test]
    fn elementary_symmetric_oracle() {
        let v = [(0usize, 0.5), (2, 0.25), (3, 2.0)];
        let mut out = vec![0.0; 5];
        overlap_contraction(&v, 5, 3, &mut out);
        // e_2 of {0.5, 0.25, 2.0} = 0.125 + 1.0 + 0.5
        assert!((out[1] - 1.625).abs() < 1e-15);
        assert!((out[0] - 0.5).abs() < 1e-15);
        assert!((out[3] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn phase_grid_shape() {
        let rows = phase_grid(&[(1000, 20, 3, 0.01)], &[SeInit::Ui], SeOptions::default(), Exec::Sequential).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(phase_grid(&[], &[SeInit::Ui], SeOptions::default(), Exec::Sequential).is_err());
    }

    #[test]
    fn multidimensional_symmetric_at_zero_snr() {
        let (p, k, d) = (10usize, 3usize, 2usize);
        let est = se_step_multidimensional(20_000, p, k, d, 0.0, &vec![0.1; p], 3, Exec::Parallel).unwrap();
        // beta = 0: xhat = k/p everywhere, so E[sum_j x_j xhat_j 1(j != i)] / (p-1)
        let delta = k as f64 / p as f64;
        for i in 0..p {
            let expect = (k as f64 - delta) * delta / (p as f64 - 1.0);
            assert!((est.mean[i] - expect).abs() <= 3.0 * est.std_err[i] + 1e-12);
        }
        assert!(se_step_multidimensional(50, p, k, d, 0.0, &vec![0.1; p], 3, Exec::Parallel).is_err());
    }
}
