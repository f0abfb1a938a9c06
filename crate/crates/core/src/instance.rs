//! Planted instances under the Gaussian observation model and SNR bookkeeping.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binom, ln_binom};
use crate::error::{check_len, Error, Result};
use crate::rng::{stream, Purpose};
use crate::tensor::{SymTensor, TupleIndexer};

/// Default ceiling on tensor entries an instance may allocate (2 GiB of f64).
pub const DEFAULT_MAX_ENTRIES: u64 = 1 << 28;

/// Signal strength, either as the per-edge bias or the scale-normalized value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Snr {
    Beta(f64),
    Gamma(f64),
}

impl Snr {
    pub fn value(self) -> f64 {
        match self {
            Snr::Beta(v) | Snr::Gamma(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub p: usize,
    pub k: usize,
    pub d: usize,
    pub snr: Snr,
    pub seed: u64,
}

impl ProblemParams {
    pub fn new(p: usize, k: usize, d: usize, snr: Snr, seed: u64) -> Result<Self> {
        let params = ProblemParams { p, k, d, snr, seed };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let ProblemParams { p, k, d, snr, .. } = *self;
        if !(2 <= d && d <= k && k <= p) {
            return Err(Error::Parameter(format!("need 2 <= d <= k <= p, got p={p} k={k} d={d}")));
        }
        let v = snr.value();
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Parameter(format!("snr must be finite and nonnegative, got {v}")));
        }
        Ok(())
    }

    /// Per-edge bias, converting from the normalized value when needed.
    pub fn beta(&self) -> Result<f64> {
        match self.snr {
            Snr::Beta(b) => Ok(b),
            Snr::Gamma(g) => gamma_to_beta(g, self.p, self.k, self.d),
        }
    }

    pub fn gamma(&self) -> Result<f64> {
        match self.snr {
            Snr::Gamma(g) => Ok(g),
            Snr::Beta(b) => beta_to_gamma(b, self.p, self.k, self.d),
        }
    }

    /// Sparsity `k / p`.
    pub fn delta(&self) -> f64 {
        self.k as f64 / self.p as f64
    }

    pub fn alpha_k(&self) -> f64 {
        rate(self.k as f64, self.p as f64)
    }

    pub fn with_snr(mut self, snr: Snr) -> Self {
        self.snr = snr;
        self
    }
}

/// `sqrt(binom(k, d) / (2 k ln p))`, the factor with `gamma = beta * factor`.
fn snr_scale(p: usize, k: usize, d: usize) -> Result<f64> {
    if p < 3 {
        return Err(Error::Parameter(format!("normalized snr needs p >= 3, got {p}")));
    }
    if d > k || k == 0 {
        return Err(Error::Parameter(format!("need 1 <= d <= k, got k={k} d={d}")));
    }
    let ln = ln_binom(k as f64, d as f64) - (k as f64).ln() - 2f64.ln() - (p as f64).ln().ln();
    Ok((0.5 * ln).exp())
}

pub fn beta_to_gamma(beta: f64, p: usize, k: usize, d: usize) -> Result<f64> {
    Ok(beta * snr_scale(p, k, d)?)
}

pub fn gamma_to_beta(gamma: f64, p: usize, k: usize, d: usize) -> Result<f64> {
    Ok(gamma / snr_scale(p, k, d)?)
}

/// Finite-p rate `ln q / ln p`.
pub fn rate(q: f64, p: f64) -> f64 {
    q.ln() / p.ln()
}

/// A member of `C_{p,k}`: the sorted node set of a k-subset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignalVector {
    p: usize,
    members: Vec<usize>,
}

impl SignalVector {
    pub fn from_members(p: usize, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parameter("repeated node in signal".into()));
        }
        if members.last().is_some_and(|&m| m >= p) {
            return Err(Error::InvalidIndex(format!("node index >= {p}")));
        }
        Ok(SignalVector { p, members })
    }

    pub fn from_indicator(x: &[f64]) -> Result<Self> {
        let mut members = Vec::new();
        for (i, &v) in x.iter().enumerate() {
            if v == 1.0 {
                members.push(i);
            } else if v != 0.0 {
                return Err(Error::Parameter(format!("entry {i} is {v}, expected 0 or 1")));
            }
        }
        Ok(SignalVector { p: x.len(), members })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn indicator(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.p];
        for &i in &self.members {
            x[i] = 1.0;
        }
        x
    }

    /// Number of shared nodes.
    pub fn overlap(&self, other: &SignalVector) -> Result<usize> {
        check_len(self.p, other.p)?;
        let (mut i, mut j, mut shared) = (0, 0, 0);
        let (a, b) = (&self.members, &other.members);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    shared += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(shared)
    }

    /// Bitmask form; only valid for `p <= 64`.
    pub(crate) fn mask(&self) -> u64 {
        self.members.iter().fold(0u64, |m, &i| m | (1u64 << i))
    }
}

pub fn overlap(a: &SignalVector, b: &SignalVector) -> Result<usize> {
    a.overlap(b)
}

/// Uniform k-subset of the `p` nodes.
pub fn sample_signal<R: Rng + ?Sized>(params: &ProblemParams, rng: &mut R) -> Result<SignalVector> {
    params.validate()?;
    let members = sample(rng, params.p, params.k).into_vec();
    SignalVector::from_members(params.p, members)
}

/// Errors unless `binom(p, d)` fits within `max_entries`.
pub fn check_capacity(p: usize, d: usize, max_entries: u64) -> Result<u64> {
    let n = binom(p as u64, d as u64)?;
    if n > max_entries {
        return Err(Error::Capacity(format!("binom({p}, {d}) = {n} entries exceeds budget {max_entries}")));
    }
    Ok(n)
}

#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub params: ProblemParams,
    pub beta: f64,
    pub signal: SignalVector,
    pub observations: SymTensor,
}

impl PlantedInstance {
    /// Builds `Y = beta * 1[t inside signal] + noise()` with noise drawn in colex order.
    pub fn with_noise(
        params: ProblemParams,
        signal: SignalVector,
        mut noise: impl FnMut() -> f64,
    ) -> Result<Self> {
        params.validate()?;
        check_len(params.p, signal.p())?;
        if signal.k() != params.k {
            return Err(Error::Parameter(format!("signal has {} members, expected {}", signal.k(), params.k)));
        }
        let beta = params.beta()?;
        let inside = signal.indicator();
        let observations = SymTensor::from_fn(params.p, params.d, |t| {
            let planted = t.iter().all(|&i| inside[i] == 1.0);
            (if planted { beta } else { 0.0 }) + noise()
        })?;
        Ok(PlantedInstance { params, beta, signal, observations })
    }

    /// `S(x)`: total weight of the hyperedges inside `x`.
    pub fn weight(&self, x: &SignalVector) -> f64 {
        let idx = TupleIndexer::new(self.params.p, self.params.d);
        self.observations.sum_within(x.members(), &idx)
    }

    pub fn planted_weight(&self) -> f64 {
        self.weight(&self.signal)
    }
}

/// Draws the planted instance for one trial: the signal and the noise come from
/// separate streams keyed by `(params.seed, trial)`.
pub fn generate_instance(params: &ProblemParams, trial: u64) -> Result<PlantedInstance> {
    generate_instance_capped(params, trial, DEFAULT_MAX_ENTRIES)
}

pub fn generate_instance_capped(params: &ProblemParams, trial: u64, max_entries: u64) -> Result<PlantedInstance> {
    params.validate()?;
    check_capacity(params.p, params.d, max_entries)?;
    let signal = sample_signal(params, &mut stream(params.seed, trial, Purpose::Signal))?;
    let mut noise_rng = stream(params.seed, trial, Purpose::Noise);
    PlantedInstance::with_noise(*params, signal, || noise_rng.sample(StandardNormal))
}
