//! Approximate message passing for the planted sub-hypergraph.
//!
//! One iteration computes, for every node `i`,
//!
//! ```text
//! x_i = beta * sum_{T ∋ i} Y_T prod_{l in T\i} xhat_l
//!     - beta^2 (d-1) * sum_{T ∋ i} Y_T^2 sum_{j in T\i} sigma_j prod_{l in T\{i,j}} xhat_l xhat_prev_l
//! a_i = beta^2 * sum_{T ∋ i} Y_T^2 prod_{l in T\i} xhat_l^2
//! ```
//!
//! then applies a threshold function `f(a, x)` and its Jacobian diagonal.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::exec::{chunked_accumulate, map_indexed, Exec, TUPLE_CHUNK};
use crate::instance::{generate_instance, PlantedInstance, ProblemParams, SignalVector};
use crate::rng::{stream, Purpose};
use crate::tensor::{NodeVector, SymTensor, MAX_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdKind {
    /// Independent Bernoulli(k/p) prior per node.
    Bernoulli,
    /// Bernoulli form with a shared shift forcing `sum f = k`.
    Vectorial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    /// `xhat_i = delta (1 + 0.01 u_i)`, `u_i` uniform on `[-1, 1]`.
    #[serde(alias = "ui")]
    Uninformative,
    /// Planted indicator clipped to `[0.001, 0.999]`.
    #[serde(alias = "ii")]
    Informative,
}

/// What multiplies the squared-weight sums in the `a` message and the
/// Onsager term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SquareTerm {
    /// The observed `Y_T^2`.
    Observed,
    /// Its pure-noise expectation, `E[Y_T^2] = 1`.
    Expected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmpConfig {
    pub threshold: ThresholdKind,
    pub init: InitKind,
    pub square_term: SquareTerm,
    pub max_iter: usize,
    /// Stop once `max_i |xhat_t - xhat_{t-1}| < tol`.
    pub tol: f64,
    /// `xhat <- (1 - damping) f + damping xhat_old`.
    pub damping: f64,
    /// Accepted `|sum f - k|` in the vectorial threshold.
    pub lambda_tol: f64,
    pub exec: Exec,
}

impl Default for AmpConfig {
    fn default() -> Self {
        AmpConfig {
            threshold: ThresholdKind::Vectorial,
            init: InitKind::Uninformative,
            square_term: SquareTerm::Expected,
            max_iter: 200,
            tol: 1e-8,
            damping: 0.0,
            lambda_tol: 1e-10,
            exec: Exec::default(),
        }
    }
}

impl AmpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Parameter(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::Parameter("max_iter must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::Parameter(format!("damping must lie in [0, 1), got {}", self.damping)));
        }
        if !(self.lambda_tol > 0.0) {
            return Err(Error::Parameter(format!("lambda_tol must be > 0, got {}", self.lambda_tol)));
        }
        Ok(())
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `f_i = 1 / (1 + exp(-x_i + a_i/2 + ln(1/delta - 1)))`.
pub fn threshold_bernoulli(a: &[f64], x: &[f64], delta: f64) -> Result<NodeVector> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    check_len(a.len(), x.len())?;
    let shift = (1.0 / delta - 1.0).ln();
    Ok(a.iter().zip(x).map(|(&ai, &xi)| logistic(xi - 0.5 * ai - shift)).collect())
}

/// `f_i = 1 / (1 + exp(-x_i + a_i/2 + lambda))` with `lambda` chosen so that
/// `sum f = k`. Returns `(f, lambda)`.
pub fn threshold_vectorial(a: &[f64], x: &[f64], k: usize, tol: f64) -> Result<(NodeVector, f64)> {
    check_len(a.len(), x.len())?;
    let p = x.len();
    if k == 0 || k >= p {
        return Err(Error::Parameter(format!("vectorial threshold needs 0 < k < p, got k={k} p={p}")));
    }
    let z: Vec<f64> = x.iter().zip(a).map(|(&xi, &ai)| xi - 0.5 * ai).collect();
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite threshold input".into()));
    }
    let target = k as f64;
    // sum f is strictly decreasing in lambda; saturation brackets the root
    let zmin = z.iter().copied().fold(f64::INFINITY, f64::min);
    let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (zmin - 40.0, zmax + 40.0);
    let eval = |lambda: f64| {
        let (mut s, mut ds) = (0.0, 0.0);
        for &zi in &z {
            let f = logistic(zi - lambda);
            s += f;
            ds += f * (1.0 - f);
        }
        (s - target, ds)
    };
    let mut lambda = 0.5 * (lo + hi);
    for _ in 0..500 {
        let (h, dh) = eval(lambda);
        if h.abs() <= tol {
            break;
        }
        if h > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let newton = lambda + h / dh;
        lambda = if dh > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
    }
    let f: Vec<f64> = z.iter().map(|&zi| logistic(zi - lambda)).collect();
    Ok((f, lambda))
}

/// Diagonal of the Jacobian `d f_i / d x_i`.
pub fn jacobian_diag(f: &[f64], kind: ThresholdKind) -> Result<NodeVector> {
    let v: Vec<f64> = f.iter().map(|&fi| fi * (1.0 - fi)).collect();
    match kind {
        ThresholdKind::Bernoulli => Ok(v),
        ThresholdKind::Vectorial => {
            let total: f64 = v.iter().sum();
            if total <= 0.0 {
                return Err(Error::Degenerate("vectorial Jacobian with fully saturated f".into()));
            }
            Ok(v.iter().map(|&vi| vi * (1.0 - vi / total)).collect())
        }
    }
}

/// Messages and posterior means after one AMP update.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    pub xhat_cur: NodeVector,
    pub xhat_prev: NodeVector,
    pub x_msg: NodeVector,
    pub a_msg: NodeVector,
    pub sigma: NodeVector,
    pub iter: usize,
}

impl AmpState {
    /// Initial state per `config.init`; the vectorial threshold also rescales
    /// the start to `sum xhat = k`.
    pub fn initialize<R: Rng + ?Sized>(inst: &PlantedInstance, config: &AmpConfig, rng: &mut R) -> Result<Self> {
        let p = inst.params.p;
        let k = inst.params.k;
        let delta = inst.params.delta();
        let mut xhat: Vec<f64> = match config.init {
            InitKind::Uninformative => (0..p).map(|_| delta * (1.0 + 0.01 * rng.random_range(-1.0..=1.0))).collect(),
            InitKind::Informative => inst.signal.indicator().iter().map(|v| v.clamp(0.001, 0.999)).collect(),
        };
        if config.threshold == ThresholdKind::Vectorial {
            let scale = k as f64 / xhat.iter().sum::<f64>();
            xhat.iter_mut().for_each(|v| *v = (*v * scale).min(1.0));
        }
        Self::from_xhat(xhat, config.threshold)
    }

    /// State with `xhat_prev = xhat_cur = xhat`, zero messages and `sigma`
    /// from the Jacobian at `f = xhat`.
    pub fn from_xhat(xhat: NodeVector, kind: ThresholdKind) -> Result<Self> {
        let p = xhat.len();
        let sigma = jacobian_diag(&xhat, kind)?;
        Ok(AmpState { xhat_prev: xhat.clone(), xhat_cur: xhat, x_msg: vec![0.0; p], a_msg: vec![0.0; p], sigma, iter: 0 })
    }
}

/// The `(x, a)` messages for the given posterior means, in one tensor pass.
pub fn amp_messages(
    y: &SymTensor,
    beta: f64,
    xhat: &[f64],
    xhat_prev: &[f64],
    sigma: &[f64],
    square_term: SquareTerm,
    exec: Exec,
) -> Result<(NodeVector, NodeVector)> {
    let p = y.p();
    let d = y.order();
    check_len(p, xhat.len())?;
    check_len(p, xhat_prev.len())?;
    check_len(p, sigma.len())?;
    let acc = chunked_accumulate(exec, y.len() as u64, TUPLE_CHUNK, 3 * p, |s, e, acc| {
        // prefix/suffix products over the tuple; `(w, s)` pairs carry the
        // constant and first-order coefficient of prod (w_l + t sigma_l)
        let mut pre_x = [1.0f64; MAX_ORDER + 1];
        let mut pre_q = [1.0f64; MAX_ORDER + 1];
        let mut pre_o = [(1.0f64, 0.0f64); MAX_ORDER + 1];
        let (xs, rest) = acc.split_at_mut(p);
        let (qs, os) = rest.split_at_mut(p);
        y.for_each_in_range(s, e, |t, val| {
            for j in 0..d {
                let v = t[j];
                pre_x[j + 1] = pre_x[j] * xhat[v];
                pre_q[j + 1] = pre_q[j] * xhat[v] * xhat[v];
                let w = xhat[v] * xhat_prev[v];
                let (c0, c1) = pre_o[j];
                pre_o[j + 1] = (c0 * w, c1 * w + c0 * sigma[v]);
            }
            let val2 = match square_term {
                SquareTerm::Observed => val * val,
                SquareTerm::Expected => 1.0,
            };
            let (mut suf_x, mut suf_q, mut suf_o) = (1.0, 1.0, (1.0, 0.0));
            for j in (0..d).rev() {
                let v = t[j];
                xs[v] += val * pre_x[j] * suf_x;
                qs[v] += val2 * pre_q[j] * suf_q;
                let (a0, a1) = pre_o[j];
                os[v] += val2 * (a0 * suf_o.1 + a1 * suf_o.0);
                suf_x *= xhat[v];
                suf_q *= xhat[v] * xhat[v];
                let w = xhat[v] * xhat_prev[v];
                suf_o = (suf_o.0 * w, suf_o.1 * w + suf_o.0 * sigma[v]);
            }
        });
    });
    let b2 = beta * beta;
    let onsager = b2 * (d as f64 - 1.0);
    let x = (0..p).map(|i| beta * acc[i] - onsager * acc[2 * p + i]).collect();
    let a = (0..p).map(|i| b2 * acc[p + i]).collect();
    Ok((x, a))
}

fn apply_threshold(a: &[f64], x: &[f64], k: usize, p: usize, config: &AmpConfig) -> Result<NodeVector> {
    match config.threshold {
        ThresholdKind::Bernoulli => threshold_bernoulli(a, x, k as f64 / p as f64),
        ThresholdKind::Vectorial => threshold_vectorial(a, x, k, config.lambda_tol).map(|(f, _)| f),
    }
}

/// One AMP update.
pub fn amp_step(state: &AmpState, inst: &PlantedInstance, config: &AmpConfig) -> Result<AmpState> {
    let (p, k) = (inst.params.p, inst.params.k);
    let iteration = state.iter + 1;
    let (x, a) = amp_messages(&inst.observations, inst.beta, &state.xhat_cur, &state.xhat_prev, &state.sigma, config.square_term, config.exec)?;
    if x.iter().chain(&a).any(|v| !v.is_finite()) {
        return Err(Error::Divergence { iteration });
    }
    let f = apply_threshold(&a, &x, k, p, config)?;
    let sigma = match jacobian_diag(&f, config.threshold) {
        Ok(s) => s,
        // every v_i(1 - v_i/V) <= v_i vanishes in the saturated limit
        Err(Error::Degenerate(_)) => vec![0.0; p],
        Err(e) => return Err(e),
    };
    let xhat: Vec<f64> = if config.damping > 0.0 {
        f.iter().zip(&state.xhat_cur).map(|(n, o)| (1.0 - config.damping) * n + config.damping * o).collect()
    } else {
        f
    };
    if xhat.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { iteration });
    }
    Ok(AmpState { xhat_prev: state.xhat_cur.clone(), xhat_cur: xhat, x_msg: x, a_msg: a, sigma, iter: iteration })
}

/// Indicator of the `k` largest entries, ties broken by lower index.
pub fn top_k(xhat: &[f64], k: usize) -> Result<SignalVector> {
    let mut order: Vec<usize> = (0..xhat.len()).collect();
    order.sort_by(|&i, &j| xhat[j].total_cmp(&xhat[i]).then(i.cmp(&j)));
    order.truncate(k);
    SignalVector::from_members(xhat.len(), order)
}

#[derive(Debug, Clone)]
pub struct AmpRun {
    pub estimate: SignalVector,
    /// Normalized overlap `|top_k(xhat_t) ∩ planted| / k` after each iteration.
    pub trajectory: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest `|sum xhat - k|` seen over all iterations (vectorial runs).
    pub max_sum_deviation: f64,
    pub final_state: AmpState,
}

impl AmpRun {
    pub fn final_overlap(&self) -> f64 {
        self.trajectory.last().copied().unwrap_or(0.0)
    }
}

/// Iterates [`amp_step`] from [`AmpState::initialize`] until the posterior
/// means stop moving or `max_iter` is reached.
pub fn run_amp<R: Rng + ?Sized>(inst: &PlantedInstance, config: &AmpConfig, init_rng: &mut R) -> Result<AmpRun> {
    config.validate()?;
    let k = inst.params.k;
    let mut state = AmpState::initialize(inst, config, init_rng)?;
    let mut trajectory = Vec::with_capacity(config.max_iter);
    let sum_dev = |s: &AmpState| (s.xhat_cur.iter().sum::<f64>() - k as f64).abs();
    let mut max_sum_deviation = if config.threshold == ThresholdKind::Vectorial { sum_dev(&state) } else { 0.0 };
    let mut converged = false;
    while state.iter < config.max_iter {
        state = amp_step(&state, inst, config)?;
        let est = top_k(&state.xhat_cur, k)?;
        trajectory.push(est.overlap(&inst.signal)? as f64 / k as f64);
        if config.threshold == ThresholdKind::Vectorial {
            max_sum_deviation = max_sum_deviation.max(sum_dev(&state));
        }
        let change = state.xhat_cur.iter().zip(&state.xhat_prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change < config.tol {
            converged = true;
            break;
        }
    }
    Ok(AmpRun {
        estimate: top_k(&state.xhat_cur, k)?,
        iterations: state.iter,
        converged,
        max_sum_deviation,
        trajectory,
        final_state: state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmpTrial {
    pub trial: u64,
    pub iterations: usize,
    pub final_overlap: f64,
    pub converged: bool,
    pub max_sum_deviation: f64,
}

/// Generates instance `trial` of `params` and runs AMP on it with an
/// initialization stream keyed by the same trial.
pub fn amp_trial(params: &ProblemParams, trial: u64, config: &AmpConfig) -> Result<AmpTrial> {
    let inst = generate_instance(params, trial)?;
    let run = run_amp(&inst, config, &mut stream(params.seed, trial, Purpose::AmpInit))?;
    Ok(AmpTrial {
        trial,
        iterations: run.iterations,
        final_overlap: run.final_overlap(),
        converged: run.converged,
        max_sum_deviation: run.max_sum_deviation,
    })
}

/// Runs trials `0..trials`; results are in trial order for any `exec`.
pub fn amp_trials(params: &ProblemParams, trials: u64, config: &AmpConfig, exec: Exec) -> Result<Vec<AmpTrial>> {
    map_indexed(exec, trials as usize, |t| amp_trial(params, t as u64, config)).into_iter().collect()
}
