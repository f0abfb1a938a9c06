//! Closed-form and numerically optimized recovery thresholds.
//!
//! Every threshold is expressed on the normalized SNR scale
//! `gamma = beta * sqrt(binom(k, d) / (2 k ln p))` unless its name says beta.
//! Rates are finite-p proxies `ln q / ln p`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::combinatorics::ln_binom;
use crate::error::{Error, Result};
use crate::instance::rate;

fn check_unit_open(alpha: f64, name: &str) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} requires alpha_k in (0, 1), got {alpha}")))
    }
}

fn check_pkd(p: usize, k: usize, d: usize) -> Result<()> {
    if !(d >= 2 && k >= d && p >= k && p >= 3) {
        return Err(Error::Parameter(format!("need p >= k >= d >= 2 and p >= 3, got p={p} k={k} d={d}")));
    }
    Ok(())
}

/// Partial-recovery upper bound
/// `sqrt(1 + a_k - 2 a_{k-k'} + a_{k'}) + sqrt(a_k - a_{k-k'} + a_{k'})`.
pub fn gamma_ub_partial(alpha_k: f64, alpha_kprime: f64, alpha_k_minus_kprime: f64) -> Result<f64> {
    let first = 1.0 + alpha_k - 2.0 * alpha_k_minus_kprime + alpha_kprime;
    let second = alpha_k - alpha_k_minus_kprime + alpha_kprime;
    if first < 0.0 {
        return Err(Error::Domain(format!("first radicand 1 + a_k - 2 a_(k-k') + a_k' = {first} < 0")));
    }
    if second < 0.0 {
        return Err(Error::Domain(format!("second radicand a_k - a_(k-k') + a_k' = {second} < 0")));
    }
    Ok(first.sqrt() + second.sqrt())
}

/// Exact-recovery upper bound `sqrt(1 + 2 a_k) + sqrt(2 a_k)`.
pub fn gamma_ub_exact(alpha_k: f64) -> Result<f64> {
    gamma_ub_partial(alpha_k, alpha_k, 0.0)
}

/// Upper bound for recovering a constant fraction of the planted nodes.
pub fn gamma_ub_fraction(alpha_k: f64) -> Result<f64> {
    if alpha_k < 0.0 {
        return Err(Error::Domain(format!("alpha_k must be >= 0, got {alpha_k}")));
    }
    Ok(1.0 + alpha_k.sqrt())
}

/// Growth regime of the order `d` relative to `sqrt(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderRegime {
    /// `d` grows slower than `sqrt(k)`.
    BelowSqrtK,
    AtLeastSqrtK,
}

impl OrderRegime {
    /// Finite-p stand-in for the asymptotic split: `d^2 < k`.
    pub fn heuristic(k: usize, d: usize) -> Self {
        if d * d < k {
            OrderRegime::BelowSqrtK
        } else {
            OrderRegime::AtLeastSqrtK
        }
    }
}

/// Finite-p heuristic for "d grows with p": `d >= ln ln p`.
pub fn order_grows_heuristic(p: usize, d: usize) -> bool {
    d as f64 >= (p as f64).ln().ln()
}

/// Impossibility threshold from the maximum of weakly correlated Gaussians.
pub fn gamma_lb_g(alpha_k: f64, regime: OrderRegime) -> Result<f64> {
    check_unit_open(alpha_k, "gamma_lb_g")?;
    let base = (1.0 - alpha_k).sqrt();
    Ok(match regime {
        OrderRegime::BelowSqrtK => base,
        OrderRegime::AtLeastSqrtK => base / std::f64::consts::E.sqrt(),
    })
}

/// Impossibility threshold from Fano's inequality, `sqrt((1 - a_k) / 2)`.
pub fn gamma_lb_f(alpha_k: f64) -> Result<f64> {
    check_unit_open(alpha_k, "gamma_lb_f")?;
    Ok(((1.0 - alpha_k) / 2.0).sqrt())
}

/// AMP threshold `sqrt((p/k)^(d-1) / (2e d (d-1) ln p))`, evaluated in log space.
pub fn gamma_amp(p: usize, k: usize, d: usize) -> Result<f64> {
    check_pkd(p, k, d)?;
    let (pf, kf, df) = (p as f64, k as f64, d as f64);
    let ln = -(2.0f64.ln() + 1.0) + (df - 1.0) * (pf / kf).ln() - (df * (df - 1.0)).ln() - pf.ln().ln();
    Ok((0.5 * ln).exp())
}

/// Critical per-edge bias of the small-sparsity state evolution,
/// `sqrt(p^(2(d-1)) / (e (d-1) binom(p-1, d-1) k^(2(d-1))))`.
pub fn beta_amp(p: usize, k: usize, d: usize) -> Result<f64> {
    check_pkd(p, k, d)?;
    let (pf, kf, df) = (p as f64, k as f64, d as f64);
    let ln = 2.0 * (df - 1.0) * pf.ln()
        - 1.0
        - (df - 1.0).ln()
        - ln_binom(pf - 1.0, df - 1.0)
        - 2.0 * (df - 1.0) * kf.ln();
    Ok((0.5 * ln).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SosThreshold {
    pub value: f64,
    /// The bound is stated for `d >= 3` only.
    pub valid: bool,
}

/// Sum-of-squares algorithmic threshold
/// `sqrt(p^(d/2) binom(k, d) / (k^(d-1) * 2 sqrt(ln p)))`.
pub fn gamma_sos(p: usize, k: usize, d: usize) -> Result<SosThreshold> {
    check_pkd(p, k, d)?;
    let (pf, kf, df) = (p as f64, k as f64, d as f64);
    let ln = 0.5 * df * pf.ln() + ln_binom(kf, df) - (df - 1.0) * kf.ln() - 2.0f64.ln() - 0.5 * pf.ln().ln();
    Ok(SosThreshold { value: (0.5 * ln).exp(), valid: d >= 3 })
}

/// Weak-recovery MMSE threshold `sqrt(1 - a_k)`.
pub fn gamma_mmse(alpha_k: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha_k) {
        return Err(Error::Domain(format!("gamma_mmse requires alpha_k in [0, 1], got {alpha_k}")));
    }
    Ok((1.0 - alpha_k).sqrt())
}

/// Which asymptotic case of the earlier upper bound applies, classified on
/// `rho = binom(k, d) / (k ln p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "branch", content = "c", rename_all = "snake_case")]
pub enum PriorBranch {
    /// `rho -> 0`.
    Vanishing,
    /// `rho -> c` for a finite positive constant.
    Constant(f64),
    /// `rho` diverges with `a_k` in (0, 1).
    Diverging,
}

/// `rho` below this is treated as vanishing.
pub const PRIOR_RHO_VANISHING: f64 = 0.1;
/// `rho` above this is treated as diverging.
pub const PRIOR_RHO_DIVERGING: f64 = 10.0;

impl PriorBranch {
    pub fn classify(p: usize, k: usize, d: usize) -> Self {
        let rho = prior_rho(p, k, d);
        if rho < PRIOR_RHO_VANISHING {
            PriorBranch::Vanishing
        } else if rho <= PRIOR_RHO_DIVERGING {
            PriorBranch::Constant(rho)
        } else {
            PriorBranch::Diverging
        }
    }
}

fn prior_rho(p: usize, k: usize, d: usize) -> f64 {
    (ln_binom(k as f64, d as f64) - (k as f64).ln() - (p as f64).ln().ln()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriorBounds {
    pub lower: f64,
    pub upper: f64,
    pub branch: PriorBranch,
}

/// Earlier lower/upper bounds for the same model, with the branch picked by
/// [`PriorBranch::classify`].
pub fn gamma_prior_bounds(p: usize, k: usize, d: usize, alpha_k: f64) -> Result<PriorBounds> {
    gamma_prior_bounds_in(p, k, d, alpha_k, PriorBranch::classify(p, k, d))
}

pub fn gamma_prior_bounds_in(p: usize, k: usize, d: usize, alpha_k: f64, branch: PriorBranch) -> Result<PriorBounds> {
    check_pkd(p, k, d)?;
    let lower = (1.0 / d as f64).sqrt();
    let upper = match branch {
        PriorBranch::Vanishing => 2f64.sqrt(),
        PriorBranch::Constant(c) => 2.0 * (1.0 + c * (1.0 + 2f64.ln())).sqrt(),
        PriorBranch::Diverging => {
            check_unit_open(alpha_k, "diverging branch of the prior upper bound")?;
            let ln = prior_rho(p, k, d).ln() + (1.0 + 2f64.ln()).ln() - (1.0 - alpha_k).ln();
            2.0 * (0.5 * ln).exp()
        }
    };
    Ok(PriorBounds { lower, upper, branch })
}

/// Minimizes `f` on `[lo, hi]`: a uniform grid locates the best cell, then
/// golden-section search refines within the neighbouring cells.
pub(crate) fn grid_golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, grid: usize, tol: f64) -> (f64, f64) {
    let step = (hi - lo) / grid as f64;
    let mut best = (lo, f(lo));
    for i in 1..=grid {
        let x = lo + step * i as f64;
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    while (b - a).abs() > tol {
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = f(e);
        }
    }
    let x = 0.5 * (a + b);
    let v = f(x);
    if v < best.1 {
        (x, v)
    } else {
        best
    }
}

/// `ln(1 - t) + t` without cancellation for small `t`.
pub(crate) fn log1m_plus(t: f64) -> f64 {
    if t < 0.1 {
        // -sum_{n >= 2} t^n / n
        let mut term = t * t;
        let mut sum = 0.0;
        let mut n = 2.0;
        while term > 1e-18 * (t * t) {
            sum += term / n;
            term *= t;
            n += 1.0;
        }
        -sum
    } else {
        (-t).ln_1p() + t
    }
}

/// `f_lambda(t) = lambda^2 t^d + ln(1 - t) + t`.
pub fn detection_objective(lambda: f64, d: usize, t: f64) -> f64 {
    lambda * lambda * t.powi(d as i32) + log1m_plus(t)
}

/// Supremum of `f_lambda` over `t` in `(0, 1)`: log-spaced scan near zero and
/// a uniform scan, refined by golden section around the best point.
fn detection_sup(lambda: f64, d: usize) -> f64 {
    let neg = |t: f64| -detection_objective(lambda, d, t);
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..=240 {
        let t = 10f64.powf(-12.0 + 11.0 * i as f64 / 240.0);
        let v = detection_objective(lambda, d, t);
        if v > best.1 {
            best = (t, v);
        }
    }
    let (t, v) = grid_golden_min(neg, 1e-3, 1.0 - 1e-9, 2000, 1e-13);
    if -v > best.1 {
        best = (t, -v);
    }
    // refine a small-t maximizer on a log scale
    if best.0 < 1e-3 {
        let (lt, lv) = grid_golden_min(
            |u: f64| -detection_objective(lambda, d, u.exp()),
            (best.0 / 10.0).ln(),
            (best.0 * 10.0).min(1e-3).ln(),
            50,
            1e-12,
        );
        if -lv > best.1 {
            best = (lt.exp(), -lv);
        }
    }
    best.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionThresholds {
    /// `inf_{q in (0,1)} sqrt(-ln(1 - q^2) / q^d)`.
    pub beta_sq_d: f64,
    /// `sup { lambda >= 0 : sup_t f_lambda(t) <= 0 }`.
    pub lambda_c: f64,
}

/// Optimizer tolerance for the detection thresholds.
pub const DETECTION_TOL: f64 = 1e-8;

pub fn beta_sq_d(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::Parameter(format!("detection thresholds need d >= 2, got {d}")));
    }
    // minimize ln(-ln(1 - q^2)) - d ln q
    let obj = |q: f64| (-(-q * q).ln_1p()).ln() - d as f64 * q.ln();
    let (_, v) = grid_golden_min(obj, 1e-6, 1.0 - 1e-9, 20_000, DETECTION_TOL * 1e-3);
    Ok((0.5 * v).exp())
}

pub fn lambda_c(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::Parameter(format!("detection thresholds need d >= 2, got {d}")));
    }
    let admissible = |lambda: f64| detection_sup(lambda, d) <= 0.0;
    let mut hi = 1.0;
    while admissible(hi) {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Domain("lambda_c bracket did not close".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > DETECTION_TOL * 1e-2 {
        let mid = 0.5 * (lo + hi);
        if admissible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn detection_thresholds(d: usize) -> Result<DetectionThresholds> {
    Ok(DetectionThresholds { beta_sq_d: beta_sq_d(d)?, lambda_c: lambda_c(d)? })
}

/// SNR conventions used across the tensor-PCA literature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    /// `beta`, noise variance `1 / (p (d-1)!)`.
    Richard,
    /// `beta'`, noise variance `2 / (p d!)`.
    Montanari,
    /// `beta''`, noise variance `2 / (p d!)`.
    Perry,
    /// `tau`, unit noise.
    Hopkins,
    /// `lambda` with signal `lambda sqrt(p)`, unit noise.
    Jagannath,
    /// `lambda_p` with signal `sqrt(lambda_p)`, unit noise.
    Niles,
    /// The normalized `gamma` of this crate.
    Ours,
}

impl Scaling {
    pub const ALL: [Scaling; 7] = [
        Scaling::Richard,
        Scaling::Montanari,
        Scaling::Perry,
        Scaling::Hopkins,
        Scaling::Jagannath,
        Scaling::Niles,
        Scaling::Ours,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scaling::Richard => "richard",
            Scaling::Montanari => "montanari",
            Scaling::Perry => "perry",
            Scaling::Hopkins => "hopkins",
            Scaling::Jagannath => "jagannath",
            Scaling::Niles => "niles",
            Scaling::Ours => "ours",
        }
    }
}

impl fmt::Display for Scaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scaling::ALL
            .into_iter()
            .find(|sc| sc.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Parameter(format!("unknown snr scaling '{s}'")))
    }
}

/// `ln` of the factor turning a signal-to-noise ratio `mu / sigma` into `gamma`.
fn ln_ours_factor(p: usize, k: usize, d: usize) -> f64 {
    let (pf, kf, df) = (p as f64, k as f64, d as f64);
    0.5 * (ln_binom(kf, df) - (df + 1.0) * kf.ln() - 2f64.ln() - pf.ln().ln())
}

fn to_mu_over_sigma(value: f64, from: Scaling, p: usize, k: usize, d: usize) -> Result<f64> {
    let (pf, df) = (p as f64, d as f64);
    Ok(match from {
        Scaling::Richard => value * (0.5 * (pf.ln() + ln_gamma(df))).exp(),
        Scaling::Montanari | Scaling::Perry => value * (0.5 * (pf.ln() + ln_gamma(df + 1.0) - 2f64.ln())).exp(),
        Scaling::Hopkins => value,
        Scaling::Jagannath => value * pf.sqrt(),
        Scaling::Niles => {
            if value < 0.0 {
                return Err(Error::Domain(format!("lambda_p must be >= 0, got {value}")));
            }
            value.sqrt()
        }
        Scaling::Ours => value / ln_ours_factor(p, k, d).exp(),
    })
}

fn from_mu_over_sigma(ratio: f64, to: Scaling, p: usize, k: usize, d: usize) -> f64 {
    let (pf, df) = (p as f64, d as f64);
    match to {
        Scaling::Richard => ratio / (0.5 * (pf.ln() + ln_gamma(df))).exp(),
        Scaling::Montanari | Scaling::Perry => ratio / (0.5 * (pf.ln() + ln_gamma(df + 1.0) - 2f64.ln())).exp(),
        Scaling::Hopkins => ratio,
        Scaling::Jagannath => ratio / pf.sqrt(),
        Scaling::Niles => ratio * ratio,
        Scaling::Ours => ratio * ln_ours_factor(p, k, d).exp(),
    }
}

/// Converts an SNR value between literature conventions through the common
/// signal-to-noise ratio `mu / sigma` of a unit-vector spike.
pub fn snr_convert(value: f64, from: Scaling, to: Scaling, p: usize, k: usize, d: usize) -> Result<f64> {
    check_pkd(p, k, d)?;
    if from == to {
        return Ok(value);
    }
    Ok(from_mu_over_sigma(to_mu_over_sigma(value, from, p, k, d)?, to, p, k, d))
}

/// Optional overrides for [`ThresholdReport::compute`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ReportOptions {
    /// Partial-recovery target; defaults to `ceil(k / 2)`.
    pub kprime: Option<usize>,
    /// Replaces the finite-p rate `ln k / ln p`.
    pub alpha_k: Option<f64>,
    /// Replaces the `d^2 < k` regime heuristic.
    pub regime: Option<OrderRegime>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub p: usize,
    pub k: usize,
    pub d: usize,
    pub kprime: usize,
    pub alpha_k: f64,
    pub regime: OrderRegime,
    pub order_grows: bool,
    pub gamma_ub_exact: f64,
    pub gamma_ub_partial: f64,
    pub gamma_ub_fraction: f64,
    pub gamma_lb_g: f64,
    pub gamma_lb_f: f64,
    pub gamma_amp: f64,
    pub beta_amp: f64,
    pub gamma_sos: f64,
    pub sos_valid: bool,
    pub gamma_mmse: f64,
    pub gamma_prior_lb: f64,
    pub gamma_prior_ub: f64,
    pub prior_branch: PriorBranch,
    pub beta_sq_d: f64,
    pub lambda_c: f64,
    /// `gamma_lb_f <= gamma_lb_g <= gamma_ub_exact`.
    pub ordering_holds: bool,
}

/// One line of the printable report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub name: &'static str,
    pub value: f64,
    pub source: &'static str,
}

impl ThresholdReport {
    pub fn compute(p: usize, k: usize, d: usize, opts: ReportOptions) -> Result<Self> {
        check_pkd(p, k, d)?;
        if k >= p {
            return Err(Error::Parameter(format!("report needs k < p, got p={p} k={k}")));
        }
        let alpha_k = opts.alpha_k.unwrap_or_else(|| rate(k as f64, p as f64));
        let kprime = opts.kprime.unwrap_or(k.div_ceil(2));
        if kprime == 0 || kprime > k {
            return Err(Error::Parameter(format!("k' must lie in 1..={k}, got {kprime}")));
        }
        let alpha_kp = rate(kprime as f64, p as f64);
        let alpha_rest = rate((k - kprime).max(1) as f64, p as f64);
        let regime = opts.regime.unwrap_or_else(|| OrderRegime::heuristic(k, d));
        let gamma_ub_exact = gamma_ub_exact(alpha_k)?;
        let gamma_lb_g = gamma_lb_g(alpha_k, regime)?;
        let gamma_lb_f = gamma_lb_f(alpha_k)?;
        let sos = gamma_sos(p, k, d)?;
        let prior = gamma_prior_bounds(p, k, d, alpha_k)?;
        let detection = detection_thresholds(d)?;
        Ok(ThresholdReport {
            p,
            k,
            d,
            kprime,
            alpha_k,
            regime,
            order_grows: order_grows_heuristic(p, d),
            gamma_ub_exact,
            gamma_ub_partial: gamma_ub_partial(alpha_k, alpha_kp, alpha_rest)?,
            gamma_ub_fraction: gamma_ub_fraction(alpha_k)?,
            gamma_lb_g,
            gamma_lb_f,
            gamma_amp: gamma_amp(p, k, d)?,
            beta_amp: beta_amp(p, k, d)?,
            gamma_sos: sos.value,
            sos_valid: sos.valid,
            gamma_mmse: gamma_mmse(alpha_k)?,
            gamma_prior_lb: prior.lower,
            gamma_prior_ub: prior.upper,
            prior_branch: prior.branch,
            beta_sq_d: detection.beta_sq_d,
            lambda_c: detection.lambda_c,
            ordering_holds: gamma_lb_f <= gamma_lb_g && gamma_lb_g <= gamma_ub_exact,
        })
    }

    /// The thirteen named thresholds with the result each one comes from.
    pub fn rows(&self) -> Vec<ReportRow> {
        let row = |name, value, source| ReportRow { name, value, source };
        vec![
            row("gamma_ub_exact", self.gamma_ub_exact, "MLE exact recovery (upper bound)"),
            row("gamma_ub_partial", self.gamma_ub_partial, "MLE k'-partial recovery (upper bound)"),
            row("gamma_ub_fraction", self.gamma_ub_fraction, "MLE constant-fraction recovery (upper bound)"),
            row("gamma_lb_g", self.gamma_lb_g, "max of correlated Gaussians (lower bound)"),
            row("gamma_lb_f", self.gamma_lb_f, "generalized Fano inequality (lower bound)"),
            row("gamma_amp", self.gamma_amp, "AMP state-evolution threshold"),
            row("beta_amp", self.beta_amp, "AMP critical per-edge bias"),
            row("gamma_sos", self.gamma_sos, "sum-of-squares algorithm (d >= 3)"),
            row("gamma_mmse", self.gamma_mmse, "MMSE weak recovery"),
            row("gamma_prior_lb", self.gamma_prior_lb, "earlier lower bound"),
            row("gamma_prior_ub", self.gamma_prior_ub, "earlier upper bound"),
            row("beta_sq_d", self.beta_sq_d, "tensor-PCA detection (beta^2_d)"),
            row("lambda_c", self.lambda_c, "tensor-PCA detection (lambda_c)"),
        ]
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "p = {}, k = {}, d = {}, k' = {}, alpha_k = {:.6}, regime = {:?}, d growing = {}\n",
            self.p, self.k, self.d, self.kprime, self.alpha_k, self.regime, self.order_grows
        );
        out.push_str(&format!("{:<18} {:>16}  {}\n", "threshold", "value", "source"));
        for r in self.rows() {
            out.push_str(&format!("{:<18} {:>16.8}  {}\n", r.name, r.value, r.source));
        }
        out.push_str(&format!(
            "{:<18} {:>16}  gamma_lb_f <= gamma_lb_g <= gamma_ub_exact\n",
            "ordering",
            if self.ordering_holds { "ok" } else { "VIOLATED" }
        ));
        out
    }
}
