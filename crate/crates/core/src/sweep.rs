//! Grid sweeps aggregating AMP, state-evolution and exact-solver runs.
//!
//! Every `(grid point, variant, trial)` job is evaluated through one ordered
//! parallel map, so the result is identical for any thread count. All grid
//! points share the trial streams `0..trials` of the configured seed.

use serde::{Deserialize, Serialize};

use crate::amp::{amp_trial, AmpConfig, ThresholdKind};
use crate::error::{Error, Result};
use crate::exact::{mle_solve_with, DEFAULT_ENUMERATION_CAP};
use crate::exec::{map_indexed, Exec};
use crate::instance::{beta_to_gamma, gamma_to_beta, generate_instance, ProblemParams, Snr};
use crate::report::{SweepResult, SweepRow};
use crate::se::{phase_grid, transition_beta, SeInit, SeOptions};
use crate::stats::quantile;
use crate::thresholds::{beta_amp, gamma_amp};

/// Parses `lo:hi:n` into `n` evenly spaced values (a single value for `n = 1`).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Parameter(format!("grid must look like lo:hi:n, got '{spec}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    linspace(lo, hi, n)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Parameter("grid needs at least one point".into()));
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Parameter("grid bounds must be finite".into()));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

fn summarize(series: &str, params: Vec<(String, f64)>, values: &[f64], successes: usize, seed: u64) -> SweepRow {
    SweepRow {
        series: series.to_string(),
        params,
        median: quantile(values, 0.5),
        q25: quantile(values, 0.25),
        q75: quantile(values, 0.75),
        recovery_rate: successes as f64 / values.len() as f64,
        trials: values.len() as u64,
        seed,
    }
}

fn named(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
    pairs.iter().map(|(n, v)| (n.to_string(), *v)).collect()
}

/// Whether the grid values are `gamma` or `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SnrAxis {
    #[default]
    Gamma,
    Beta,
}

impl SnrAxis {
    fn snr(self, v: f64) -> Snr {
        match self {
            SnrAxis::Gamma => Snr::Gamma(v),
            SnrAxis::Beta => Snr::Beta(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpSweep {
    pub p: usize,
    pub d: usize,
    pub ks: Vec<usize>,
    pub grid: Vec<f64>,
    pub axis: SnrAxis,
    pub variants: Vec<ThresholdKind>,
    pub trials: u64,
    pub seed: u64,
    pub config: AmpConfig,
}

fn variant_name(kind: ThresholdKind) -> &'static str {
    match kind {
        ThresholdKind::Bernoulli => "bernoulli",
        ThresholdKind::Vectorial => "vectorial",
    }
}

/// Median normalized AMP overlap per `(k, variant, snr)`; `recovery_rate` is
/// the fraction of trials ending on the planted set.
pub fn sweep_amp(spec: &AmpSweep, exec: Exec) -> Result<SweepResult> {
    if spec.grid.is_empty() || spec.ks.is_empty() || spec.variants.is_empty() {
        return Err(Error::Parameter("amp sweep needs nonempty k, snr and variant lists".into()));
    }
    if spec.trials == 0 {
        return Err(Error::Parameter("trials must be >= 1".into()));
    }
    spec.config.validate()?;
    let mut points = Vec::new();
    for &k in &spec.ks {
        for &variant in &spec.variants {
            for &v in &spec.grid {
                points.push((ProblemParams::new(spec.p, k, spec.d, spec.axis.snr(v), spec.seed)?, variant));
            }
        }
    }
    let per = spec.trials as usize;
    let inner = AmpConfig { exec: Exec::Sequential, ..spec.config };
    let jobs = map_indexed(exec, points.len() * per, |j| {
        let (params, variant) = &points[j / per];
        amp_trial(params, (j % per) as u64, &AmpConfig { threshold: *variant, ..inner })
    });
    let outcomes: Vec<_> = jobs.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(points.len());
    for (i, (params, variant)) in points.iter().enumerate() {
        let overlaps: Vec<f64> = outcomes[i * per..(i + 1) * per].iter().map(|t| t.final_overlap).collect();
        let exact = overlaps.iter().filter(|&&o| o == 1.0).count();
        rows.push(summarize(
            variant_name(*variant),
            named(&[
                ("p", params.p as f64),
                ("k", params.k as f64),
                ("d", params.d as f64),
                ("beta", params.beta()?),
                ("gamma", params.gamma()?),
                ("gamma_amp", gamma_amp(params.p, params.k, params.d)?),
            ]),
            &overlaps,
            exact,
            spec.seed,
        ));
    }
    Ok(SweepResult { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BetaScale {
    /// Grid values are `beta` itself.
    #[default]
    Absolute,
    /// Grid values multiply `beta_amp(p, k, d)`.
    BetaAmp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeSweep {
    pub p: usize,
    pub ds: Vec<usize>,
    pub ks: Vec<usize>,
    pub betas: Vec<f64>,
    pub scale: BetaScale,
    pub inits: Vec<SeInit>,
    pub options: SeOptions,
}

/// Normalized fixed point per `(d, k, beta, init)`; `recovery_rate` is 1 when
/// the fixed point reaches 1/2.
pub fn sweep_se(spec: &SeSweep, exec: Exec) -> Result<SweepResult> {
    if spec.betas.is_empty() || spec.ks.is_empty() || spec.ds.is_empty() {
        return Err(Error::Parameter("se sweep needs nonempty d, k and beta lists".into()));
    }
    let mut grid = Vec::new();
    for &d in &spec.ds {
        for &k in &spec.ks {
            let unit = match spec.scale {
                BetaScale::Absolute => 1.0,
                BetaScale::BetaAmp => beta_amp(spec.p, k, d)?,
            };
            grid.extend(spec.betas.iter().map(|&b| (spec.p, k, d, b * unit)));
        }
    }
    let points = phase_grid(&grid, &spec.inits, spec.options, exec)?;
    points
        .iter()
        .map(|pt| {
            let m = pt.m_star_normalized;
            Ok(SweepRow {
                series: pt.init.name().to_string(),
                params: named(&[
                    ("p", pt.p as f64),
                    ("k", pt.k as f64),
                    ("d", pt.d as f64),
                    ("beta", pt.beta),
                    ("gamma", pt.gamma),
                    ("beta_amp", beta_amp(pt.p, pt.k, pt.d)?),
                    ("gamma_amp", pt.gamma_amp),
                    ("iterations", pt.iterations as f64),
                    ("converged", if pt.converged { 1.0 } else { 0.0 }),
                ]),
                median: m,
                q25: m,
                q75: m,
                recovery_rate: if m >= 0.5 { 1.0 } else { 0.0 },
                trials: 1,
                seed: 0,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(|rows| SweepResult { rows })
}

/// UI and II transition `beta` (normalized fixed point >= 1/2) next to the
/// analytic `beta_amp`, per `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionRow {
    pub p: usize,
    pub k: usize,
    pub d: usize,
    pub beta_ui: Option<f64>,
    pub beta_ii: Option<f64>,
    pub beta_amp: f64,
}

pub fn se_transitions(p: usize, d: usize, ks: &[usize], options: SeOptions, exec: Exec) -> Result<Vec<TransitionRow>> {
    map_indexed(exec, ks.len(), |i| {
        let k = ks[i];
        let b = beta_amp(p, k, d)?;
        Ok(TransitionRow {
            p,
            k,
            d,
            beta_ui: transition_beta(p, k, d, SeInit::Ui, 0.5, 20.0 * b, options)?,
            beta_ii: transition_beta(p, k, d, SeInit::Ii, 0.5, 20.0 * b, options)?,
            beta_amp: b,
        })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleSweep {
    pub p: usize,
    pub k: usize,
    pub d: usize,
    pub grid: Vec<f64>,
    pub axis: SnrAxis,
    pub trials: u64,
    /// Success means overlap >= kprime.
    pub kprime: usize,
    pub seed: u64,
    pub cap: u64,
}

impl MleSweep {
    pub fn new(p: usize, k: usize, d: usize, grid: Vec<f64>, trials: u64, seed: u64) -> Self {
        MleSweep { p, k, d, grid, axis: SnrAxis::Gamma, trials, kprime: k, seed, cap: DEFAULT_ENUMERATION_CAP }
    }
}

/// Exact-MLE recovery rate over an SNR grid.
pub fn mle_mc(spec: &MleSweep, exec: Exec) -> Result<SweepResult> {
    if spec.grid.is_empty() {
        return Err(Error::Parameter("mle sweep needs a nonempty snr grid".into()));
    }
    if spec.kprime == 0 || spec.kprime > spec.k {
        return Err(Error::Parameter(format!("k' must lie in 1..={}, got {}", spec.k, spec.kprime)));
    }
    crate::exact::check_enumeration(spec.p, spec.k, spec.cap)?;
    let params: Vec<ProblemParams> =
        spec.grid.iter().map(|&v| ProblemParams::new(spec.p, spec.k, spec.d, spec.axis.snr(v), spec.seed)).collect::<Result<_>>()?;
    let per = spec.trials as usize;
    let overlaps: Vec<f64> = map_indexed(exec, params.len() * per, |j| {
        let inst = generate_instance(&params[j / per], (j % per) as u64)?;
        Ok(mle_solve_with(&inst, spec.cap, Exec::Sequential)?.overlap_with_planted as f64)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, pr) in params.iter().enumerate() {
        let raw = &overlaps[i * per..(i + 1) * per];
        let ok = raw.iter().filter(|&&o| o >= spec.kprime as f64).count();
        let norm: Vec<f64> = raw.iter().map(|o| o / spec.k as f64).collect();
        rows.push(summarize(
            "mle",
            named(&[
                ("p", pr.p as f64),
                ("k", pr.k as f64),
                ("d", pr.d as f64),
                ("beta", pr.beta()?),
                ("gamma", pr.gamma()?),
                ("kprime", spec.kprime as f64),
            ]),
            &norm,
            ok,
            spec.seed,
        ));
    }
    Ok(SweepResult { rows })
}

/// `gamma` for a `beta` grid value or the reverse, for axis labelling.
pub fn convert_axis(v: f64, from: SnrAxis, p: usize, k: usize, d: usize) -> Result<(f64, f64)> {
    match from {
        SnrAxis::Gamma => Ok((gamma_to_beta(v, p, k, d)?, v)),
        SnrAxis::Beta => Ok((v, beta_to_gamma(v, p, k, d)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("2:5:1").unwrap(), vec![2.0]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn amp_sweep_shape_and_errors() {
        let spec = AmpSweep {
            p: 30,
            d: 3,
            ks: vec![4],
            grid: vec![1.0, 3.0],
            axis: SnrAxis::Gamma,
            variants: vec![ThresholdKind::Vectorial, ThresholdKind::Bernoulli],
            trials: 4,
            seed: 5,
            config: AmpConfig::default(),
        };
        let r = sweep_amp(&spec, Exec::Parallel).unwrap();
        assert_eq!(r.rows.len(), 4);
        r.validate().unwrap();
        assert_eq!(r, sweep_amp(&spec, Exec::Sequential).unwrap());
        let empty = AmpSweep { grid: vec![], ..spec };
        assert!(sweep_amp(&empty, Exec::Parallel).is_err());
    }

    #[test]
    fn mle_single_point() {
        let spec = MleSweep::new(8, 3, 2, vec![2.0], 5, 1);
        let r = mle_mc(&spec, Exec::Parallel).unwrap();
        assert_eq!(r.rows.len(), 1);
        r.validate().unwrap();
    }

    #[test]
    fn se_sweep_relative_scale() {
        let spec = SeSweep {
            p: 1000,
            ds: vec![3],
            ks: vec![20],
            betas: vec![0.3, 3.0],
            scale: BetaScale::BetaAmp,
            inits: vec![SeInit::Ui, SeInit::Ii],
            options: SeOptions::default(),
        };
        let r = sweep_se(&spec, Exec::Parallel).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.rows[0].recovery_rate, 0.0);
        assert_eq!(r.rows[2].recovery_rate, 1.0);
    }
}
