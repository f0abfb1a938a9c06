//! Coverage sets of weakly overlapping solutions and the correlation and
//! cardinality quantities built on them.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::combinatorics::{binom_checked, ln_binom, log_sum_exp, next_lex_combination};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Exec};
use crate::exact::check_enumeration;
use crate::instance::{rate, SignalVector};
use crate::rng::{stream, Purpose};

/// Solutions pairwise sharing fewer than `r` nodes, such that every other
/// solution shares at least `r` nodes with some member.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coverage {
    pub p: usize,
    pub k: usize,
    pub r: usize,
    pub members: Vec<SignalVector>,
}

impl Coverage {
    pub fn cardinality(&self) -> usize {
        self.members.len()
    }
}

fn check_small(p: usize, k: usize, r: usize) -> Result<()> {
    if r > k || k > p {
        return Err(Error::Parameter(format!("need 0 <= r <= k <= p, got p={p} k={k} r={r}")));
    }
    if p > 64 {
        return Err(Error::Capacity(format!("coverage construction supports p <= 64, got {p}")));
    }
    Ok(())
}

fn combo_mask(c: &[usize]) -> u64 {
    c.iter().fold(0u64, |m, &i| m | (1u64 << i))
}

/// Greedy construction: scan `C_{p,k}` lexicographically and admit each
/// solution that shares fewer than `r` nodes with every admitted member.
pub fn greedy_cover(p: usize, k: usize, r: usize, cap: u64) -> Result<Coverage> {
    check_small(p, k, r)?;
    check_enumeration(p, k, cap)?;
    let mut admitted: Vec<u64> = Vec::new();
    let mut members = Vec::new();
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        let mask = combo_mask(&combo);
        if admitted.iter().all(|&m| ((m & mask).count_ones() as usize) < r) {
            admitted.push(mask);
            members.push(SignalVector::from_members(p, combo.clone())?);
        }
        if !next_lex_combination(&mut combo, p) {
            break;
        }
    }
    Ok(Coverage { p, k, r, members })
}

/// Which coverage condition failed, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverViolation {
    /// Two members share at least `r` nodes.
    Packing,
    /// Some solution is not within overlap `r` of any member.
    Covering,
}

/// Exhaustively checks both coverage conditions.
pub fn verify_cover(cover: &Coverage, cap: u64) -> Result<Option<CoverViolation>> {
    verify_cover_with(cover, cap, Exec::default())
}

pub fn verify_cover_with(cover: &Coverage, cap: u64, exec: Exec) -> Result<Option<CoverViolation>> {
    let (p, k, r) = (cover.p, cover.k, cover.r);
    check_small(p, k, r)?;
    let total = check_enumeration(p, k, cap)?;
    let masks: Vec<u64> = cover.members.iter().map(|s| s.mask()).collect();
    for (a, &ma) in masks.iter().enumerate() {
        for &mb in &masks[a + 1..] {
            if (ma & mb).count_ones() as usize >= r {
                return Ok(Some(CoverViolation::Packing));
            }
        }
    }
    const CHUNK: u64 = 2048;
    let blocks = total.div_ceil(CHUNK) as usize;
    let uncovered = map_indexed(exec, blocks, |b| {
        let start = b as u64 * CHUNK;
        let end = (start + CHUNK).min(total);
        let mut combo = crate::combinatorics::lex_unrank(start, p, k);
        for _ in start..end {
            let mask = combo_mask(&combo);
            let in_cover = masks.contains(&mask);
            if !in_cover && !masks.iter().any(|&m| (m & mask).count_ones() as usize >= r) {
                return true;
            }
            next_lex_combination(&mut combo, p);
        }
        false
    });
    Ok(uncovered.into_iter().any(|u| u).then_some(CoverViolation::Covering))
}

/// `ln B(r)` with `B(r) = sum_{l=r}^{k} binom(k, l) binom(p - k, k - l)`, the
/// number of solutions sharing at least `r` nodes with a fixed one.
pub fn ln_b_of_r(p: usize, k: usize, r: usize) -> f64 {
    let terms: Vec<f64> = (r..=k)
        .map(|l| ln_binom(k as f64, l as f64) + ln_binom((p - k) as f64, (k - l) as f64))
        .collect();
    log_sum_exp(&terms)
}

/// Integer `B(r)`, or `None` on overflow.
pub fn b_of_r_exact(p: usize, k: usize, r: usize) -> Option<u128> {
    let mut total: u128 = 0;
    for l in r..=k {
        let a = binom_checked(k as u64, l as u64)? as u128;
        let b = binom_checked((p - k) as u64, (k - l) as u64)? as u128;
        total = total.checked_add(a.checked_mul(b)?)?;
    }
    Some(total)
}

/// `ceil(binom(p, k) / B(r))`, the guaranteed coverage size.
pub fn cover_lower_bound(p: usize, k: usize, r: usize) -> Option<u128> {
    let n = binom_checked(p as u64, k as u64)? as u128;
    let b = b_of_r_exact(p, k, r)?;
    Some(n.div_ceil(b))
}

/// Correlation `binom(r, d) / binom(k, d)` between the weights of two solutions
/// sharing `r` nodes.
pub fn correlation(k: usize, d: usize, r: usize) -> Result<f64> {
    if r > k || d > k {
        return Err(Error::Parameter(format!("need r <= k and d <= k, got k={k} d={d} r={r}")));
    }
    if r < d {
        return Ok(0.0);
    }
    Ok((ln_binom(r as f64, d as f64) - ln_binom(k as f64, d as f64)).exp())
}

/// Pearson correlation of `S(x')` and `S(x'')` over `samples` noise draws, for
/// two fixed solutions sharing exactly `r` nodes. Only the hyperedges inside
/// `x'` or `x''` influence either weight, so only those are sampled.
pub fn empirical_correlation(p: usize, k: usize, d: usize, r: usize, samples: u64, seed: u64) -> Result<f64> {
    if r > k || d > k || 2 * k - r > p {
        return Err(Error::Parameter(format!("cannot place two {k}-subsets sharing {r} nodes among {p}")));
    }
    if samples < 2 {
        return Err(Error::Parameter("need at least two samples".into()));
    }
    // x' = {0..k}, x'' = {k-r .. 2k-r}
    let union = 2 * k - r;
    let in_first = |i: usize| i < k;
    let in_second = |i: usize| i >= k - r && i < union;
    let mut edges: Vec<(bool, bool)> = Vec::new();
    let mut t: Vec<usize> = (0..d).collect();
    loop {
        let a = t.iter().all(|&i| in_first(i));
        let b = t.iter().all(|&i| in_second(i));
        if a || b {
            edges.push((a, b));
        }
        if !next_lex_combination(&mut t, union) {
            break;
        }
    }
    let mut rng = stream(seed, 0, Purpose::Correlation);
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..samples {
        let (mut wa, mut wb) = (0.0, 0.0);
        for &(a, b) in &edges {
            let z: f64 = rng.sample(StandardNormal);
            if a {
                wa += z;
            }
            if b {
                wb += z;
            }
        }
        sa += wa;
        sb += wb;
        saa += wa * wa;
        sbb += wb * wb;
        sab += wa * wb;
    }
    let n = samples as f64;
    let cov = sab / n - (sa / n) * (sb / n);
    let va = saa / n - (sa / n).powi(2);
    let vb = sbb / n - (sb / n).powi(2);
    Ok(cov / (va * vb).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageRate {
    /// `ln(binom(p, k) / B(r)) / ln p`.
    pub exact: f64,
    /// Large-p proxy `r (1 - alpha_k)`.
    pub asymptotic: f64,
}

pub fn coverage_rate_bound(p: usize, k: usize, r: usize) -> Result<CoverageRate> {
    if r > k || k > p || p < 2 {
        return Err(Error::Parameter(format!("need r <= k <= p, got p={p} k={k} r={r}")));
    }
    let ln_p = (p as f64).ln();
    let exact = ((ln_binom(p as f64, k as f64) - ln_b_of_r(p, k, r)) / ln_p).max(0.0);
    let asymptotic = r as f64 * (1.0 - rate(k as f64, p as f64));
    Ok(CoverageRate { exact, asymptotic })
}

/// Greedy cover summary row: `(r, cardinality, lower bound, exact rate)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverRow {
    pub r: usize,
    pub cardinality: usize,
    pub lower_bound: u128,
    pub rate: f64,
}

pub fn cover_table(p: usize, k: usize, cap: u64) -> Result<Vec<CoverRow>> {
    (0..=k)
        .map(|r| {
            let cover = greedy_cover(p, k, r, cap)?;
            Ok(CoverRow {
                r,
                cardinality: cover.cardinality(),
                lower_bound: cover_lower_bound(p, k, r)
                    .ok_or_else(|| Error::Capacity("cover bound overflows".into()))?,
                rate: coverage_rate_bound(p, k, r)?.exact,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn b_of_r_examples() {
        assert_eq!(b_of_r_exact(10, 3, 0), Some(120));
        assert_eq!(b_of_r_exact(10, 3, 3), Some(1));
        assert_eq!(b_of_r_exact(10, 3, 2), Some(22));
        assert!((ln_b_of_r(10, 3, 0) - 120f64.ln()).abs() < 1e-12);
        assert!(ln_b_of_r(10, 3, 3).abs() < 1e-12);
        assert!((ln_b_of_r(10, 3, 2) - 22f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn correlation_examples() {
        assert_eq!(correlation(10, 3, 2).unwrap(), 0.0);
        assert!((correlation(10, 3, 10).unwrap() - 1.0).abs() < 1e-12);
        assert!((correlation(10, 3, 5).unwrap() - 10.0 / 120.0).abs() < 1e-12);
        let mut last = 0.0;
        for r in 0..=10 {
            let c = correlation(10, 3, r).unwrap();
            assert!(c >= last);
            last = c;
        }
    }

    #[test]
    fn greedy_edge_cases() {
        let c0 = greedy_cover(6, 3, 0, 1000).unwrap();
        assert_eq!(c0.cardinality(), 1);
        let ck = greedy_cover(6, 3, 3, 1000).unwrap();
        assert_eq!(ck.cardinality(), 20);
        assert_eq!(verify_cover(&ck, 1000).unwrap(), None);
        let c = greedy_cover(8, 3, 2, 1000).unwrap();
        assert_eq!(verify_cover(&c, 1000).unwrap(), None);
        assert!(c.cardinality() as u128 >= cover_lower_bound(8, 3, 2).unwrap());
    }

    #[test]
    fn verify_detects_violations() {
        let s = |v: Vec<usize>| SignalVector::from_members(6, v).unwrap();
        let packed = Coverage { p: 6, k: 3, r: 2, members: vec![s(vec![0, 1, 2]), s(vec![0, 1, 3])] };
        assert_eq!(verify_cover(&packed, 1000).unwrap(), Some(CoverViolation::Packing));
        let sparse = Coverage { p: 6, k: 3, r: 2, members: vec![s(vec![0, 1, 2])] };
        assert_eq!(verify_cover(&sparse, 1000).unwrap(), Some(CoverViolation::Covering));
    }

    #[test]
    fn rate_bounds() {
        assert!(coverage_rate_bound(10, 3, 0).unwrap().exact.abs() < 1e-12);
        let full = coverage_rate_bound(10, 3, 3).unwrap().exact;
        assert!((full - 120f64.ln() / 10f64.ln()).abs() < 1e-12);
        let mut last = -1.0;
        for r in 0..=5 {
            let v = coverage_rate_bound(40, 5, r).unwrap().exact;
            assert!(v >= last - 1e-12);
            last = v;
        }
    }

    #[test]
    fn empirical_correlation_extremes() {
        assert!((empirical_correlation(20, 6, 3, 6, 2000, 1).unwrap() - 1.0).abs() < 1e-9);
        assert!(empirical_correlation(20, 6, 3, 2, 20_000, 2).unwrap().abs() < 0.02);
        assert!(empirical_correlation(8, 5, 3, 1, 100, 1).is_err());
    }
}
