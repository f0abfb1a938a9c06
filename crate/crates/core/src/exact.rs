//! Brute-force maximum-likelihood recovery over every k-subset.

use serde::Serialize;

use crate::combinatorics::{binom, lex_unrank, next_lex_combination};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Exec};
use crate::instance::{generate_instance, PlantedInstance, ProblemParams, SignalVector};
use crate::tensor::TupleIndexer;

/// Default ceiling on `binom(p, k)` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

const SOLUTION_CHUNK: u64 = 4096;

pub fn check_enumeration(p: usize, k: usize, cap: u64) -> Result<u64> {
    if k > p {
        return Err(Error::Parameter(format!("k={k} exceeds p={p}")));
    }
    let n = binom(p as u64, k as u64)?;
    if n > cap {
        return Err(Error::Capacity(format!("binom({p}, {k}) = {n} solutions exceeds cap {cap}")));
    }
    Ok(n)
}

/// Lexicographic iterator over `C_{p,k}`.
#[derive(Debug, Clone)]
pub struct Solutions {
    p: usize,
    cur: Option<Vec<usize>>,
}

impl Iterator for Solutions {
    type Item = SignalVector;

    fn next(&mut self) -> Option<SignalVector> {
        let cur = self.cur.as_mut()?;
        let out = SignalVector::from_members(self.p, cur.clone()).expect("valid combination");
        if !next_lex_combination(cur, self.p) {
            self.cur = None;
        }
        Some(out)
    }
}

pub fn enumerate_solutions(p: usize, k: usize, cap: u64) -> Result<Solutions> {
    check_enumeration(p, k, cap)?;
    Ok(Solutions { p, cur: Some((0..k).collect()) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MleResult {
    pub argmax_signal: SignalVector,
    pub max_weight: f64,
    pub overlap_with_planted: usize,
    pub tie_count: u64,
}

#[derive(Debug, Clone)]
struct Best {
    weight: f64,
    members: Vec<usize>,
    ties: u64,
}

impl Best {
    /// Folds a later (lexicographically larger) candidate block into `self`.
    fn absorb(&mut self, other: Best) {
        if other.weight > self.weight {
            *self = other;
        } else if other.weight == self.weight {
            self.ties += other.ties;
        }
    }
}

/// Sum of the weights of the d-subsets of `members`.
fn set_weight(inst: &PlantedInstance, idx: &TupleIndexer, members: &[usize]) -> f64 {
    inst.observations.sum_within(members, idx)
}

/// Exhaustive maximum of `S(x)` over all k-subsets; ties resolve to the
/// lexicographically smallest maximizer.
pub fn mle_solve(inst: &PlantedInstance, cap: u64) -> Result<MleResult> {
    mle_solve_with(inst, cap, Exec::default())
}

pub fn mle_solve_with(inst: &PlantedInstance, cap: u64, exec: Exec) -> Result<MleResult> {
    let (p, k, d) = (inst.params.p, inst.params.k, inst.params.d);
    let total = check_enumeration(p, k, cap)?;
    let idx = TupleIndexer::new(p, d);
    let n_chunks = total.div_ceil(SOLUTION_CHUNK) as usize;
    let blocks = map_indexed(exec, n_chunks, |c| {
        let start = c as u64 * SOLUTION_CHUNK;
        let end = (start + SOLUTION_CHUNK).min(total);
        let mut combo = lex_unrank(start, p, k);
        let mut best = Best { weight: f64::NEG_INFINITY, members: combo.clone(), ties: 0 };
        for _ in start..end {
            let w = set_weight(inst, &idx, &combo);
            if w > best.weight {
                best = Best { weight: w, members: combo.clone(), ties: 1 };
            } else if w == best.weight {
                best.ties += 1;
            }
            next_lex_combination(&mut combo, p);
        }
        best
    });
    let mut iter = blocks.into_iter();
    let mut best = iter.next().expect("at least one solution");
    for block in iter {
        best.absorb(block);
    }
    let argmax_signal = SignalVector::from_members(p, best.members)?;
    let overlap_with_planted = argmax_signal.overlap(&inst.signal)?;
    Ok(MleResult { argmax_signal, max_weight: best.weight, overlap_with_planted, tie_count: best.ties })
}

/// Maximum of `S` over the solutions sharing exactly `m` nodes with the planted
/// signal, or `-inf` when that class is empty.
pub fn max_by_overlap_class(inst: &PlantedInstance, m: usize, cap: u64) -> Result<f64> {
    let (p, k, d) = (inst.params.p, inst.params.k, inst.params.d);
    if m > k {
        return Err(Error::Parameter(format!("overlap class {m} exceeds k={k}")));
    }
    check_enumeration(p, k, cap)?;
    let idx = TupleIndexer::new(p, d);
    let planted = inst.signal.indicator();
    let mut combo: Vec<usize> = (0..k).collect();
    let mut best = f64::NEG_INFINITY;
    loop {
        let shared = combo.iter().filter(|&&i| planted[i] == 1.0).count();
        if shared == m {
            best = best.max(set_weight(inst, &idx, &combo));
        }
        if !next_lex_combination(&mut combo, p) {
            break;
        }
    }
    Ok(best)
}

/// One Monte Carlo trial of the exhaustive estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MleTrial {
    pub trial: u64,
    pub overlap: usize,
    pub exact: bool,
    pub max_weight: f64,
    pub planted_weight: f64,
}

pub fn mle_trials(params: &ProblemParams, trials: u64, cap: u64, exec: Exec) -> Result<Vec<MleTrial>> {
    check_enumeration(params.p, params.k, cap)?;
    map_indexed(exec, trials as usize, |t| {
        let inst = generate_instance(params, t as u64)?;
        let res = mle_solve_with(&inst, cap, Exec::Sequential)?;
        Ok(MleTrial {
            trial: t as u64,
            overlap: res.overlap_with_planted,
            exact: res.overlap_with_planted == params.k,
            max_weight: res.max_weight,
            planted_weight: inst.planted_weight(),
        })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryStats {
    /// Fraction of trials with overlap at least `k'`.
    pub rate: f64,
    /// Fraction of trials recovering the planted set exactly.
    pub exact_rate: f64,
    pub trials: u64,
}

pub fn summarize(trials: &[MleTrial], kprime: usize) -> RecoveryStats {
    let n = trials.len().max(1) as f64;
    RecoveryStats {
        rate: trials.iter().filter(|t| t.overlap >= kprime).count() as f64 / n,
        exact_rate: trials.iter().filter(|t| t.exact).count() as f64 / n,
        trials: trials.len() as u64,
    }
}

/// Empirical probability that the exhaustive estimator shares at least `k'`
/// nodes with the planted set.
pub fn recovery_rate(params: &ProblemParams, trials: u64, kprime: usize, cap: u64) -> Result<RecoveryStats> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be >= 1".into()));
    }
    Ok(summarize(&mle_trials(params, trials, cap, Exec::default())?, kprime))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Snr;
    use std::collections::HashSet;

    #[test]
    fn solution_counts() {
        assert_eq!(enumerate_solutions(4, 2, 100).unwrap().count(), 6);
        assert_eq!(enumerate_solutions(5, 5, 100).unwrap().count(), 1);
        let all: Vec<_> = enumerate_solutions(12, 4, 1000).unwrap().collect();
        assert_eq!(all.len(), 495);
        assert!(all.iter().all(|s| s.k() == 4));
        assert_eq!(all.iter().collect::<HashSet<_>>().len(), 495);
        assert!(all.windows(2).all(|w| w[0].members() < w[1].members()));
        assert!(matches!(enumerate_solutions(30, 15, 1000), Err(Error::Capacity(_))));
    }

    #[test]
    fn zero_noise_recovers_planted() {
        let params = ProblemParams::new(9, 3, 2, Snr::Beta(1.0), 0).unwrap();
        let signal = SignalVector::from_members(9, vec![2, 5, 7]).unwrap();
        let inst = PlantedInstance::with_noise(params, signal.clone(), || 0.0).unwrap();
        let res = mle_solve(&inst, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(res.argmax_signal, signal);
        assert_eq!(res.overlap_with_planted, 3);
        assert_eq!(res.tie_count, 1);
        assert_eq!(res.max_weight, 3.0);
    }

    #[test]
    fn ties_pick_smallest_and_count() {
        let params = ProblemParams::new(6, 2, 2, Snr::Beta(0.0), 0).unwrap();
        let signal = SignalVector::from_members(6, vec![0, 1]).unwrap();
        let inst = PlantedInstance::with_noise(params, signal, || 0.0).unwrap();
        let res = mle_solve(&inst, 100).unwrap();
        assert_eq!(res.argmax_signal.members(), &[0, 1]);
        assert_eq!(res.tie_count, 15);
    }

    #[test]
    fn pure_noise_matches_independent_scan() {
        let params = ProblemParams::new(11, 4, 3, Snr::Beta(0.0), 8).unwrap();
        let inst = generate_instance(&params, 0).unwrap();
        let res = mle_solve(&inst, DEFAULT_ENUMERATION_CAP).unwrap();
        // second enumeration: brute-force inner products with indicators
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for s in enumerate_solutions(11, 4, 1000).unwrap() {
            let w = inst.observations.inner_with_power(&s.indicator()).unwrap();
            if w > best.0 {
                best = (w, s.members().to_vec());
            }
        }
        assert_eq!(res.argmax_signal.members(), best.1.as_slice());
        assert!((res.max_weight - best.0).abs() < 1e-12);
        assert_eq!(res.max_weight, inst.weight(&res.argmax_signal));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let params = ProblemParams::new(16, 5, 3, Snr::Gamma(0.5), 3).unwrap();
        let inst = generate_instance(&params, 1).unwrap();
        let a = mle_solve_with(&inst, DEFAULT_ENUMERATION_CAP, Exec::Sequential).unwrap();
        let b = mle_solve_with(&inst, DEFAULT_ENUMERATION_CAP, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn overlap_classes() {
        let params = ProblemParams::new(6, 3, 2, Snr::Gamma(1.0), 2).unwrap();
        let inst = generate_instance(&params, 0).unwrap();
        assert_eq!(max_by_overlap_class(&inst, 3, 100).unwrap(), inst.planted_weight());
        let mut filtered = f64::NEG_INFINITY;
        for s in enumerate_solutions(6, 3, 100).unwrap() {
            if s.overlap(&inst.signal).unwrap() == 2 {
                filtered = filtered.max(inst.weight(&s));
            }
        }
        assert_eq!(max_by_overlap_class(&inst, 2, 100).unwrap(), filtered);
        assert!(max_by_overlap_class(&inst, 4, 100).is_err());
        // p=5, k=3: any two 3-subsets share at least one node
        let small = ProblemParams::new(5, 3, 2, Snr::Gamma(1.0), 2).unwrap();
        let inst = generate_instance(&small, 0).unwrap();
        assert_eq!(max_by_overlap_class(&inst, 0, 100).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn overlap_partition_is_exhaustive() {
        for t in 0..5 {
            let params = ProblemParams::new(9, 3, 2, Snr::Gamma(1.5), 21).unwrap();
            let inst = generate_instance(&params, t).unwrap();
            let res = mle_solve(&inst, 1000).unwrap();
            let by_class = (0..=3).map(|m| max_by_overlap_class(&inst, m, 1000).unwrap()).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(by_class, res.max_weight);
        }
    }

    #[test]
    fn argmax_is_scale_invariant() {
        let params = ProblemParams::new(10, 3, 3, Snr::Gamma(1.0), 5).unwrap();
        let inst = generate_instance(&params, 0).unwrap();
        let mut scaled = inst.clone();
        scaled.observations.data_mut().iter_mut().for_each(|v| *v *= 3.7);
        let a = mle_solve(&inst, 1000).unwrap();
        let b = mle_solve(&scaled, 1000).unwrap();
        assert_eq!(a.argmax_signal, b.argmax_signal);
    }

    #[test]
    fn recovery_rate_zero_noise_hook_and_errors() {
        let params = ProblemParams::new(10, 3, 2, Snr::Gamma(1.0), 0).unwrap();
        assert!(recovery_rate(&params, 0, 1, 1000).is_err());
        let trials = vec![MleTrial { trial: 0, overlap: 3, exact: true, max_weight: 3.0, planted_weight: 3.0 }; 4];
        let stats = summarize(&trials, 3);
        assert_eq!((stats.rate, stats.exact_rate), (1.0, 1.0));
    }
}
