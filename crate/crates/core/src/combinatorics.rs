//! Exact and log-space binomial coefficients plus k-subset enumeration.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Exact `n choose r`, or `None` when the value overflows `u64`.
pub fn binom_checked(n: u64, r: u64) -> Option<u64> {
    if r > n {
        return Some(0);
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 1..=r as u128 {
        // acc * (n - r + i) / i stays integral at every step
        acc = acc * (n as u128 - r as u128 + i) / i;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Exact binomial that reports overflow as a capacity error.
pub fn binom(n: u64, r: u64) -> Result<u64> {
    binom_checked(n, r).ok_or_else(|| Error::Capacity(format!("binom({n}, {r}) overflows u64")))
}

/// Natural log of `n choose r` via log-gamma; `-inf` when `r > n`.
pub fn ln_binom(n: f64, r: f64) -> f64 {
    if r < 0.0 || r > n {
        return f64::NEG_INFINITY;
    }
    if r == 0.0 || r == n {
        return 0.0;
    }
    ln_gamma(n + 1.0) - ln_gamma(r + 1.0) - ln_gamma(n - r + 1.0)
}

/// Numerically stable `ln(sum(exp(terms)))`.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Lookup table of `binom(n, r)` for `n < rows`, `r <= cols`, used for tuple ranking.
#[derive(Debug, Clone)]
pub(crate) struct BinomTable {
    cols: usize,
    data: Vec<u64>,
}

impl BinomTable {
    pub(crate) fn new(rows: usize, cols: usize) -> Self {
        let width = cols + 1;
        let mut data = vec![0u64; rows * width];
        for n in 0..rows {
            data[n * width] = 1;
            for r in 1..=cols.min(n) {
                let above = if n > 0 { data[(n - 1) * width + r] } else { 0 };
                let diag = if n > 0 { data[(n - 1) * width + r - 1] } else { 0 };
                data[n * width + r] = above.saturating_add(diag);
            }
        }
        BinomTable { cols, data }
    }

    #[inline]
    pub(crate) fn get(&self, n: usize, r: usize) -> u64 {
        if r > self.cols {
            return 0;
        }
        let width = self.cols + 1;
        self.data.get(n * width + r).copied().unwrap_or(0)
    }
}

/// Advances `combo` (strictly increasing, values `< n`) to the next k-subset in
/// lexicographic order. Returns `false` after the last subset.
pub fn next_lex_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Lexicographic rank of a k-subset of `{0..n}`.
pub fn lex_rank(combo: &[usize], n: usize) -> u64 {
    let k = combo.len();
    let mut rank = 0u64;
    let mut start = 0usize;
    for (i, &c) in combo.iter().enumerate() {
        for j in start..c {
            rank += binom_checked((n - j - 1) as u64, (k - i - 1) as u64).unwrap_or(u64::MAX);
        }
        start = c + 1;
    }
    rank
}

/// Inverse of [`lex_rank`].
pub fn lex_unrank(mut rank: u64, n: usize, k: usize) -> Vec<usize> {
    let mut combo = Vec::with_capacity(k);
    let mut next = 0usize;
    for i in 0..k {
        let mut c = next;
        loop {
            let count = binom_checked((n - c - 1) as u64, (k - i - 1) as u64).unwrap_or(u64::MAX);
            if count <= rank {
                rank -= count;
                c += 1;
            } else {
                combo.push(c);
                next = c + 1;
                break;
            }
        }
    }
    combo
}
