//! Symmetric order-d tensors stored only on strictly increasing index tuples.
//!
//! Entries live in a flat array in colexicographic order. The rank of a tuple
//! `t` is `sum_j binom(t[j], j + 1)` (combinatorial number system), so tuples
//! over the first `q` nodes always occupy the first `binom(q, d)` slots.

use std::io::{Read, Write};

use crate::combinatorics::{binom, BinomTable};
use crate::error::{check_len, Error, Result};
use crate::exec::{chunked_accumulate, Exec, TUPLE_CHUNK};

/// Largest supported tensor order.
pub const MAX_ORDER: usize = 16;

const MAGIC: &[u8; 8] = b"KDSYMTNS";
const FORMAT_VERSION: u32 = 1;

/// Real vector indexed by node.
pub type NodeVector = Vec<f64>;

/// A strictly increasing tuple of node indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexTuple(Vec<usize>);

impl IndexTuple {
    /// Validates that `indices` is strictly increasing with every index `< p`.
    pub fn new(indices: Vec<usize>, p: usize) -> Result<Self> {
        validate_tuple(&indices, p)?;
        Ok(IndexTuple(indices))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

fn validate_tuple(indices: &[usize], p: usize) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::InvalidIndex("empty tuple".into()));
    }
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidIndex(format!("{indices:?} is not strictly increasing")));
    }
    if let Some(&last) = indices.last() {
        if last >= p {
            return Err(Error::InvalidIndex(format!("index {last} >= node count {p}")));
        }
    }
    Ok(())
}

/// Colex rank of a strictly increasing tuple over `p` nodes.
pub fn rank(tuple: &[usize], p: usize) -> Result<u64> {
    validate_tuple(tuple, p)?;
    let mut r = 0u64;
    for (j, &i) in tuple.iter().enumerate() {
        r = r
            .checked_add(binom(i as u64, j as u64 + 1)?)
            .ok_or_else(|| Error::Capacity("tuple rank overflows u64".into()))?;
    }
    Ok(r)
}

/// Inverse of [`rank`].
pub fn unrank(r: u64, p: usize, d: usize) -> Result<IndexTuple> {
    if d == 0 || d > p {
        return Err(Error::Parameter(format!("order {d} invalid for {p} nodes")));
    }
    let total = binom(p as u64, d as u64)?;
    if r >= total {
        return Err(Error::Range(format!("rank {r} >= binom({p}, {d}) = {total}")));
    }
    let mut out = vec![0usize; d];
    let mut rest = r;
    let mut upper = p;
    for j in (0..d).rev() {
        // largest c < upper with binom(c, j + 1) <= rest
        let mut c = upper - 1;
        loop {
            let b = binom(c as u64, j as u64 + 1)?;
            if b <= rest {
                rest -= b;
                break;
            }
            c -= 1;
        }
        out[j] = c;
        upper = c;
    }
    Ok(IndexTuple(out))
}

/// Advances `t` to its colex successor among increasing tuples over `p` nodes.
#[inline]
pub(crate) fn next_colex(t: &mut [usize], p: usize) -> bool {
    let d = t.len();
    for j in 0..d {
        let limit = if j + 1 < d { t[j + 1] } else { p };
        if t[j] + 1 < limit {
            t[j] += 1;
            for (i, slot) in t.iter_mut().enumerate().take(j) {
                *slot = i;
            }
            return true;
        }
    }
    false
}

/// Symmetric tensor over the `binom(p, d)` increasing index tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor {
    p: usize,
    d: usize,
    data: Vec<f64>,
}

impl SymTensor {
    fn check_shape(p: usize, d: usize) -> Result<u64> {
        if !(1..=MAX_ORDER).contains(&d) {
            return Err(Error::Parameter(format!("order {d} outside 1..={MAX_ORDER}")));
        }
        if d > p {
            return Err(Error::Parameter(format!("order {d} exceeds node count {p}")));
        }
        binom(p as u64, d as u64)
    }

    pub fn zeros(p: usize, d: usize) -> Result<Self> {
        let len = Self::check_shape(p, d)?;
        let len = usize::try_from(len).map_err(|_| Error::Capacity("tensor too large".into()))?;
        Ok(SymTensor { p, d, data: vec![0.0; len] })
    }

    pub fn from_data(p: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        let len = Self::check_shape(p, d)?;
        check_len(len as usize, data.len())?;
        Ok(SymTensor { p, d, data })
    }

    /// Builds a tensor by evaluating `f` on every tuple in colex order.
    pub fn from_fn(p: usize, d: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut out = Self::zeros(p, d)?;
        let mut t: Vec<usize> = (0..d).collect();
        for slot in out.data.iter_mut() {
            *slot = f(&t);
            next_colex(&mut t, p);
        }
        Ok(out)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn order(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, tuple: &[usize]) -> Result<f64> {
        if tuple.len() != self.d {
            return Err(Error::InvalidIndex(format!("tuple of length {} for order {}", tuple.len(), self.d)));
        }
        Ok(self.data[rank(tuple, self.p)? as usize])
    }

    pub fn set(&mut self, tuple: &[usize], value: f64) -> Result<()> {
        if tuple.len() != self.d {
            return Err(Error::InvalidIndex(format!("tuple of length {} for order {}", tuple.len(), self.d)));
        }
        let r = rank(tuple, self.p)? as usize;
        self.data[r] = value;
        Ok(())
    }

    /// Calls `f(tuple, value)` for every entry with rank in `[start, end)`.
    pub fn for_each_in_range(&self, start: u64, end: u64, mut f: impl FnMut(&[usize], f64)) {
        if start >= end {
            return;
        }
        let mut t = unrank(start, self.p, self.d).expect("start rank in range").into_vec();
        for r in start..end {
            f(&t, self.data[r as usize]);
            next_colex(&mut t, self.p);
        }
    }

    pub fn for_each(&self, f: impl FnMut(&[usize], f64)) {
        self.for_each_in_range(0, self.data.len() as u64, f);
    }

    /// `Y o Y`: every entry squared.
    pub fn elementwise_square(&self) -> SymTensor {
        SymTensor { p: self.p, d: self.d, data: self.data.iter().map(|v| v * v).collect() }
    }

    /// `U{x}_i = sum over tuples containing i of U_t * prod_{j in t, j != i} x_j`.
    pub fn contract_map(&self, x: &[f64]) -> Result<NodeVector> {
        self.contract_map_with(x, Exec::default())
    }

    pub fn contract_map_with(&self, x: &[f64], exec: Exec) -> Result<NodeVector> {
        check_len(self.p, x.len())?;
        let d = self.d;
        Ok(chunked_accumulate(exec, self.data.len() as u64, TUPLE_CHUNK, self.p, |s, e, acc| {
            let mut prefix = [1.0f64; MAX_ORDER + 1];
            self.for_each_in_range(s, e, |t, u| {
                for j in 0..d {
                    prefix[j + 1] = prefix[j] * x[t[j]];
                }
                let mut suffix = 1.0;
                for j in (0..d).rev() {
                    acc[t[j]] += u * prefix[j] * suffix;
                    suffix *= x[t[j]];
                }
            });
        }))
    }

    /// `<Y, x^{(d)}>` over increasing tuples: `sum_t Y_t prod_{i in t} x_i`.
    pub fn inner_with_power(&self, x: &[f64]) -> Result<f64> {
        self.inner_with_power_with(x, Exec::default())
    }

    pub fn inner_with_power_with(&self, x: &[f64], exec: Exec) -> Result<f64> {
        check_len(self.p, x.len())?;
        Ok(chunked_accumulate(exec, self.data.len() as u64, TUPLE_CHUNK, 1, |s, e, acc| {
            self.for_each_in_range(s, e, |t, u| {
                acc[0] += u * t.iter().map(|&i| x[i]).product::<f64>();
            });
        })[0])
    }

    /// Sum of the entries whose tuples lie entirely inside `members` (sorted node list).
    pub fn sum_within(&self, members: &[usize], table: &TupleIndexer) -> f64 {
        let d = self.d;
        if members.len() < d {
            return 0.0;
        }
        let mut pick: Vec<usize> = (0..d).collect();
        let mut total = 0.0;
        let mut t = vec![0usize; d];
        loop {
            for (slot, &q) in t.iter_mut().zip(&pick) {
                *slot = members[q];
            }
            total += self.data[table.rank_unchecked(&t) as usize];
            if !crate::combinatorics::next_lex_combination(&mut pick, members.len()) {
                break;
            }
        }
        total
    }

    /// Writes the binary dump: magic, version (u32), p (u64), d (u64), then
    /// the entries as little-endian f64 in colex order.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.p as u64).to_le_bytes())?;
        w.write_all(&(self.d as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let mut long = [0u8; 8];
        r.read_exact(&mut long)?;
        let p = u64::from_le_bytes(long) as usize;
        r.read_exact(&mut long)?;
        let d = u64::from_le_bytes(long) as usize;
        let mut out = Self::zeros(p, d)?;
        let mut bytes = vec![0u8; out.data.len() * 8];
        r.read_exact(&mut bytes)?;
        for (slot, chunk) in out.data.iter_mut().zip(bytes.chunks_exact(8)) {
            *slot = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::Format("trailing bytes after tensor data".into()));
        }
        Ok(out)
    }
}

/// Table-driven colex ranking for hot loops.
#[derive(Debug, Clone)]
pub struct TupleIndexer {
    table: BinomTable,
}

impl TupleIndexer {
    pub fn new(p: usize, d: usize) -> Self {
        TupleIndexer { table: BinomTable::new(p + 1, d) }
    }

    /// Rank of `t`; the caller guarantees `t` is increasing and in range.
    #[inline]
    pub fn rank_unchecked(&self, t: &[usize]) -> u64 {
        t.iter().enumerate().map(|(j, &i)| self.table.get(i, j + 1)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Every increasing d-tuple over `p` nodes, in colex order, by brute force.
    fn colex_enumeration(p: usize, d: usize) -> Vec<Vec<usize>> {
        let mut all = Vec::new();
        fn rec(p: usize, d: usize, start: usize, cur: &mut Vec<usize>, all: &mut Vec<Vec<usize>>) {
            if cur.len() == d {
                all.push(cur.clone());
                return;
            }
            for i in start..p {
                cur.push(i);
                rec(p, d, i + 1, cur, all);
                cur.pop();
            }
        }
        rec(p, d, 0, &mut Vec::new(), &mut all);
        // colex: compare from the largest index down
        all.sort_by(|a, b| a.iter().rev().cmp(b.iter().rev()));
        all
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&[0, 1, 2], 5).unwrap(), 0);
        let triples = colex_enumeration(4, 3);
        assert_eq!(triples[3], vec![1, 2, 3]);
        assert_eq!(rank(&[1, 2, 3], 4).unwrap(), 3);
        let pairs = colex_enumeration(4, 2);
        assert_eq!(&pairs[..4], &[vec![0, 1], vec![0, 2], vec![1, 2], vec![0, 3]]);
        assert_eq!(rank(&[0, 3], 4).unwrap(), 3);
    }

    #[test]
    fn unrank_examples() {
        assert_eq!(unrank(0, 6, 3).unwrap().as_slice(), &[0, 1, 2]);
        assert_eq!(unrank(3, 4, 3).unwrap().as_slice(), &[1, 2, 3]);
        assert_eq!(unrank(3, 9, 3).unwrap().as_slice(), &[1, 2, 3]);
        let last = binom(9, 4).unwrap() - 1;
        assert_eq!(unrank(last, 9, 4).unwrap().as_slice(), &[5, 6, 7, 8]);
    }

    #[test]
    fn rank_rejects_bad_tuples() {
        assert!(matches!(rank(&[2, 1, 3], 5), Err(Error::InvalidIndex(_))));
        assert!(matches!(rank(&[1, 1, 3], 5), Err(Error::InvalidIndex(_))));
        assert!(matches!(rank(&[1, 2, 5], 5), Err(Error::InvalidIndex(_))));
        assert!(matches!(unrank(10, 5, 3), Err(Error::Range(_))));
    }

    #[test]
    fn rank_unrank_bijection_exhaustive() {
        for p in 1..=20 {
            for d in 1..=4.min(p) {
                let all = colex_enumeration(p, d);
                assert_eq!(all.len() as u64, binom(p as u64, d as u64).unwrap());
                let indexer = TupleIndexer::new(p, d);
                let mut walker: Vec<usize> = (0..d).collect();
                for (r, t) in all.iter().enumerate() {
                    assert_eq!(rank(t, p).unwrap(), r as u64);
                    assert_eq!(indexer.rank_unchecked(t), r as u64);
                    assert_eq!(unrank(r as u64, p, d).unwrap().as_slice(), t.as_slice());
                    assert_eq!(&walker, t);
                    next_colex(&mut walker, p);
                }
            }
        }
    }

    fn brute_contract(u: &SymTensor, x: &[f64]) -> Vec<f64> {
        let (p, d) = (u.p(), u.order());
        let mut out = vec![0.0; p];
        for t in colex_enumeration(p, d) {
            let v = u.get(&t).unwrap();
            for &i in &t {
                out[i] += v * t.iter().filter(|&&j| j != i).map(|&j| x[j]).product::<f64>();
            }
        }
        out
    }

    #[test]
    fn contract_all_ones() {
        let u = SymTensor::from_fn(4, 3, |_| 1.0).unwrap();
        assert_eq!(u.contract_map(&[1.0; 4]).unwrap(), vec![3.0; 4]);
        let z = SymTensor::zeros(4, 3).unwrap();
        assert_eq!(z.contract_map(&[0.3, 1.0, -2.0, 5.0]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn contract_indicator_matches_loop_oracle() {
        let (p, k, d) = (6, 3, 2);
        let u = SymTensor::from_fn(p, d, |_| 1.0).unwrap();
        let x: Vec<f64> = (0..p).map(|i| if i < k { 1.0 } else { 0.0 }).collect();
        let got = u.contract_map(&x).unwrap();
        assert_eq!(got, brute_contract(&u, &x));
        for i in 0..p {
            let expect = if i < k { binom(k as u64 - 1, d as u64 - 1) } else { binom(k as u64, d as u64 - 1) };
            assert_eq!(got[i], expect.unwrap() as f64);
        }
    }

    #[test]
    fn contract_random_matches_loop_oracle() {
        let mut seed = 12345u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for d in 1..=4 {
            let u = SymTensor::from_fn(8, d, |_| next()).unwrap();
            let x: Vec<f64> = (0..8).map(|_| next()).collect();
            let got = u.contract_map(&x).unwrap();
            for (a, b) in got.iter().zip(brute_contract(&u, &x)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_errors() {
        let u = SymTensor::zeros(5, 2).unwrap();
        assert!(matches!(u.contract_map(&[0.0; 4]), Err(Error::Dimension { .. })));
        assert!(matches!(u.inner_with_power(&[0.0; 6]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn square_examples() {
        let u = SymTensor::from_fn(5, 2, |_| 2.0).unwrap();
        assert!(u.elementwise_square().data().iter().all(|&v| v == 4.0));
        let z = SymTensor::zeros(5, 2).unwrap();
        assert!(z.elementwise_square().data().iter().all(|&v| v == 0.0));
        let mixed = SymTensor::from_fn(6, 3, |t| if t[0] % 2 == 0 { -1.5 } else { 0.5 * t[2] as f64 }).unwrap();
        let sq = mixed.elementwise_square();
        let mut frob = 0.0;
        for v in mixed.data() {
            frob += v * v;
        }
        assert!(sq.data().iter().all(|&v| v >= 0.0));
        assert!((sq.data().iter().sum::<f64>() - frob).abs() < 1e-12);
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let u = SymTensor::from_fn(7, 3, |t| (t[0] as f64).sin() * 1e-300 + t[2] as f64 / 3.0).unwrap();
        let mut bytes = Vec::new();
        u.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 8 + 4 + 16 + 8 * 35);
        let back = SymTensor::read_from(bytes.as_slice()).unwrap();
        assert!(u.data().iter().zip(back.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        bytes[0] = b'X';
        assert!(matches!(SymTensor::read_from(bytes.as_slice()), Err(Error::Format(_))));
    }
}
