//! Execution policy for the data-parallel loops.
//!
//! Every parallel path splits work into chunks whose boundaries depend only on
//! the problem size, and partial results are merged in chunk order. Results are
//! therefore bit-identical for any thread count and for the sequential path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of tensor entries handled by one work chunk.
pub const TUPLE_CHUNK: u64 = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is on, sequential otherwise.
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Evaluates `f(0..n)` and returns the results in index order.
pub fn map_indexed<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Splits `[0, total)` into fixed chunks, lets `fill(start, end, buf)` accumulate
/// into a zeroed buffer of length `width` per chunk, and sums the buffers in
/// chunk order.
pub fn chunked_accumulate<F>(exec: Exec, total: u64, chunk: u64, width: usize, fill: F) -> Vec<f64>
where
    F: Fn(u64, u64, &mut [f64]) + Sync + Send,
{
    let chunk = chunk.max(1);
    let n_chunks = total.div_ceil(chunk) as usize;
    if n_chunks <= 1 {
        let mut buf = vec![0.0; width];
        if total > 0 {
            fill(0, total, &mut buf);
        }
        return buf;
    }
    let partials = map_indexed(exec, n_chunks, |c| {
        let start = c as u64 * chunk;
        let end = (start + chunk).min(total);
        let mut buf = vec![0.0; width];
        fill(start, end, &mut buf);
        buf
    });
    let mut out = vec![0.0; width];
    for part in &partials {
        for (o, v) in out.iter_mut().zip(part) {
            *o += v;
        }
    }
    out
}
