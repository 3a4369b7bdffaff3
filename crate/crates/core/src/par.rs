//! Execution policy for the data-parallel loops (assembly, edge-pair
//! quadrature, random-trace suites and experiment sweeps).
//!
//! Every helper produces bitwise-identical results under both policies:
//! maps preserve input order and reductions are summed over fixed-size
//! chunks in a fixed order.

use std::ops::Range;

/// Chunk length used by [`chunked_sum`].
pub const SUM_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential execution when the `parallel` feature is off.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `items`, keeping input order.
pub fn map_collect<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Maps `f` over `0..n`, keeping index order.
pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Sums `f(chunk)` over consecutive chunks of `0..n` of length [`SUM_CHUNK`].
///
/// Partial sums are added left to right, so the result does not depend on
/// the execution policy or on the thread count.
pub fn chunked_sum<F>(exec: Execution, n: usize, f: F) -> f64
where
    F: Fn(Range<usize>) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(SUM_CHUNK);
    let partials = map_range(exec, chunks, |c| {
        let start = c * SUM_CHUNK;
        f(start..(start + SUM_CHUNK).min(n))
    });
    partials.into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree_bitwise() {
        let values: Vec<f64> = (0..10_000).map(|i| (i as f64 * 0.37).sin()).collect();
        let sum = |exec| chunked_sum(exec, values.len(), |r| values[r].iter().sum());
        assert_eq!(
            sum(Execution::Sequential).to_bits(),
            sum(Execution::Parallel).to_bits()
        );
        let sq = map_collect(Execution::Parallel, &values, |v| v * v);
        let ss = map_collect(Execution::Sequential, &values, |v| v * v);
        assert_eq!(sq, ss);
    }

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(chunked_sum(Execution::Parallel, 0, |_| 1.0), 0.0);
    }
}
