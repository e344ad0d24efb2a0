//! Chunked execution helpers.
//!
//! Work is split into fixed index chunks; per-chunk results are computed
//! independently (in parallel when the `parallel` feature is on) and folded
//! in chunk order. Floating-point reductions therefore do not depend on
//! thread count or scheduling, and the sequential fallback produces
//! bit-identical results.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Default number of items per chunk for Monte-Carlo style loops.
pub const DEFAULT_CHUNK: usize = 1024;

/// Number of chunks needed to cover `n` items.
pub fn chunk_count(n: usize, chunk: usize) -> usize {
    let chunk = chunk.max(1);
    n.div_ceil(chunk)
}

fn chunk_range(c: usize, n: usize, chunk: usize) -> Range<usize> {
    let chunk = chunk.max(1);
    let start = c * chunk;
    start..(start + chunk).min(n)
}

/// Maps `f` over the fixed chunks of `0..n` and returns per-chunk results in
/// chunk order. `f` receives the chunk index and the index range it covers.
pub fn map_chunks<R, F>(n: usize, chunk: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, Range<usize>) -> R + Sync + Send,
{
    let chunks = chunk_count(n, chunk);
    #[cfg(feature = "parallel")]
    {
        (0..chunks)
            .into_par_iter()
            .map(|c| f(c, chunk_range(c, n, chunk)))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..chunks).map(|c| f(c, chunk_range(c, n, chunk))).collect()
    }
}

/// Sums per-chunk partial sums in chunk order.
pub fn sum_chunks<F>(n: usize, chunk: usize, f: F) -> f64
where
    F: Fn(usize, Range<usize>) -> f64 + Sync + Send,
{
    map_chunks(n, chunk, f).into_iter().sum()
}

/// Order-preserving indexed map over `0..n`. `min_len` controls the minimum
/// work-unit size handed to a thread; small inputs stay effectively serial.
pub fn map_indexed<R, F>(n: usize, min_len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n)
            .into_par_iter()
            .with_min_len(min_len.max(1))
            .map(f)
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = min_len;
        (0..n).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_matches_sequential_sum() {
        let n = 10_000;
        let direct: f64 = (0..n).map(|i| (i as f64).sqrt()).sum();
        let chunked = sum_chunks(n, 128, |_, range| range.map(|i| (i as f64).sqrt()).sum());
        // Same grouping regardless of feature flags; only the chunk boundaries
        // differ from the direct sum, so allow rounding noise.
        assert!((direct - chunked).abs() < 1e-9);
    }

    #[test]
    fn map_chunks_covers_every_index_once() {
        let parts = map_chunks(1000, 64, |_, range| range.collect::<Vec<_>>());
        let flat: Vec<usize> = parts.into_iter().flatten().collect();
        assert_eq!(flat, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn map_indexed_preserves_order() {
        let out = map_indexed(517, 16, |i| i * 2);
        assert_eq!(out, (0..517).map(|i| i * 2).collect::<Vec<_>>());
    }
}
