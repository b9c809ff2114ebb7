//! Chunked parallel map used by graph construction and sweeps.

use alloc::vec::Vec;
use core::ops::Range;

/// Applies `f` to consecutive chunks of `0..n` and returns the results in
/// chunk order. Runs on the current rayon pool when the `parallel` feature is
/// enabled, sequentially otherwise.
pub(crate) fn map_chunks<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let count = n.div_ceil(chunk);
    let range = move |c: usize| c * chunk..((c + 1) * chunk).min(n);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(|c| f(range(c))).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(|c| f(range(c))).collect()
    }
}

/// Chunk size that gives each worker several chunks for load balance.
pub(crate) fn chunk_size(n: usize) -> usize {
    #[cfg(feature = "parallel")]
    let workers = rayon::current_num_threads();
    #[cfg(not(feature = "parallel"))]
    let workers = 1;
    (n / (workers * 8)).clamp(256, 1 << 16)
}
