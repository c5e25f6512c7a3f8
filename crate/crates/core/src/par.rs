//! Execution policy for the data-parallel kernels.
//!
//! Every kernel produces its output element by element, and each element is
//! reduced in a fixed order, so both policies give bitwise identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is on, otherwise
    /// behaves like `Sequential`.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Calls `f(index, chunk)` on consecutive `width`-sized chunks of `data`.
pub fn chunks_mut<F>(data: &mut [f64], width: usize, exec: Exec, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    assert!(width > 0);
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => data
            .par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, c)| f(i, c)),
        _ => data.chunks_mut(width).enumerate().for_each(|(i, c)| f(i, c)),
    }
}

/// Evaluates `f` on `0..count` and collects the results in index order.
pub fn map_collect<T, F>(count: usize, exec: Exec, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => (0..count).into_par_iter().map(f).collect(),
        _ => (0..count).map(f).collect(),
    }
}

/// Chunk length used for per-dof kernels; small fields run as one chunk.
pub(crate) fn dof_chunk(n: usize, exec: Exec) -> usize {
    match exec {
        Exec::Sequential => n.max(1),
        Exec::Parallel => n.div_ceil(16).max(64).min(n.max(1)),
    }
}
