//! Replicate fan-out.
//!
//! Replicates own their random streams, so results are identical whether the
//! batch runs on the rayon pool or sequentially; only wall time changes.

/// Evaluates `f(0..count)` in order on the current thread.
pub fn map_replicates_sequential<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..count as u64).map(f).collect()
}

/// Evaluates `f(0..count)` on the rayon pool, preserving order.
#[cfg(feature = "parallel")]
pub fn map_replicates_parallel<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count as u64).into_par_iter().map(f).collect()
}

/// Parallel when the `parallel` feature is on, sequential otherwise.
pub fn map_replicates<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_replicates_parallel(count, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_replicates_sequential(count, f)
    }
}
