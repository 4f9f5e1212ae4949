//! Replica scheduling on a bounded worker pool.

use rayon::prelude::*;

use crate::error::{LabError, LabResult};

/// Runs `job(0..count)` on `threads` workers and returns the results in replica order.
///
/// Each job owns its simulation state; the caller aggregates the ordered
/// results on its own thread, so output does not depend on the thread count.
pub fn run_replicas<T, F>(threads: usize, count: usize, job: F) -> LabResult<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> LabResult<T> + Sync,
{
    if threads <= 1 {
        return (0..count).map(&job).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| LabError::Param(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(&job).collect())
}
