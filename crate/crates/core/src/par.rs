//! Data-parallel helpers.
//!
//! Every batch loop in the crate (rounding trials, restarts, per-point
//! attacks, oracle scans) goes through these functions. With the `parallel`
//! feature they dispatch to rayon; without it, or when the caller asks for
//! [`Parallelism::Sequential`], they run a plain loop. Results are always
//! returned in index order, so the two paths produce identical output.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// True when work will actually be spread over the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// `(0..len).map(f).collect()`, possibly in parallel.
pub fn map_indexed<T, F>(len: usize, mode: Parallelism, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..len).map(f).collect()
}

/// Lowest index `i < len` for which `f(i)` returns `Some`, with its value.
pub fn find_first<T, F>(len: usize, mode: Parallelism, f: F) -> Option<(usize, T)>
where
    T: Send,
    F: Fn(usize) -> Option<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return (0..len)
            .into_par_iter()
            .filter_map(|i| f(i).map(|t| (i, t)))
            .find_first(|_| true);
    }
    let _ = mode;
    (0..len).find_map(|i| f(i).map(|t| (i, t)))
}

/// Index-ordered reduction to the element with the largest key. Ties go to
/// the lowest index so the parallel and sequential paths agree.
pub fn argmax_by_key<T, F>(len: usize, mode: Parallelism, f: F) -> Option<(usize, f64, T)>
where
    T: Send,
    F: Fn(usize) -> Option<(f64, T)> + Sync + Send,
{
    let items = map_indexed(len, mode, |i| f(i).map(|(k, t)| (i, k, t)));
    let mut best: Option<(usize, f64, T)> = None;
    for (i, k, t) in items.into_iter().flatten() {
        let better = match &best {
            None => true,
            Some((_, bk, _)) => k > *bk,
        };
        if better {
            best = Some((i, k, t));
        }
    }
    best
}

/// Run `f` inside a pool with `jobs` threads (no-op without the feature).
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(n) = jobs.filter(|&n| n > 0) {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            return pool.install(f);
        }
    }
    let _ = jobs;
    f()
}
