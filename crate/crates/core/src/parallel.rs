// Trials and sampling chunks are independent, so they map over an index
// range. With the `parallel` feature turned off everything runs on the
// calling thread, which is handy for single-thread benchmarks.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a batch of independent jobs is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Data-parallel over the global rayon pool.
    #[default]
    Parallel,
    /// Data-parallel over a dedicated pool of at most this many threads.
    ParallelCapped(usize),
}

impl Execution {
    /// `Parallel`, capped by the `DYNBAL_THREADS` environment variable when set.
    pub fn from_env() -> Execution {
        match std::env::var("DYNBAL_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
            Some(0) | None => Execution::Parallel,
            Some(1) => Execution::Sequential,
            Some(t) => Execution::ParallelCapped(t),
        }
    }
}

/// `f(0), f(1), ..., f(count - 1)`, in index order regardless of scheduling.
pub fn map_indexed<T, F>(count: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..count).map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..count).into_par_iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::ParallelCapped(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
            Err(_) => (0..count).map(f).collect(),
        },
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel | Execution::ParallelCapped(_) => (0..count).map(f).collect(),
    }
}
