use serde::{Deserialize, Serialize};

use crate::error::Result;

/// How replications are scheduled.
///
/// `Parallel` runs on a dedicated rayon pool when the `parallel` feature is
/// enabled and degrades to the sequential loop otherwise. Results always
/// come back in replication order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Sequential,
    /// `threads = 0` lets rayon pick (available parallelism).
    Parallel {
        threads: usize,
    },
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Parallel { threads: 0 }
    }
}

impl Execution {
    pub fn from_threads(threads: Option<usize>) -> Self {
        match threads {
            Some(1) => Execution::Sequential,
            Some(t) => Execution::Parallel { threads: t },
            None => Execution::default(),
        }
    }

    /// Worker threads actually used.
    pub fn effective_threads(&self) -> usize {
        match *self {
            Execution::Sequential => 1,
            #[cfg(feature = "parallel")]
            Execution::Parallel { threads: 0 } => rayon::current_num_threads(),
            #[cfg(feature = "parallel")]
            Execution::Parallel { threads } => threads,
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel { .. } => 1,
        }
    }

    /// `[f(0), …, f(count - 1)]`, stopping at the first error.
    pub fn map<T, F>(&self, count: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        match *self {
            Execution::Sequential => (0..count).map(f).collect(),
            Execution::Parallel { threads } => parallel_map(threads, count, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(threads: usize, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| crate::error::Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(f).collect())
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(_threads: usize, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..count).map(f).collect()
}
