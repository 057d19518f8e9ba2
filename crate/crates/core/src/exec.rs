//! Execution strategy for the batch workloads (range classification, atlas
//! construction, certificate sweeps, residue tables).
//!
//! With the `parallel` feature (on by default) work is split into chunks and
//! fanned out over the rayon pool. Without it, or when
//! [`Execution::Sequential`] is requested, the same chunks are processed in
//! order on the calling thread. Every caller merges chunk results in chunk
//! order, so outputs never depend on the strategy.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

impl Execution {
    /// Every strategy compiled into this build.
    pub fn available() -> Vec<Execution> {
        #[allow(unused_mut)]
        let mut v = vec![Execution::Sequential];
        #[cfg(feature = "parallel")]
        v.push(Execution::Parallel);
        v
    }

    pub fn name(self) -> &'static str {
        match self {
            Execution::Sequential => "sequential",
            #[cfg(feature = "parallel")]
            Execution::Parallel => "parallel",
        }
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
        }
    }

    /// Splits `items` into chunks of `chunk` elements and maps `f` over the
    /// chunks, preserving order.
    pub fn map_chunks<T, R, F>(self, items: &[T], chunk: usize, f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&[T]) -> R + Sync + Send,
    {
        let chunk = chunk.max(1);
        match self {
            Execution::Sequential => items.chunks(chunk).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_chunks(chunk).map(f).collect(),
        }
    }
}
