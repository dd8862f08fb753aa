//! Data-parallel helpers. With the `parallel` feature (default) work runs on
//! rayon; without it every helper degrades to a sequential loop with the same
//! result order.

/// Requested execution strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether `Parallel` actually runs in parallel in this build.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Map `f` over `items`, preserving order.
pub fn map_ordered<T, R, F>(items: &[T], execution: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Run `f(0..count)` with at most `parallelism` calls in flight, preserving order.
pub fn bounded_indexed<R, F>(count: usize, parallelism: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        let parallelism = parallelism.max(1);
        if parallelism > 1 && count > 1 {
            use rayon::prelude::*;
            match rayon::ThreadPoolBuilder::new().num_threads(parallelism.min(count)).build() {
                Ok(pool) => return pool.install(|| (0..count).into_par_iter().map(&f).collect()),
                Err(e) => log::warn!("falling back to sequential execution: {e}"),
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = parallelism;
    (0..count).map(f).collect()
}
