//! Data-parallel helpers. With the `parallel` feature (default) these fan out
//! over rayon's pool; without it they run sequentially. Results keep input
//! order either way, so outputs are identical across both builds.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Rayon's pool when built with `parallel`, otherwise sequential.
    Parallel,
    Sequential,
}

impl Default for Strategy {
    fn default() -> Self {
        if is_parallel() {
            Strategy::Parallel
        } else {
            Strategy::Sequential
        }
    }
}

pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_with(Strategy::default(), items, f)
}

pub fn map_with<T, R, F>(strategy: Strategy, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match strategy {
        #[cfg(feature = "parallel")]
        Strategy::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
