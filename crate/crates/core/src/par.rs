//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the [`Exec::Parallel`] strategy fans
//! work out over rayon's pool. Without it, both strategies run sequentially,
//! so callers never need their own `cfg` switches. Output order always
//! matches input order.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

pub fn map_slice<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Exec::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

pub fn map_range<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Exec::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Chunked min-by-key reduction over `0..n`. Ties resolve to the smaller index
/// under both strategies, so results never depend on scheduling.
pub fn min_by_index<K, F>(exec: Exec, n: usize, key: F) -> Option<(usize, K)>
where
    K: PartialOrd + Send + Copy,
    F: Fn(usize) -> Option<K> + Sync + Send,
{
    let better = |a: Option<(usize, K)>, b: Option<(usize, K)>| match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            if b.1 < a.1 || (!(a.1 < b.1) && b.0 < a.0) {
                Some(b)
            } else {
                Some(a)
            }
        }
    };
    #[cfg(feature = "parallel")]
    if exec == Exec::Parallel {
        use rayon::prelude::*;
        return (0..n)
            .into_par_iter()
            .map(|i| key(i).map(|k| (i, k)))
            .reduce(|| None, better);
    }
    let _ = exec;
    (0..n).map(|i| key(i).map(|k| (i, k))).fold(None, better)
}
