//! Data-parallel map over independent work items.
//!
//! The pipeline is embarrassingly parallel at several levels (time points,
//! tomography settings, noise-stretch branches). `map` fans those out on a
//! rayon pool when the `parallel` feature is enabled and degrades to a plain
//! sequential loop otherwise. Output order always matches input order, and
//! callers derive per-item RNG seeds from stable indices, so both paths
//! produce identical bytes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, in parallel when the `parallel` feature is on.
pub fn map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Sequential reference implementation of [`map`].
///
/// Exists so benchmarks can compare the two execution strategies within a
/// single build; production code should call [`map`].
pub fn map_seq<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}
