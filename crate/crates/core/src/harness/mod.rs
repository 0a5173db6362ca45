//! Experiment harness for the corrupted-data studies.

pub mod classify;
pub mod digits;
pub mod idx;
pub mod recon;
pub mod results;
pub mod rng;

/// Runs `f` for trials `0..trials`, in parallel when the `parallel` feature
/// is on. Results come back in trial order either way.
#[cfg(feature = "parallel")]
pub(crate) fn map_trials<T: Send>(trials: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..trials as u64).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_trials<T>(trials: usize, f: impl Fn(u64) -> T) -> Vec<T> {
    (0..trials as u64).map(f).collect()
}
