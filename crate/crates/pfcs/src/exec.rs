//! Execution-mode switch for the data-parallel sweeps.
//!
//! The heavy inner loops (oracle sweeps, per-policy replays, repetition
//! grids) are expressed as order-preserving maps over an index range so
//! they can run on rayon or fall back to a plain sequential loop. Results
//! are collected in index order, so the output is identical for every
//! mode and thread count.

/// How a sweep should execute.
///
/// `Parallel` uses the rayon thread pool when the crate is built with the
/// `parallel` feature (the default) and silently degrades to sequential
/// execution otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

impl ExecMode {
    /// Parallel when the feature is compiled in, otherwise sequential.
    pub fn auto() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

/// Map `f` over `0..n`, preserving index order in the output.
pub(crate) fn map_indexed<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        #[cfg(not(feature = "parallel"))]
        ExecMode::Parallel => (0..n).map(f).collect(),
    }
}
