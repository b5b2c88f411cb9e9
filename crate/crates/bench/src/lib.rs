//! Fixed inputs shared by the benchmarks.

use liftlab::random::{case_rng, fourier, piecewise_linear, Target};
use liftlab::{FractionalParams, GridMap, SampledPath};

pub const SEED: u64 = 0x5eed;

pub fn params() -> FractionalParams {
    FractionalParams::new(0.75, 2.0).expect("valid parameters")
}

/// A piecewise-linear circle-valued path with `n` samples.
pub fn circle_path(n: usize) -> SampledPath {
    piecewise_linear(&mut case_rng(SEED, 0), 6, 4.0, Target::Circle)
        .sample_path(n)
        .expect("valid path")
}

/// A smooth circle-valued map on `(0,1)^m` with `n` cells per axis.
pub fn circle_grid(m: usize, n: usize) -> GridMap {
    fourier(&mut case_rng(SEED, 1), m, 2, 2.0, Target::Circle)
        .sample_grid(m, n)
        .expect("valid grid")
}
