//! Seeded random map families.
//!
//! Every family member is a closed-form function, so one member can be
//! sampled at several resolutions. Case `i` of a family with seed `s` draws
//! from the ChaCha8 stream `i` of seed `s`, independent of how many other
//! cases are generated or in which order.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{canonical_arclength, canonicalize_proj, PointKind};
use crate::sampling::{GridMap, SampledPath};

pub fn case_rng(seed: u64, case: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(case);
    rng
}

/// How a scalar function is turned into a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Real,
    /// Angle on the unit circle.
    Circle,
    /// Line through `(cos ψ, sin ψ, 0, …)` in ℝ^dim.
    Proj {
        dim: usize,
    },
}

impl Target {
    pub fn kind(&self) -> PointKind {
        match *self {
            Target::Real => PointKind::Real,
            Target::Circle => PointKind::Circle { radius: 1.0 },
            Target::Proj { dim } => PointKind::Proj { dim },
        }
    }

    fn write(&self, t: f64, out: &mut [f64]) {
        match self {
            Target::Real => out[0] = t,
            Target::Circle => out[0] = canonical_arclength(t, 1.0),
            Target::Proj { .. } => {
                out.iter_mut().for_each(|c| *c = 0.0);
                let (s, c) = t.sin_cos();
                out[0] = c;
                out[1] = s;
                canonicalize_proj(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScalarFn {
    /// Linear interpolation of `values` at increasing `knots` spanning `[0, 1]`.
    PiecewiseLinear { knots: Vec<f64>, values: Vec<f64> },
    /// `offset + Σ amps_k sin(2π freqs_k · x + phases_k)`.
    Fourier {
        offset: f64,
        amps: Vec<f64>,
        freqs: Vec<Vec<f64>>,
        phases: Vec<f64>,
    },
}

impl ScalarFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarFn::PiecewiseLinear { knots, values } => {
                let t = x[0];
                let k = knots.partition_point(|&v| v <= t).clamp(1, knots.len() - 1);
                let (x0, x1) = (knots[k - 1], knots[k]);
                let lam = if x1 > x0 {
                    ((t - x0) / (x1 - x0)).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                values[k - 1] + lam * (values[k] - values[k - 1])
            }
            ScalarFn::Fourier {
                offset,
                amps,
                freqs,
                phases,
            } => {
                let mut acc = *offset;
                for ((a, f), ph) in amps.iter().zip(freqs).zip(phases) {
                    let arg: f64 = f.iter().zip(x).map(|(fi, xi)| fi * xi).sum();
                    acc += a * (TAU * arg + ph).sin();
                }
                acc
            }
        }
    }
}

/// A random scalar function composed with a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomMap {
    pub function: ScalarFn,
    pub target: Target,
}

impl RandomMap {
    pub fn sample_path(&self, n: usize) -> Result<SampledPath> {
        let kind = self.target.kind();
        let s = kind.stride();
        let mut coords = vec![0.0; n * s];
        let h = 1.0 / n as f64;
        for (i, out) in coords.chunks_mut(s).enumerate() {
            let x = (i as f64 + 0.5) * h;
            self.target.write(self.function.eval(&[x]), out);
        }
        SampledPath::new(0.0, 1.0, kind, coords)
    }

    /// Samples on the unit cube `(0,1)^m`.
    pub fn sample_grid(&self, m: usize, n: usize) -> Result<GridMap> {
        let kind = self.target.kind();
        let s = kind.stride();
        let cells = n.pow(m as u32);
        let mut grid = GridMap::new(
            vec![0.0; m],
            1.0,
            n,
            PointKind::Real,
            vec![0.0; cells],
            None,
        )?
        .with_values(kind, vec![0.0; cells * s]);
        let mut x = vec![0.0; m];
        for lin in 0..cells {
            grid.center_into(lin, &mut x);
            let t = self.function.eval(&x);
            self.target
                .write(t, &mut grid.coords[lin * s..(lin + 1) * s]);
        }
        Ok(grid)
    }
}

fn knots(rng: &mut ChaCha8Rng, pieces: usize) -> Vec<f64> {
    let mut k: Vec<f64> = (0..pieces.saturating_sub(1))
        .map(|_| rng.gen::<f64>())
        .collect();
    k.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(pieces + 1);
    out.push(0.0);
    out.extend(k);
    out.push(1.0);
    out
}

/// Piecewise linear with uniform breakpoints and values in `[-amplitude, amplitude]`.
pub fn piecewise_linear(
    rng: &mut ChaCha8Rng,
    pieces: usize,
    amplitude: f64,
    target: Target,
) -> RandomMap {
    let knots = knots(rng, pieces);
    let values = (0..knots.len())
        .map(|_| rng.gen_range(-amplitude..=amplitude))
        .collect();
    RandomMap {
        function: ScalarFn::PiecewiseLinear { knots, values },
        target,
    }
}

/// Non-decreasing piecewise linear real map.
pub fn monotone(rng: &mut ChaCha8Rng, pieces: usize) -> RandomMap {
    let knots = knots(rng, pieces);
    let mut acc = rng.gen_range(-1.0..1.0);
    let values = (0..knots.len())
        .map(|_| {
            let v = acc;
            acc += rng.gen_range(0.0..1.0);
            v
        })
        .collect();
    RandomMap {
        function: ScalarFn::PiecewiseLinear { knots, values },
        target: Target::Real,
    }
}

/// `count` triangular spikes of half-width `width` and height `height` at
/// random positions on a zero background.
pub fn spike_train(rng: &mut ChaCha8Rng, count: usize, width: f64, height: f64) -> RandomMap {
    let mut centres: Vec<f64> = (0..count)
        .map(|_| rng.gen_range(width..1.0 - width))
        .collect();
    centres.sort_by(f64::total_cmp);
    let mut knots = vec![0.0];
    let mut values = vec![0.0];
    for c in centres {
        let left = (c - width).max(*knots.last().unwrap());
        if c <= left {
            continue;
        }
        knots.extend([left, c, c + width]);
        values.extend([0.0, height, 0.0]);
    }
    knots.push(1.0);
    values.push(0.0);
    RandomMap {
        function: ScalarFn::PiecewiseLinear { knots, values },
        target: Target::Real,
    }
}

/// Random trigonometric polynomial in `m` variables with integer
/// frequencies up to `modes` and total amplitude at most `amplitude`.
pub fn fourier(
    rng: &mut ChaCha8Rng,
    m: usize,
    modes: usize,
    amplitude: f64,
    target: Target,
) -> RandomMap {
    let mut amps = Vec::with_capacity(modes);
    let mut freqs = Vec::with_capacity(modes);
    let mut phases = Vec::with_capacity(modes);
    for k in 1..=modes {
        amps.push(rng.gen_range(-1.0..1.0) / k as f64);
        freqs.push(
            (0..m)
                .map(|_| rng.gen_range(-(k as i64)..=k as i64) as f64)
                .collect(),
        );
        phases.push(rng.gen_range(0.0..TAU));
    }
    let norm: f64 = amps.iter().map(|a: &f64| a.abs()).sum::<f64>().max(1e-12);
    amps.iter_mut().for_each(|a| *a *= amplitude / norm);
    RandomMap {
        function: ScalarFn::Fourier {
            offset: rng.gen_range(-PI..PI),
            amps,
            freqs,
            phases,
        },
        target,
    }
}
