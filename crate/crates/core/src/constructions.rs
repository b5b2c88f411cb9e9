//! Explicit map families: helices, bubbles, vortices, ball schedules and
//! bubble towers with their truncations.
//!
//! A bubble is `ũ_δ(x) = γ((1 − 2|x − x₀|/r)/δ)` where `γ` travels the
//! geodesic of Ñ from `b̃` to `b̃′` reparametrized by the quintic smoothstep.
//! Its projection differs from `b = π(b̃)` only on the annulus
//! `(1 − δ) r/2 < |x − x₀| < r/2`.
//!
//! Tower seminorms are not evaluated on one global grid: the balls shrink
//! geometrically, so no single resolution resolves all of them. Instead each
//! ball's value is obtained from a unit-scale bubble by exact scaling
//! (`ρ^{m−sp}`), and the interaction of two balls is computed from their
//! annuli on local grids.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{geodesic_coords, Covering, ManifoldPoint, Side};
use crate::sampling::{
    sample_path, FractionalParams, GridMap, MapDescriptor, SampledPath, SubsetSelector,
};
use crate::seminorm::{gagliardo_nd, Metric, SeminormOptions};
use crate::sum::NeumaierSum;

/// `max |q′|` for the quintic smoothstep.
pub const SMOOTHSTEP_LIPSCHITZ: f64 = 1.875;

/// `q(t) = 6t⁵ − 15t⁴ + 10t³` on `[0, 1]`, clamped outside.
#[inline]
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// Transition `γ: ℝ → Ñ` from `b̃` (for `t ≤ 0`) to `b̃′` (for `t ≥ 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothProfile {
    pub cover: Covering,
    pub start: ManifoldPoint,
    pub end: ManifoldPoint,
    length: f64,
}

impl SmoothProfile {
    pub fn new(cover: Covering, start: ManifoldPoint, end: ManifoldPoint) -> Result<Self> {
        cover.validate()?;
        let pb = cover.project(&start)?;
        let pe = cover.project(&end)?;
        if cover.dist(Side::Base, &pb, &pe)? > 1e-9 {
            return Err(Error::NotInFiber(
                "profile endpoints must project to the same point".into(),
            ));
        }
        let length = cover.dist(Side::Total, &start, &end)?;
        if length == 0.0 {
            return Err(Error::params("profile endpoints must be distinct"));
        }
        Ok(Self {
            cover,
            start,
            end,
            length,
        })
    }

    /// `d_Ñ(b̃, b̃′)`.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Lipschitz constant of `γ`.
    pub fn lipschitz(&self) -> f64 {
        SMOOTHSTEP_LIPSCHITZ * self.length
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let q = smoothstep(t);
        if q == 0.0 {
            out.copy_from_slice(self.start.coords());
        } else if q == 1.0 {
            out.copy_from_slice(self.end.coords());
        } else {
            geodesic_coords(
                self.cover.total_kind(),
                self.start.coords(),
                self.end.coords(),
                q,
                out,
            );
        }
    }

    pub fn eval(&self, t: f64) -> ManifoldPoint {
        let mut out = vec![0.0; self.cover.total_kind().stride()];
        self.eval_into(t, &mut out);
        self.cover.total_kind().point(&out)
    }
}

/// The helix `x ↦ d (cos ξx, sin ξx)` on `(0, 1)`, as arclength on the circle of radius `d`.
pub fn make_helix(d: u32, xi: f64, n: usize) -> Result<SampledPath> {
    sample_path(&MapDescriptor::Helix { d, xi }, 0.0, 1.0, n)
}

/// Vortex `y ↦ f(y/|y|)` of winding `w` on the square of side `side`
/// centred at the origin.
pub fn make_vortex(winding: i64, side: f64, n: usize, proj_dim: Option<usize>) -> Result<GridMap> {
    crate::sampling::centered_vortex(winding, side, n, proj_dim)
}

/// Cube on which a map is sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Vec<f64>,
    pub side: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bubble {
    pub lifted: GridMap,
    pub projected: GridMap,
    /// Cells across the transition layer of width `δ r/2`.
    pub cells_across_layer: f64,
    /// Set when the layer is thinner than one cell.
    pub advisory: Option<String>,
}

pub fn make_bubble(
    profile: &SmoothProfile,
    x0: &[f64],
    r: f64,
    delta: f64,
    grid: &GridSpec,
) -> Result<Bubble> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::params(format!(
            "bubble needs 0 < δ < 1, got {delta}"
        )));
    }
    if !(r > 0.0) {
        return Err(Error::params("bubble radius must be positive"));
    }
    if x0.len() != grid.origin.len() {
        return Err(Error::params(
            "bubble centre dimension differs from the grid",
        ));
    }
    let cover = profile.cover;
    let tk = cover.total_kind();
    let bk = cover.base_kind();
    let cells = grid.n.pow(grid.origin.len() as u32);
    let mut lifted = GridMap::from_raw(
        grid.origin.clone(),
        grid.side,
        grid.n,
        tk,
        vec![0.0; cells * tk.stride()],
        None,
    );
    let mut projected = GridMap::from_raw(
        grid.origin.clone(),
        grid.side,
        grid.n,
        bk,
        vec![0.0; cells * bk.stride()],
        None,
    );
    let mut x = vec![0.0; x0.len()];
    let (ts, bs) = (tk.stride(), bk.stride());
    for lin in 0..cells {
        lifted.center_into(lin, &mut x);
        let rad = x
            .iter()
            .zip(x0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let t = (1.0 - 2.0 * rad / r) / delta;
        profile.eval_into(t, &mut lifted.coords[lin * ts..(lin + 1) * ts]);
        cover.project_coords(
            &lifted.coords[lin * ts..(lin + 1) * ts],
            &mut projected.coords[lin * bs..(lin + 1) * bs],
        );
    }
    let across = delta * r / 2.0 / lifted.h();
    let advisory = (across < 1.0).then(|| {
        format!(
            "transition layer of width {} is resolved by {across:.3} cells; refine n",
            delta * r / 2.0
        )
    });
    Ok(Bubble {
        lifted,
        projected,
        cells_across_layer: across,
        advisory,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallEntry {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Budget for the projected seminorm of this ball's bubble.
    pub eps: f64,
    /// Fiber index `i` of the fiber-indexed variant.
    #[serde(default)]
    pub fiber: Option<usize>,
    /// Generation `k` (distance `c 3^{−k}` from the accumulation point).
    #[serde(default)]
    pub generation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSchedule {
    pub a: Vec<f64>,
    pub entries: Vec<BallEntry>,
    /// Radii of spheres around `a` that meet no ball, decreasing.
    pub r_seq: Vec<f64>,
    /// Cube `origin + (0, side)^m` containing every ball.
    pub domain: Option<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    /// Number of generations `K`.
    pub generations: usize,
    /// Scale `c` of the geometric ray.
    pub c: f64,
    /// Unit direction of the ray (of the first ray in the fiber-indexed variant).
    pub ray: Vec<f64>,
    /// Number of fiber indices; `None` for the single-family tower.
    pub fibers: Option<usize>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn schedule_err(condition: &str, detail: String) -> Error {
    Error::Schedule {
        condition: condition.into(),
        detail,
    }
}

/// Geometric default: centres `a + c 3^{−k} e`, radii `c 3^{−k}/4`,
/// separating radii `r_j = 1.5 c 3^{−j}` for `j = 0..=K`, budgets
/// `ε_k = 2^{−k} / max(ρ_k^{m−1}, 1)`. The fiber-indexed variant places the
/// balls of fiber `i` on the ray rotated by `2πi/|I|` in the plane of the
/// first two axes.
pub fn make_ball_schedule(a: &[f64], params: &ScheduleParams) -> Result<BallSchedule> {
    let m = a.len();
    if m < 2 {
        return Err(Error::params("ball schedules need m >= 2"));
    }
    if params.generations < 1 {
        return Err(Error::params("a schedule needs at least one generation"));
    }
    if !(params.c > 0.0) {
        return Err(Error::params("schedule scale c must be positive"));
    }
    if params.ray.len() != m || (norm(&params.ray) - 1.0).abs() > 1e-12 {
        return Err(Error::params(
            "ray must be a unit vector of the domain dimension",
        ));
    }
    let fibers = params.fibers.unwrap_or(1);
    if fibers < 1 {
        return Err(Error::params("fiber count must be positive"));
    }
    let rays: Vec<Vec<f64>> = (0..fibers)
        .map(|i| {
            let ang = std::f64::consts::TAU * i as f64 / fibers as f64;
            let (s, c) = ang.sin_cos();
            let mut e = params.ray.clone();
            e[0] = c * params.ray[0] - s * params.ray[1];
            e[1] = s * params.ray[0] + c * params.ray[1];
            e
        })
        .collect();
    let mut entries = Vec::new();
    for k in 0..params.generations {
        let dist_k = params.c * 3f64.powi(-(k as i32));
        let rho = dist_k / 4.0;
        let eps = 0.5f64.powi(k as i32) / rho.powi(m as i32 - 1).max(1.0);
        for (i, e) in rays.iter().enumerate() {
            entries.push(BallEntry {
                center: a.iter().zip(e).map(|(ai, ei)| ai + dist_k * ei).collect(),
                radius: rho,
                eps,
                fiber: params.fibers.map(|_| i),
                generation: k,
            });
        }
    }
    let r_seq = (0..=params.generations)
        .map(|j| 1.5 * params.c * 3f64.powi(-(j as i32)))
        .collect();
    let side = 3.0 * params.c;
    let domain = Some((a.iter().map(|x| x - side / 2.0).collect(), side));
    let schedule = BallSchedule {
        a: a.to_vec(),
        entries,
        r_seq,
        domain,
    };
    schedule.validate()?;
    Ok(schedule)
}

impl BallSchedule {
    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn generations(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.generation + 1)
            .max()
            .unwrap_or(0)
    }

    /// Checks containment, disjointness, accumulation at `a`, separation by
    /// the spheres `|x − a| = r_j` and summability of `ρ_k^{m−1} ε_k`.
    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        for (k, e) in self.entries.iter().enumerate() {
            if e.center.len() != m || !(e.radius > 0.0) || !(e.eps > 0.0) {
                return Err(Error::params(format!(
                    "ball {k} has invalid centre, radius or budget"
                )));
            }
            let da = dist(&e.center, &self.a);
            if !(da > e.radius) {
                return Err(schedule_err(
                    "(a) containment",
                    format!("closed ball {k} contains the accumulation point"),
                ));
            }
            if let Some((origin, side)) = &self.domain {
                let inside = e
                    .center
                    .iter()
                    .zip(origin)
                    .all(|(c, o)| c - e.radius > *o && c + e.radius < o + side);
                if !inside {
                    return Err(schedule_err(
                        "(a) containment",
                        format!("ball {k} leaves the domain"),
                    ));
                }
            }
        }
        let margin = self.disjointness_margin();
        if !(margin > 0.0) {
            return Err(schedule_err(
                "(b) disjointness",
                format!("closed balls overlap (margin {margin})"),
            ));
        }
        let fibers: Vec<Option<usize>> = {
            let mut f: Vec<_> = self.entries.iter().map(|e| e.fiber).collect();
            f.sort_unstable();
            f.dedup();
            f
        };
        for fib in fibers {
            let family: Vec<&BallEntry> = self.entries.iter().filter(|e| e.fiber == fib).collect();
            for w in family.windows(2) {
                let (d0, d1) = (dist(&w[0].center, &self.a), dist(&w[1].center, &self.a));
                if !(d1 < d0 && w[1].radius <= w[0].radius) {
                    return Err(schedule_err(
                        "(c) accumulation",
                        "ball centres must approach the accumulation point".into(),
                    ));
                }
            }
        }
        if self.r_seq.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(schedule_err(
                "(d) separation",
                "r_j must decrease strictly".into(),
            ));
        }
        for (j, &r) in self.r_seq.iter().enumerate() {
            for (k, e) in self.entries.iter().enumerate() {
                let gap = (dist(&e.center, &self.a) - r).abs();
                if !(gap > e.radius) {
                    return Err(schedule_err(
                        "(d) separation",
                        format!("sphere r_{j} = {r} meets ball {k}"),
                    ));
                }
            }
        }
        let terms: Vec<f64> = self
            .entries
            .iter()
            .map(|e| e.radius.powi(m as i32 - 1) * e.eps)
            .collect();
        if terms.iter().any(|t| !t.is_finite()) {
            return Err(schedule_err("summability", "non-finite budget term".into()));
        }
        Ok(())
    }

    /// Smallest gap between two closed balls.
    pub fn disjointness_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for (k, a) in self.entries.iter().enumerate() {
            for b in &self.entries[k + 1..] {
                margin = margin.min(dist(&a.center, &b.center) - a.radius - b.radius);
            }
        }
        margin
    }

    /// `Σ ρ_k^{m−1} ε_k`.
    pub fn budget_series(&self) -> f64 {
        let m = self.m() as i32;
        self.entries
            .iter()
            .map(|e| e.radius.powi(m - 1) * e.eps)
            .sum()
    }

    /// Indices of balls inside `B_{r_j}(a)`.
    pub fn inside(&self, j: usize) -> Result<Vec<usize>> {
        let r = *self
            .r_seq
            .get(j)
            .ok_or_else(|| Error::params(format!("r_{j} is not in the schedule")))?;
        Ok(self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| dist(&e.center, &self.a) + e.radius < r)
            .map(|(k, _)| k)
            .collect())
    }
}

/// Seminorms of unit-scale bubbles (`x₀ = 0`, `r = 1`) on the window
/// `[−1, 1]^m`: lifted on `B_1`, projected on the whole window.
#[derive(Debug, Clone)]
pub struct BubbleEvaluator {
    pub cover: Covering,
    pub params: FractionalParams,
    pub m: usize,
    pub cells_per_layer: f64,
    pub pair_budget: u64,
    memo: HashMap<(Vec<u64>, u64), UnitBubble>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitBubble {
    pub delta: f64,
    pub n: usize,
    pub lifted: f64,
    pub projected: f64,
}

impl BubbleEvaluator {
    pub fn new(
        cover: Covering,
        params: FractionalParams,
        m: usize,
        cells_per_layer: f64,
        pair_budget: u64,
    ) -> Self {
        Self {
            cover,
            params,
            m,
            cells_per_layer,
            pair_budget,
            memo: HashMap::new(),
        }
    }

    /// Even cell count giving `cells_per_layer` cells across a layer of width `δ/2`.
    pub fn resolution(&self, delta: f64) -> usize {
        let n = (4.0 * self.cells_per_layer / delta).ceil() as usize;
        n + n % 2
    }

    pub fn evaluate(&mut self, profile: &SmoothProfile, delta: f64) -> Result<UnitBubble> {
        let mut key_pts: Vec<u64> = profile.start.coords().iter().map(|x| x.to_bits()).collect();
        key_pts.extend(profile.end.coords().iter().map(|x| x.to_bits()));
        let key = (key_pts, delta.to_bits());
        if let Some(v) = self.memo.get(&key) {
            return Ok(*v);
        }
        let n = self.resolution(delta);
        let grid = GridSpec {
            origin: vec![-1.0; self.m],
            side: 2.0,
            n,
        };
        let b = make_bubble(profile, &vec![0.0; self.m], 1.0, delta, &grid)?;
        let lift_opts = SeminormOptions {
            metric: Metric::Geodesic,
            subset: SubsetSelector::Ball {
                center: vec![0.0; self.m],
                radius: 1.0,
            },
            pair_budget: self.pair_budget,
        };
        let proj_opts = SeminormOptions {
            pair_budget: self.pair_budget,
            ..SeminormOptions::default()
        };
        let lifted = gagliardo_nd(&b.lifted, &self.params, &lift_opts)?.value_p;
        let projected = gagliardo_nd(&b.projected, &self.params, &proj_opts)?.value_p;
        let v = UnitBubble {
            delta,
            n,
            lifted,
            projected,
        };
        self.memo.insert(key, v);
        Ok(v)
    }

    /// Largest δ on a `log₂` grid of step `tol` within `[lo, hi]` whose lifted
    /// unit value reaches `target`, found by bisection (the lifted value
    /// decreases in δ). Returns `(δ, value, converged)`.
    pub fn bisect(
        &mut self,
        profile: &SmoothProfile,
        target: f64,
        lo: f64,
        hi: f64,
        tol: f64,
    ) -> Result<(UnitBubble, bool)> {
        let (mut a, mut b) = (lo.log2(), hi.log2());
        let low = self.evaluate(profile, lo)?;
        if low.lifted < target {
            return Ok((low, false));
        }
        let high = self.evaluate(profile, hi)?;
        if high.lifted >= target {
            return Ok((high, true));
        }
        while b - a > tol {
            let mid = 0.5 * (a + b);
            let v = self.evaluate(profile, mid.exp2())?;
            if v.lifted >= target {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok((self.evaluate(profile, a.exp2())?, true))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerOptions {
    pub params: FractionalParams,
    pub cells_per_layer: f64,
    /// Cells per layer on the local grids used for ball interactions.
    pub cross_cells_per_layer: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    /// Bisection tolerance in `log₂ δ`.
    pub bisection_tol: f64,
    pub pair_budget: u64,
    /// Resolution of the global grids of the tower maps.
    pub global_n: usize,
}

/// Per-ball record of a tower.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerBall {
    pub entry: BallEntry,
    pub delta: f64,
    pub target: f64,
    pub unit: UnitBubble,
    /// `ρ^{m−sp}` times the unit lifted value: the lifted seminorm on the ball.
    pub lifted_value: f64,
    /// `ρ^{m−sp}` times the unit projected value.
    pub projected_value: f64,
    pub converged: bool,
    /// Fiber indices of the endpoints `(b̃_i, b̃_j)`.
    pub endpoints: (i64, i64),
    pub advisory: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tower {
    pub cover: Covering,
    pub schedule: BallSchedule,
    pub balls: Vec<TowerBall>,
    /// Interaction terms `X_kl` (symmetric, zero diagonal).
    pub cross: Vec<Vec<f64>>,
    pub options: TowerOptions,
    /// Projected map on the schedule domain at `global_n`.
    pub projected: GridMap,
    /// Lifted maps, one per fiber index (one for the single-family tower).
    pub lifted: Vec<GridMap>,
}

/// JSON form of a tower.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerDescriptor {
    pub cover: Covering,
    pub a: Vec<f64>,
    pub entries: Vec<TowerEntry>,
    pub r_seq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerEntry {
    pub center: Vec<f64>,
    pub radius: f64,
    pub eps: f64,
    pub delta: f64,
    pub fiber: Option<usize>,
}

fn ball_profile(cover: &Covering, entry: &BallEntry) -> Result<(SmoothProfile, (i64, i64))> {
    let (i, j) = match entry.fiber {
        Some(i) => {
            let i = i as i64;
            match cover.sheets() {
                Some(count) => (i, (i + 1).rem_euclid(count as i64)),
                None => (i, i + 1),
            }
        }
        None => (0, 1),
    };
    let profile = SmoothProfile::new(*cover, cover.fiber_point(i), cover.fiber_point(j))?;
    Ok((profile, (i, j)))
}

/// Annulus cells of one ball on a local grid: centres, projected values and
/// `d(u_x, b)^p`, with cell volume.
struct Ring {
    centers: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    to_base: Vec<f64>,
    volume: f64,
}

fn ring_cells(
    cover: &Covering,
    profile: &SmoothProfile,
    entry: &BallEntry,
    delta: f64,
    cells_per_layer: f64,
    params: &FractionalParams,
) -> Ring {
    let m = entry.center.len();
    let rho = entry.radius;
    let h = delta * rho / 2.0 / cells_per_layer;
    let per_axis = (rho / h).ceil() as usize;
    let h = rho / per_axis as f64;
    let bk = cover.base_kind();
    let tk = cover.total_kind();
    let b = cover.default_base_point();
    let mut ring = Ring {
        centers: Vec::new(),
        values: Vec::new(),
        to_base: Vec::new(),
        volume: h.powi(m as i32),
    };
    let mut lifted = vec![0.0; tk.stride()];
    let mut proj = vec![0.0; bk.stride()];
    let total = per_axis.pow(m as u32);
    for lin in 0..total {
        let mut rest = lin;
        let x: Vec<f64> = entry
            .center
            .iter()
            .map(|c| {
                let k = rest % per_axis;
                rest /= per_axis;
                c - rho / 2.0 + (k as f64 + 0.5) * h
            })
            .collect();
        let rad = dist(&x, &entry.center);
        if !((1.0 - delta) * rho / 2.0 < rad && rad < rho / 2.0) {
            continue;
        }
        profile.eval_into((1.0 - 2.0 * rad / rho) / delta, &mut lifted);
        cover.project_coords(&lifted, &mut proj);
        ring.to_base.push(params.pow(bk.dist(&proj, b.coords())));
        ring.centers.push(x);
        ring.values.push(proj.clone());
    }
    ring
}

/// `∫_{B_k} ∫_{B_l} [d(u_x,u_y)^p − d(u_x,b)^p − d(b,u_y)^p] |x−y|^{−(m+sp)}`.
fn cross_term(cover: &Covering, a: &Ring, b: &Ring, params: &FractionalParams, m: usize) -> f64 {
    let bk = cover.base_kind();
    let e = -(m as f64 + params.sp) / 2.0;
    let mut acc = NeumaierSum::new();
    for (x, (ux, ax)) in a.centers.iter().zip(a.values.iter().zip(&a.to_base)) {
        let mut row = NeumaierSum::new();
        for (y, (uy, by)) in b.centers.iter().zip(b.values.iter().zip(&b.to_base)) {
            let r2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
            let d = params.pow(bk.dist(ux, uy));
            row.add((d - ax - by) * r2.powf(e));
        }
        acc.merge(&row);
    }
    acc.value() * a.volume * b.volume
}

/// Builds the tower on `schedule`: for every ball the smoothest δ on the
/// bisection grid whose lifted ball value reaches `M_k = k + 1`.
pub fn make_bubble_tower(
    cover: &Covering,
    schedule: &BallSchedule,
    options: &TowerOptions,
) -> Result<Tower> {
    let mut eval = BubbleEvaluator::new(
        *cover,
        options.params,
        schedule.m(),
        options.cells_per_layer,
        options.pair_budget,
    );
    make_bubble_tower_with(&mut eval, schedule, options)
}

/// As [`make_bubble_tower`], reusing the unit evaluations cached in `eval`.
pub fn make_bubble_tower_with(
    eval: &mut BubbleEvaluator,
    schedule: &BallSchedule,
    options: &TowerOptions,
) -> Result<Tower> {
    let cover = &eval.cover.clone();
    cover.validate()?;
    schedule.validate()?;
    let m = schedule.m();
    if eval.m != m || eval.params != options.params {
        return Err(Error::params(
            "evaluator does not match the tower dimension or parameters",
        ));
    }
    let params = options.params;
    let mut balls = Vec::with_capacity(schedule.entries.len());
    let mut profiles = Vec::with_capacity(schedule.entries.len());
    for entry in &schedule.entries {
        let (profile, endpoints) = ball_profile(cover, entry)?;
        let scale = entry.radius.powf(m as f64 - params.sp);
        let target = (entry.generation + 1) as f64;
        let (unit, converged) = eval.bisect(
            &profile,
            target / scale,
            options.delta_min,
            options.delta_max,
            options.bisection_tol,
        )?;
        balls.push(TowerBall {
            entry: entry.clone(),
            delta: unit.delta,
            target,
            unit,
            lifted_value: scale * unit.lifted,
            projected_value: scale * unit.projected,
            converged,
            endpoints,
            advisory: None,
        });
        profiles.push(profile);
    }
    let rings: Vec<Ring> = balls
        .iter()
        .zip(&profiles)
        .map(|(b, p)| {
            ring_cells(
                cover,
                p,
                &b.entry,
                b.delta,
                options.cross_cells_per_layer,
                &params,
            )
        })
        .collect();
    let count = balls.len();
    let mut cross = vec![vec![0.0; count]; count];
    for k in 0..count {
        for l in k + 1..count {
            let x = cross_term(cover, &rings[k], &rings[l], &params, m);
            cross[k][l] = x;
            cross[l][k] = x;
        }
    }
    let (projected, lifted) = global_maps(cover, schedule, &balls, &profiles, options.global_n)?;
    let h = projected.h();
    for b in balls.iter_mut() {
        let layer = b.delta * b.entry.radius / 2.0;
        if layer < h {
            b.advisory = Some(format!(
                "ball at generation {} has a transition layer of {layer:.3e} below the global cell size {h:.3e}",
                b.entry.generation
            ));
        }
    }
    Ok(Tower {
        cover: *cover,
        schedule: schedule.clone(),
        balls,
        cross,
        options: options.clone(),
        projected,
        lifted,
    })
}

fn global_maps(
    cover: &Covering,
    schedule: &BallSchedule,
    balls: &[TowerBall],
    profiles: &[SmoothProfile],
    n: usize,
) -> Result<(GridMap, Vec<GridMap>)> {
    let (origin, side) = schedule
        .domain
        .clone()
        .ok_or_else(|| Error::params("tower schedule needs a domain"))?;
    let m = schedule.m();
    let cells = n.pow(m as u32);
    let tk = cover.total_kind();
    let bk = cover.base_kind();
    let (ts, bs) = (tk.stride(), bk.stride());
    let families: Vec<Option<usize>> = {
        let mut f: Vec<_> = balls.iter().map(|b| b.entry.fiber).collect();
        f.sort_unstable();
        f.dedup();
        f
    };
    let mut projected = GridMap::from_raw(origin.clone(), side, n, bk, vec![0.0; cells * bs], None);
    let mut lifted: Vec<GridMap> = families
        .iter()
        .map(|_| GridMap::from_raw(origin.clone(), side, n, tk, vec![0.0; cells * ts], None))
        .collect();
    let mut mask = vec![true; cells];
    let mut x = vec![0.0; m];
    let b = cover.default_base_point();
    let mut buf = vec![0.0; ts];
    for lin in 0..cells {
        projected.center_into(lin, &mut x);
        if dist(&x, &schedule.a) == 0.0 {
            mask[lin] = false;
        }
        let hit = balls
            .iter()
            .position(|bl| dist(&x, &bl.entry.center) < bl.entry.radius);
        projected.coords[lin * bs..(lin + 1) * bs].copy_from_slice(b.coords());
        for (f, fam) in families.iter().enumerate() {
            let base_index = fam.map_or(0, |i| i as i64);
            let bt = cover.fiber_point(base_index);
            lifted[f].coords[lin * ts..(lin + 1) * ts].copy_from_slice(bt.coords());
        }
        if let Some(k) = hit {
            let bl = &balls[k];
            let rad = dist(&x, &bl.entry.center);
            profiles[k].eval_into((1.0 - 2.0 * rad / bl.entry.radius) / bl.delta, &mut buf);
            let f = families
                .iter()
                .position(|fam| *fam == bl.entry.fiber)
                .unwrap_or(0);
            lifted[f].coords[lin * ts..(lin + 1) * ts].copy_from_slice(&buf);
            cover.project_coords(&buf, &mut projected.coords[lin * bs..(lin + 1) * bs]);
        }
    }
    if mask.iter().any(|&v| !v) {
        projected.mask = Some(mask.clone());
        for l in lifted.iter_mut() {
            l.mask = Some(mask.clone());
        }
    }
    Ok((projected, lifted))
}

impl Tower {
    /// Projected seminorm over balls `k ∈ set` (others replaced by `b`):
    /// `Σ_k ρ_k^{m−sp} V_proj(δ_k) + Σ_{k≠l} X_kl`.
    pub fn projected_value_on(&self, set: &[usize]) -> f64 {
        let mut acc = NeumaierSum::new();
        for &k in set {
            acc.add(self.balls[k].projected_value);
        }
        for (a, &k) in set.iter().enumerate() {
            for &l in &set[a + 1..] {
                acc.add(2.0 * self.cross[k][l]);
            }
        }
        acc.value()
    }

    pub fn projected_value(&self) -> f64 {
        let all: Vec<usize> = (0..self.balls.len()).collect();
        self.projected_value_on(&all)
    }

    /// `Σ_k` lifted ball values, a lower bound for the lifted seminorm on the union.
    pub fn lifted_lower_bound(&self) -> f64 {
        self.balls.iter().map(|b| b.lifted_value).sum()
    }

    /// `2^p Σ ρ_k^{m−1} ε̂_k` with `ε̂_k` the measured unit projected values.
    pub fn series_bound(&self) -> f64 {
        let m = self.schedule.m() as i32;
        let p = self.options.params.p;
        2f64.powf(p)
            * self
                .balls
                .iter()
                .map(|b| b.entry.radius.powi(m - 1) * b.unit.projected)
                .sum::<f64>()
    }

    /// Truncation at `r_j`: `u^j` (equal to `b` inside `B_{r_j}(a)`), the
    /// witness `v^j = u − u^j + b` and the seminorm of the witness.
    pub fn truncate(&self, j: usize) -> Result<Truncation> {
        let inside = self.schedule.inside(j)?;
        let r = self.schedule.r_seq[j];
        let b = self.cover.default_base_point();
        let mut u_j = self.projected.clone();
        let mut v_j = self.projected.clone();
        let s = u_j.kind.stride();
        let mut x = vec![0.0; self.schedule.m()];
        for lin in 0..u_j.cell_count() {
            u_j.center_into(lin, &mut x);
            if dist(&x, &self.schedule.a) < r {
                u_j.coords[lin * s..(lin + 1) * s].copy_from_slice(b.coords());
            } else {
                v_j.coords[lin * s..(lin + 1) * s].copy_from_slice(b.coords());
            }
        }
        Ok(Truncation {
            j,
            r,
            balls_inside: inside.clone(),
            witness_value: self.projected_value_on(&inside),
            u_j,
            v_j,
        })
    }

    pub fn descriptor(&self) -> TowerDescriptor {
        TowerDescriptor {
            cover: self.cover,
            a: self.schedule.a.clone(),
            entries: self
                .balls
                .iter()
                .map(|b| TowerEntry {
                    center: b.entry.center.clone(),
                    radius: b.entry.radius,
                    eps: b.entry.eps,
                    delta: b.delta,
                    fiber: b.entry.fiber,
                })
                .collect(),
            r_seq: self.schedule.r_seq.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub j: usize,
    pub r: f64,
    pub balls_inside: Vec<usize>,
    /// `|v^j|^p` from the composite decomposition.
    pub witness_value: f64,
    pub u_j: GridMap,
    pub v_j: GridMap,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn dfold_profile() -> SmoothProfile {
        let c = Covering::DFold(2);
        let (b0, b1) = c.canonical_fiber_pair();
        SmoothProfile::new(c, b0, b1).unwrap()
    }

    #[test]
    fn smoothstep_shape() {
        assert_eq!(smoothstep(-1.0), 0.0);
        assert_eq!(smoothstep(2.0), 1.0);
        assert_eq!(smoothstep(0.5), 0.5);
        let max_slope = (0..=1000)
            .map(|i| {
                let t = i as f64 / 1000.0;
                30.0 * t * t * (1.0 - t) * (1.0 - t)
            })
            .fold(0.0, f64::max);
        assert!((max_slope - SMOOTHSTEP_LIPSCHITZ).abs() < 1e-12);
    }

    #[test]
    fn profile_endpoints_and_validation() {
        let p = dfold_profile();
        assert_eq!(p.eval(-0.3), ManifoldPoint::circle(0.0, 2.0));
        assert_eq!(p.eval(1.2), ManifoldPoint::circle(TAU, 2.0));
        assert!((p.length() - TAU).abs() < 1e-15);
        let c = Covering::DFold(2);
        assert!(SmoothProfile::new(c, c.fiber_point(0), ManifoldPoint::circle(1.0, 2.0)).is_err());
        assert!(SmoothProfile::new(c, c.fiber_point(0), c.fiber_point(0)).is_err());
    }

    #[test]
    fn helix_examples() {
        let h = make_helix(1, TAU, 8).unwrap();
        // x = 5/16 is the centre of cell 2; the angle is 2π·5/16.
        assert!((h.value(2)[0] - TAU * 5.0 / 16.0).abs() < 1e-14);
        assert!(make_helix(2, 0.0, 8).is_err());
        let xi = 7.3;
        let h2 = make_helix(2, xi, 64).unwrap();
        let h1 = make_helix(1, 2.0 * xi, 64).unwrap();
        let c = Covering::DFold(2);
        for i in 0..64 {
            let p = c.project(&h2.point(i)).unwrap();
            assert!(p.distance(&h1.point(i)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn bubble_values_and_locality() {
        let p = dfold_profile();
        let grid = GridSpec {
            origin: vec![-1.0, -1.0],
            side: 2.0,
            n: 64,
        };
        let b = make_bubble(&p, &[0.0, 0.0], 1.0, 0.25, &grid).unwrap();
        let base = Covering::DFold(2).default_base_point();
        for lin in 0..b.lifted.cell_count() {
            let x = b.lifted.center(lin);
            let r = x[0].hypot(x[1]);
            if r >= 0.5 {
                assert_eq!(b.lifted.point(lin).unwrap(), p.start);
            }
            if r <= 0.75 * 0.5 {
                assert_eq!(b.lifted.point(lin).unwrap(), p.end);
            }
            let in_annulus = 0.75 * 0.5 < r && r < 0.5;
            if !in_annulus {
                assert_eq!(b.projected.point(lin).unwrap(), base);
            }
        }
        assert!(b.advisory.is_none());
        let coarse = GridSpec { n: 8, ..grid };
        assert!(make_bubble(&p, &[0.0, 0.0], 1.0, 0.05, &coarse)
            .unwrap()
            .advisory
            .is_some());
    }

    #[test]
    fn bubble_lipschitz_bound() {
        let p = dfold_profile();
        let delta = 0.125;
        let grid = GridSpec {
            origin: vec![-1.0, -1.0],
            side: 2.0,
            n: 256,
        };
        let b = make_bubble(&p, &[0.0, 0.0], 1.0, delta, &grid).unwrap();
        let g = &b.projected;
        let bound = 2.0 * p.lipschitz() / 1.0 / delta;
        let mut worst = 0.0f64;
        for lin in 0..g.cell_count() {
            for axis in 0..2 {
                let st = g.axis_stride(axis);
                if (lin / st) % g.n + 1 < g.n {
                    let d = g.kind.dist(g.value(lin), g.value(lin + st));
                    worst = worst.max(d / g.h());
                }
            }
        }
        assert!(worst <= bound, "{worst} > {bound}");
        assert!(worst > 0.5 * bound / 1.875);
    }

    #[test]
    fn bubble_scaling_transfer() {
        let p = dfold_profile();
        let params = FractionalParams::new(0.5, 2.0).unwrap();
        let o = SeminormOptions::default();
        let big = make_bubble(
            &p,
            &[0.0, 0.0],
            1.0,
            0.25,
            &GridSpec {
                origin: vec![-1.0, -1.0],
                side: 2.0,
                n: 64,
            },
        )
        .unwrap();
        let small = make_bubble(
            &p,
            &[0.0, 0.0],
            0.5,
            0.25,
            &GridSpec {
                origin: vec![-0.5, -0.5],
                side: 1.0,
                n: 64,
            },
        )
        .unwrap();
        let vb = gagliardo_nd(&big.projected, &params, &o).unwrap().value_p;
        let vs = gagliardo_nd(&small.projected, &params, &o).unwrap().value_p;
        // λ = 2 shrinks the ball; value scales by λ^{−(m−sp)} = 1/2.
        assert!((vs / vb - 0.5).abs() < 1e-9);
    }

    fn default_params(k: usize) -> ScheduleParams {
        ScheduleParams {
            generations: k,
            c: 0.25,
            ray: vec![1.0, 0.0],
            fibers: None,
        }
    }

    #[test]
    fn schedule_conditions() {
        let s = make_ball_schedule(&[0.0, 0.0], &default_params(2)).unwrap();
        // Direct geometric check of the gap between the two closed balls.
        let e = &s.entries;
        let gap = (e[0].center[0] - e[1].center[0]).abs() - e[0].radius - e[1].radius;
        assert!((s.disjointness_margin() - gap).abs() < 1e-15);
        assert!(gap > 0.0);
        // Every ball sits between consecutive separating spheres.
        for (k, b) in e.iter().enumerate() {
            let d = norm(&b.center);
            assert!(d + b.radius < s.r_seq[k] && d - b.radius > s.r_seq[k + 1]);
        }
        assert!(s.budget_series() < 1.0);
    }

    #[test]
    fn overlapping_entries_are_rejected() {
        let mut s = make_ball_schedule(&[0.0, 0.0], &default_params(2)).unwrap();
        s.entries[1].radius = 0.2;
        match s.validate() {
            Err(Error::Schedule { condition, .. }) => assert_eq!(condition, "(a) containment"),
            other => panic!("{other:?}"),
        }
        let mut s = make_ball_schedule(&[0.0, 0.0], &default_params(2)).unwrap();
        s.entries[1].center = s.entries[0].center.clone();
        s.entries[1].center[1] += 0.05;
        assert!(
            matches!(s.validate(), Err(Error::Schedule { ref condition, .. }) if condition == "(b) disjointness")
        );
    }

    #[test]
    fn fiber_indexed_schedule_is_valid() {
        let mut p = default_params(3);
        p.fibers = Some(2);
        let s = make_ball_schedule(&[0.0, 0.0], &p).unwrap();
        assert_eq!(s.entries.len(), 6);
        assert!((s.entries[1].center[0] + 0.25).abs() < 1e-15);
        let mut p3 = default_params(2);
        p3.fibers = Some(3);
        assert!(make_ball_schedule(&[0.0, 0.0], &p3).is_ok());
    }

    #[test]
    fn truncation_radius_must_exist() {
        let s = make_ball_schedule(&[0.0, 0.0], &default_params(2)).unwrap();
        assert_eq!(s.inside(0).unwrap(), vec![0, 1]);
        assert_eq!(s.inside(2).unwrap(), Vec::<usize>::new());
        assert!(s.inside(3).is_err());
    }

    #[test]
    fn one_ball_tower_is_a_scaled_bubble() {
        let cover = Covering::DFold(2);
        let s = make_ball_schedule(
            &[0.0, 0.0],
            &ScheduleParams {
                c: 1.0,
                ..default_params(1)
            },
        )
        .unwrap();
        let params = FractionalParams::new(0.5, 2.0).unwrap();
        let opts = TowerOptions {
            params,
            cells_per_layer: 2.0,
            cross_cells_per_layer: 2.0,
            delta_min: 0.25,
            delta_max: 0.5,
            bisection_tol: 0.5,
            pair_budget: 1 << 31,
            global_n: 64,
        };
        let t = make_bubble_tower(&cover, &s, &opts).unwrap();
        assert_eq!(t.balls.len(), 1);
        let ball = &t.balls[0];
        let grid = GridSpec {
            origin: vec![-1.0, -1.0],
            side: 2.0,
            n: ball.unit.n,
        };
        let unit = make_bubble(&dfold_profile(), &[0.0, 0.0], 1.0, ball.delta, &grid).unwrap();
        let v = gagliardo_nd(&unit.projected, &params, &SeminormOptions::default())
            .unwrap()
            .value_p;
        assert!((ball.projected_value - 0.25 * v).abs() <= 1e-12 * v);
        assert_eq!(t.projected_value(), ball.projected_value);
        let desc = t.descriptor();
        let text = serde_json::to_string(&desc).unwrap();
        assert_eq!(
            serde_json::from_str::<TowerDescriptor>(&text).unwrap(),
            desc
        );
    }
}
