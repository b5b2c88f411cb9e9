//! Lifting of sampled maps through a covering by monodromy continuation.
//!
//! Paths are lifted step by step with [`Covering::local_lift`]. Grids are
//! lifted line by line along axis 0, each new line seeded from an already
//! lifted neighbour; the remaining edges are then verified rather than
//! re-lifted, so that an inconsistent branch shows up as a certificate
//! (a plaquette or tree cycle with non-trivial holonomy) instead of a
//! silently chosen branch.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Covering, DeckElement, ManifoldPoint, PointKind, TOL_INJ};
use crate::sampling::{sample_path, FractionalParams, GridMap, MapDescriptor, SampledPath};
use crate::seminorm::{gagliardo_1d, gagliardo_nd, SeminormOptions};

/// Allowed mismatch between a start point and the fiber it should lie in.
pub const START_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LiftResult<M = SampledPath> {
    pub lifted: M,
    pub start: ManifoldPoint,
    /// Largest base distance across a continuation step.
    pub max_step: f64,
    /// Grid edges whose base step is not below the admissible radius; they
    /// are neither used for lifting nor verified.
    pub unresolved_edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonodromyResult {
    pub deck: DeckElement,
    pub closed: bool,
    pub max_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftClassification {
    EqualAE,
    DeckRelated {
        deck: DeckElement,
        mismatch_fraction: f64,
    },
    /// Histogram of per-cell deck labels, sorted by label.
    Mixed {
        labels: Vec<(DeckElement, usize)>,
    },
}

fn check_kind(found: PointKind, expected: PointKind, what: &str) -> Result<()> {
    if found != expected {
        return Err(Error::mismatch(format!(
            "{what} has point kind {found:?}, expected {expected:?}"
        )));
    }
    Ok(())
}

fn check_start(cover: &Covering, start: &ManifoldPoint, first: &[f64]) -> Result<()> {
    check_kind(start.kind(), cover.total_kind(), "start point")?;
    let mut proj = vec![0.0; cover.base_kind().stride()];
    cover.project_coords(start.coords(), &mut proj);
    let gap = cover.base_kind().dist(&proj, first);
    if gap > START_TOL {
        return Err(Error::NotInFiber(format!(
            "start point projects {gap} away from the first sample"
        )));
    }
    Ok(())
}

/// Lifts `u` starting from `start`, which must lie over `u`'s first sample.
pub fn lift_path(cover: &Covering, u: &SampledPath, start: &ManifoldPoint) -> Result<LiftResult> {
    cover.validate()?;
    check_kind(u.kind, cover.base_kind(), "path")?;
    check_start(cover, start, u.value(0))?;
    let ts = cover.total_kind().stride();
    let limit = cover.inj() - TOL_INJ;
    let mut coords = vec![0.0; u.n * ts];
    coords[..ts].copy_from_slice(start.coords());
    let mut max_step = 0.0f64;
    for i in 1..u.n {
        let (done, rest) = coords.split_at_mut(i * ts);
        let step = cover.lift_coords(&done[(i - 1) * ts..], u.value(i), &mut rest[..ts]);
        if !(step < limit) {
            return Err(Error::Resolution {
                index: Some(i),
                step,
                limit,
            });
        }
        max_step = max_step.max(step);
    }
    let mut lifted = SampledPath::from_raw(u.a, u.b, cover.total_kind(), coords);
    lifted.mask = u.mask.clone();
    Ok(LiftResult {
        lifted,
        start: start.clone(),
        max_step,
        unresolved_edges: Vec::new(),
    })
}

/// Deck element carrying `start` to the end of the lifted loop, closed by
/// one virtual step back to the first base value.
pub fn monodromy(
    cover: &Covering,
    lp: &SampledPath,
    start: &ManifoldPoint,
) -> Result<MonodromyResult> {
    check_kind(lp.kind, cover.base_kind(), "loop")?;
    let gap = lp.kind.dist(lp.value(0), lp.value(lp.n - 1));
    if gap > START_TOL {
        return Err(Error::params(format!(
            "loop is not closed: endpoints {gap} apart"
        )));
    }
    let lift = lift_path(cover, lp, start)?;
    let ts = cover.total_kind().stride();
    let last = lift.lifted.value(lp.n - 1);
    let mut end = vec![0.0; ts];
    let step = cover.lift_coords(last, lp.value(0), &mut end);
    let limit = cover.inj() - TOL_INJ;
    if !(step < limit) {
        return Err(Error::Resolution {
            index: Some(lp.n),
            step,
            limit,
        });
    }
    let deck = cover.deck_between_coords(start.coords(), &end)?;
    Ok(MonodromyResult {
        deck,
        closed: deck == cover.deck_identity(),
        max_step: lift.max_step.max(step),
    })
}

/// Samples `desc` on `n + 1` cells whose centres are `0, 1/n, …, 1`, so a
/// 1-periodic descriptor yields a closed loop.
pub fn sample_loop(desc: &MapDescriptor, n: usize) -> Result<SampledPath> {
    let half = 0.5 / n as f64;
    sample_path(desc, -half, 1.0 + half, n + 1)
}

/// The loop of winding `w` in the base of `cover`: `θ = 2πwx` on S¹, or `w`
/// times the generator of π₁(ℝP^m) (a half great circle) for the antipodal
/// cover.
pub fn winding_loop(cover: &Covering, w: i64, n: usize) -> Result<SampledPath> {
    let desc = match *cover {
        Covering::UniversalCircle | Covering::DFold(_) => MapDescriptor::AngleLinear {
            coeffs: vec![2.0 * std::f64::consts::PI * w as f64],
            offset: 0.0,
            radius: 1.0,
        },
        Covering::Antipodal(m) => MapDescriptor::ProjGreatCircle {
            coeffs: vec![std::f64::consts::PI * w as f64],
            offset: 0.0,
            dim: m + 1,
        },
    };
    sample_loop(&desc, n)
}

fn grid_neighbors(u: &GridMap, c: usize) -> impl Iterator<Item = usize> + '_ {
    (0..u.m).flat_map(move |axis| {
        let st = u.axis_stride(axis);
        let k = (c / st) % u.n;
        let lo = (k > 0).then(|| c - st);
        let hi = (k + 1 < u.n).then(|| c + st);
        lo.into_iter().chain(hi)
    })
}

struct GridLifter<'a> {
    cover: &'a Covering,
    u: &'a GridMap,
    ts: usize,
    limit: f64,
    coords: Vec<f64>,
    lifted: Vec<bool>,
    parent: Vec<Option<usize>>,
    max_step: f64,
}

impl<'a> GridLifter<'a> {
    fn admissible(&self, a: usize, b: usize) -> bool {
        self.u.is_defined(a)
            && self.u.is_defined(b)
            && self.cover.step_length(self.u.value(a), self.u.value(b)) < self.limit
    }

    fn lift_from(&mut self, from: usize, to: usize) {
        let mut out = vec![0.0; self.ts];
        let step = self.cover.lift_coords(
            &self.coords[from * self.ts..(from + 1) * self.ts],
            self.u.value(to),
            &mut out,
        );
        self.coords[to * self.ts..(to + 1) * self.ts].copy_from_slice(&out);
        self.lifted[to] = true;
        self.parent[to] = Some(from);
        self.max_step = self.max_step.max(step);
    }

    /// Extends the lift of `c` along its axis-0 line in both directions.
    fn propagate_line(&mut self, c: usize, queue: &mut VecDeque<usize>) {
        let n = self.u.n;
        let line_start = c - c % n;
        let mut newly = vec![c];
        let mut cur = c;
        while cur > line_start && !self.lifted[cur - 1] && self.admissible(cur, cur - 1) {
            self.lift_from(cur, cur - 1);
            cur -= 1;
            newly.push(cur);
        }
        cur = c;
        while cur + 1 < line_start + n && !self.lifted[cur + 1] && self.admissible(cur, cur + 1) {
            self.lift_from(cur, cur + 1);
            cur += 1;
            newly.push(cur);
        }
        newly.sort_unstable();
        queue.extend(newly);
    }

    fn value(&self, c: usize) -> &[f64] {
        &self.coords[c * self.ts..(c + 1) * self.ts]
    }

    /// Holonomy of a closed cell cycle, continuing from the lift of its first cell.
    fn holonomy(&self, cycle: &[usize]) -> Option<DeckElement> {
        let start = self.value(cycle[0]).to_vec();
        let mut cur = start.clone();
        let mut next = vec![0.0; self.ts];
        for &c in cycle[1..].iter().chain(std::iter::once(&cycle[0])) {
            let step = self.cover.lift_coords(&cur, self.u.value(c), &mut next);
            if !(step < self.limit) {
                return None;
            }
            std::mem::swap(&mut cur, &mut next);
        }
        self.cover.deck_between_coords(&start, &cur).ok()
    }

    fn path_to_root(&self, mut c: usize) -> Vec<usize> {
        let mut path = vec![c];
        while let Some(p) = self.parent[c] {
            path.push(p);
            c = p;
        }
        path
    }

    /// First plaquette, in scan order, whose boundary loop has non-trivial
    /// holonomy.
    fn find_plaquette(&self) -> Option<(Vec<usize>, DeckElement)> {
        let u = self.u;
        let id = self.cover.deck_identity();
        for c in 0..u.cell_count() {
            for a1 in 0..u.m {
                for a2 in a1 + 1..u.m {
                    let (s1, s2) = (u.axis_stride(a1), u.axis_stride(a2));
                    if (c / s1) % u.n + 1 >= u.n || (c / s2) % u.n + 1 >= u.n {
                        continue;
                    }
                    let cycle = vec![c, c + s1, c + s1 + s2, c + s2];
                    let edges_ok = (0..4).all(|k| self.admissible(cycle[k], cycle[(k + 1) % 4]));
                    if !edges_ok {
                        continue;
                    }
                    if let Some(tau) = self.holonomy(&cycle) {
                        if tau != id {
                            return Some((cycle, tau));
                        }
                    }
                }
            }
        }
        None
    }
}

/// Lifts a grid map, starting from the first defined cell.
///
/// Edges with base step at least `inj(N) − TOL_INJ` are excluded from both
/// lifting and verification and listed in `unresolved_edges`. The defined
/// cells must be connected through the remaining edges.
pub fn lift_grid(
    cover: &Covering,
    u: &GridMap,
    start: &ManifoldPoint,
) -> Result<LiftResult<GridMap>> {
    cover.validate()?;
    check_kind(u.kind, cover.base_kind(), "grid")?;
    let first = (0..u.cell_count())
        .find(|&c| u.is_defined(c))
        .ok_or_else(|| Error::EmptySelection("grid has no defined cells".into()))?;
    check_start(cover, start, u.value(first))?;
    let cells = u.cell_count();
    let ts = cover.total_kind().stride();
    let mut lifter = GridLifter {
        cover,
        u,
        ts,
        limit: cover.inj() - TOL_INJ,
        coords: vec![0.0; cells * ts],
        lifted: vec![false; cells],
        parent: vec![None; cells],
        max_step: 0.0,
    };
    lifter.coords[first * ts..(first + 1) * ts].copy_from_slice(start.coords());
    lifter.lifted[first] = true;
    let mut queue = VecDeque::new();
    lifter.propagate_line(first, &mut queue);
    while let Some(c) = queue.pop_front() {
        for axis in 1..u.m {
            let st = u.axis_stride(axis);
            let k = (c / st) % u.n;
            let nbs = [(k > 0).then(|| c - st), (k + 1 < u.n).then(|| c + st)];
            for nb in nbs.into_iter().flatten() {
                if !lifter.lifted[nb] && lifter.admissible(c, nb) {
                    lifter.lift_from(c, nb);
                    lifter.propagate_line(nb, &mut queue);
                }
            }
        }
    }
    let remaining = (0..cells)
        .filter(|&c| u.is_defined(c) && !lifter.lifted[c])
        .count();
    if remaining > 0 {
        return Err(Error::Disconnected { remaining });
    }

    let inj = cover.inj();
    let tk = cover.total_kind();
    let mut unresolved = Vec::new();
    let mut inconsistent = None;
    for c in 0..cells {
        if !u.is_defined(c) {
            continue;
        }
        for nb in grid_neighbors(u, c).filter(|&nb| nb > c && u.is_defined(nb)) {
            if !lifter.admissible(c, nb) {
                unresolved.push((c, nb));
                continue;
            }
            if inconsistent.is_none() && !(tk.dist(lifter.value(c), lifter.value(nb)) < inj) {
                inconsistent = Some((c, nb));
            }
        }
    }
    if let Some((a, b)) = inconsistent {
        if let Some((cycle, tau)) = lifter.find_plaquette() {
            return Err(Error::Obstruction {
                cycle,
                holonomy: tau.to_string(),
            });
        }
        // No single plaquette carries the holonomy (the loop surrounds masked
        // cells or unresolved edges); report the spanning-tree cycle instead.
        let pa = lifter.path_to_root(a);
        let pb = lifter.path_to_root(b);
        let common = pa.iter().find(|c| pb.contains(c)).copied().unwrap_or(first);
        let mut cycle: Vec<usize> = pa.iter().copied().take_while(|&c| c != common).collect();
        cycle.push(common);
        let back: Vec<usize> = pb.iter().copied().take_while(|&c| c != common).collect();
        cycle.extend(back.into_iter().rev());
        let tau = lifter
            .holonomy(&cycle)
            .map_or_else(|| "undetermined".to_string(), |t| t.to_string());
        return Err(Error::Obstruction {
            cycle,
            holonomy: tau,
        });
    }
    let lifted = GridMap::from_raw(
        u.origin.clone(),
        u.side,
        u.n,
        tk,
        lifter.coords,
        u.mask.clone(),
    );
    Ok(LiftResult {
        lifted,
        start: start.clone(),
        max_step: lifter.max_step,
        unresolved_edges: unresolved,
    })
}

/// Seminorms of a map and of its continuous lift, against `(diam/inj)^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftingEstimate {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub bound_factor: f64,
}

impl LiftingEstimate {
    fn new(lhs: f64, rhs: f64, cover: &Covering, params: &FractionalParams) -> Self {
        let ratio = if lhs == 0.0 && rhs == 0.0 {
            0.0
        } else {
            lhs / rhs
        };
        Self {
            lhs,
            rhs,
            ratio,
            bound_factor: params.pow(cover.diam_total() / cover.inj()),
        }
    }

    /// `|ũ|^p / ((diam/inj)^p |u|^p)`.
    pub fn normalized(&self) -> f64 {
        self.ratio / self.bound_factor
    }
}

fn estimate_preconditions(cover: &Covering, params: &FractionalParams) -> Result<()> {
    if !cover.diam_total().is_finite() {
        return Err(Error::Unsupported(
            "the lifting estimate needs a total space of finite diameter".into(),
        ));
    }
    if !(params.sp > 1.0) {
        return Err(Error::params(format!(
            "the lifting estimate needs sp > 1, got {}",
            params.sp
        )));
    }
    Ok(())
}

fn canonical_start(cover: &Covering, first: &[f64]) -> Result<ManifoldPoint> {
    let base = cover.base_kind().point(first);
    Ok(cover.fiber(&base, Some(0))?.remove(0))
}

pub fn lifting_estimate(
    cover: &Covering,
    u: &SampledPath,
    params: &FractionalParams,
) -> Result<LiftingEstimate> {
    estimate_preconditions(cover, params)?;
    let start = canonical_start(cover, u.value(0))?;
    let lift = lift_path(cover, u, &start)?;
    let opts = SeminormOptions::default();
    let lhs = gagliardo_1d(&lift.lifted, params, &opts)?.value_p;
    let rhs = gagliardo_1d(u, params, &opts)?.value_p;
    Ok(LiftingEstimate::new(lhs, rhs, cover, params))
}

pub fn lifting_estimate_grid(
    cover: &Covering,
    u: &GridMap,
    params: &FractionalParams,
) -> Result<LiftingEstimate> {
    estimate_preconditions(cover, params)?;
    let first = (0..u.cell_count())
        .find(|&c| u.is_defined(c))
        .ok_or_else(|| Error::EmptySelection("grid has no defined cells".into()))?;
    let start = canonical_start(cover, u.value(first))?;
    let lift = lift_grid(cover, u, &start)?;
    let opts = SeminormOptions::default();
    let lhs = gagliardo_nd(&lift.lifted, params, &opts)?.value_p;
    let rhs = gagliardo_nd(u, params, &opts)?.value_p;
    Ok(LiftingEstimate::new(lhs, rhs, cover, params))
}

/// Read access shared by sampled paths and grids.
pub trait Sampled {
    fn point_kind(&self) -> PointKind;
    fn cells(&self) -> usize;
    fn sample(&self, i: usize) -> &[f64];
    fn defined(&self, i: usize) -> bool;
}

impl Sampled for SampledPath {
    fn point_kind(&self) -> PointKind {
        self.kind
    }
    fn cells(&self) -> usize {
        self.n
    }
    fn sample(&self, i: usize) -> &[f64] {
        self.value(i)
    }
    fn defined(&self, i: usize) -> bool {
        self.is_selected(i)
    }
}

impl Sampled for GridMap {
    fn point_kind(&self) -> PointKind {
        self.kind
    }
    fn cells(&self) -> usize {
        self.cell_count()
    }
    fn sample(&self, i: usize) -> &[f64] {
        self.value(i)
    }
    fn defined(&self, i: usize) -> bool {
        self.is_defined(i)
    }
}

/// Per-cell deck labels `τ(x)` with `ṽ(x) = τ(x) ũ(x)`.
pub fn deck_labels<S: Sampled>(
    cover: &Covering,
    ut: &S,
    vt: &S,
) -> Result<Vec<Option<DeckElement>>> {
    check_kind(ut.point_kind(), cover.total_kind(), "first lift")?;
    check_kind(vt.point_kind(), cover.total_kind(), "second lift")?;
    if ut.cells() != vt.cells() {
        return Err(Error::mismatch("lifts have different cell counts"));
    }
    let bs = cover.base_kind().stride();
    let (mut pu, mut pv) = (vec![0.0; bs], vec![0.0; bs]);
    (0..ut.cells())
        .map(|i| {
            if !(ut.defined(i) && vt.defined(i)) {
                return Ok(None);
            }
            cover.project_coords(ut.sample(i), &mut pu);
            cover.project_coords(vt.sample(i), &mut pv);
            let gap = cover.base_kind().dist(&pu, &pv);
            if gap > START_TOL {
                return Err(Error::NotInFiber(format!(
                    "projections differ by {gap} at cell {i}"
                )));
            }
            cover
                .deck_between_coords(ut.sample(i), vt.sample(i))
                .map(Some)
        })
        .collect()
}

/// Classifies a pair of lifts of the same map; see [`classify_lifting_pair_with_tol`].
pub fn classify_lifting_pair<S: Sampled>(
    cover: &Covering,
    ut: &S,
    vt: &S,
) -> Result<LiftClassification> {
    classify_lifting_pair_with_tol(cover, ut, vt, 0.0)
}

/// `EqualAE` when every label is the identity, `DeckRelated` when one label
/// covers all but a `mismatch_tol` fraction of the cells, `Mixed` otherwise.
pub fn classify_lifting_pair_with_tol<S: Sampled>(
    cover: &Covering,
    ut: &S,
    vt: &S,
    mismatch_tol: f64,
) -> Result<LiftClassification> {
    let labels = deck_labels(cover, ut, vt)?;
    let mut hist: BTreeMap<DeckElement, usize> = BTreeMap::new();
    for l in labels.iter().flatten() {
        *hist.entry(*l).or_default() += 1;
    }
    let total: usize = hist.values().sum();
    if total == 0 {
        return Err(Error::EmptySelection(
            "no cell is defined in both lifts".into(),
        ));
    }
    let (&top, &count) = hist
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .expect("non-empty histogram");
    let mismatch = (total - count) as f64 / total as f64;
    if mismatch == 0.0 && top == cover.deck_identity() {
        return Ok(LiftClassification::EqualAE);
    }
    if mismatch <= mismatch_tol {
        return Ok(LiftClassification::DeckRelated {
            deck: top,
            mismatch_fraction: mismatch,
        });
    }
    Ok(LiftClassification::Mixed {
        labels: hist.into_iter().collect(),
    })
}
