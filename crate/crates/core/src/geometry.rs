//! Model Riemannian coverings `π: Ñ → N` with exact geodesic distances,
//! fiber enumeration, deck-group action and local lifting below the
//! injectivity radius of the base.
//!
//! Three families are supported:
//!
//! | covering              | Ñ                     | N     | deck group | inj(N) | diam(Ñ) |
//! |-----------------------|-----------------------|-------|------------|--------|---------|
//! | `UniversalCircle`     | ℝ                     | S¹    | ℤ          | π      | ∞       |
//! | `DFold(d)`            | circle of radius `d`  | S¹    | ℤ_d        | π      | π d     |
//! | `Antipodal(m)`        | S^m                   | ℝP^m  | ℤ_2        | π/2    | π       |
//!
//! Circle points are stored as an arclength in `[0, 2πr)`, so the d-fold
//! projection is literally `θ̃ ↦ θ̃ mod 2π` and is a local isometry without any
//! conformal rescaling. Projective points are unit vectors whose first
//! coordinate above `1e-12` in magnitude is positive.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Coordinates below this magnitude are treated as zero when choosing the
/// sign of a projective representative.
pub const ZERO_COORD: f64 = 1e-12;

/// Safety margin below the injectivity radius for admissible lifting steps.
pub const TOL_INJ: f64 = 1e-9;

/// Tolerance used when deciding whether two points share a fiber.
pub const FIBER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldPoint {
    RealLine(f64),
    /// Arclength `theta ∈ [0, 2π·radius)` on a circle of the given radius.
    CircleAngle {
        theta: f64,
        radius: f64,
    },
    SpherePoint(Vec<f64>),
    ProjPoint(Vec<f64>),
}

/// The shape shared by every sample of a sampled map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointKind {
    Real,
    Circle {
        radius: f64,
    },
    /// Unit sphere in ℝ^dim.
    Sphere {
        dim: usize,
    },
    /// Projective space of lines in ℝ^dim.
    Proj {
        dim: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Base,
    Total,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covering {
    /// `ℝ → S¹`, `t ↦ (cos t, sin t)`.
    UniversalCircle,
    /// Circle of radius `d` onto the unit circle.
    DFold(u32),
    /// `S^m → ℝP^m`.
    Antipodal(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeckElement {
    /// Translation by `2πk` on ℝ.
    IntShift(i64),
    /// Arclength shift by `2πk` on the radius-`d` circle, `k` mod `d`.
    ModShift(u32),
    /// `±id` on the sphere.
    Sign(i8),
}

impl fmt::Display for DeckElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeckElement::IntShift(k) => write!(f, "shift({k})"),
            DeckElement::ModShift(k) => write!(f, "mod_shift({k})"),
            DeckElement::Sign(s) => write!(f, "sign({s})"),
        }
    }
}

/// Reduces an arclength to `[0, 2πr)`; values that round up to the period
/// are sent to 0.
#[inline]
pub fn canonical_arclength(theta: f64, radius: f64) -> f64 {
    let period = TAU * radius;
    let t = theta.rem_euclid(period);
    if t >= period || t == 0.0 {
        0.0
    } else {
        t
    }
}

/// Signed representative of `x` modulo `2π` in `(−π, π]`.
#[inline]
pub fn wrap_signed(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[inline]
fn sum_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x + y) * (x + y))
        .sum::<f64>()
        .sqrt()
}

fn normalized(v: &[f64]) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::params(
            "zero or non-finite vector cannot be normalised",
        ));
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Flips `v` so that its first non-negligible coordinate is positive.
pub fn canonicalize_proj(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|c| c.abs() > ZERO_COORD) {
        if *first < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
    }
}

impl ManifoldPoint {
    pub fn real(t: f64) -> Self {
        ManifoldPoint::RealLine(t)
    }

    pub fn circle(theta: f64, radius: f64) -> Self {
        ManifoldPoint::CircleAngle {
            theta: canonical_arclength(theta, radius),
            radius,
        }
    }

    pub fn sphere(v: &[f64]) -> Result<Self> {
        Ok(ManifoldPoint::SpherePoint(normalized(v)?))
    }

    pub fn proj(v: &[f64]) -> Result<Self> {
        let mut w = normalized(v)?;
        canonicalize_proj(&mut w);
        Ok(ManifoldPoint::ProjPoint(w))
    }

    /// `±e_axis` in ℝ^dim as a sphere point.
    pub fn sphere_axis(dim: usize, axis: usize, negative: bool) -> Self {
        let mut v = vec![0.0; dim];
        v[axis] = if negative { -1.0 } else { 1.0 };
        ManifoldPoint::SpherePoint(v)
    }

    pub fn kind(&self) -> PointKind {
        match self {
            ManifoldPoint::RealLine(_) => PointKind::Real,
            ManifoldPoint::CircleAngle { radius, .. } => PointKind::Circle { radius: *radius },
            ManifoldPoint::SpherePoint(v) => PointKind::Sphere { dim: v.len() },
            ManifoldPoint::ProjPoint(v) => PointKind::Proj { dim: v.len() },
        }
    }

    /// Packed coordinates as stored in sampled maps.
    pub fn coords(&self) -> &[f64] {
        match self {
            ManifoldPoint::RealLine(t) => std::slice::from_ref(t),
            ManifoldPoint::CircleAngle { theta, .. } => std::slice::from_ref(theta),
            ManifoldPoint::SpherePoint(v) | ManifoldPoint::ProjPoint(v) => v,
        }
    }

    /// Geodesic distance using the intrinsic metric of the point kind.
    pub fn distance(&self, other: &ManifoldPoint) -> Result<f64> {
        let kind = self.kind();
        if kind != other.kind() {
            return Err(Error::mismatch(format!(
                "cannot measure distance between {kind:?} and {:?}",
                other.kind()
            )));
        }
        Ok(kind.dist(self.coords(), other.coords()))
    }
}

impl PointKind {
    /// Number of `f64` coordinates per point.
    pub fn stride(&self) -> usize {
        match self {
            PointKind::Real | PointKind::Circle { .. } => 1,
            PointKind::Sphere { dim } | PointKind::Proj { dim } => *dim,
        }
    }

    /// Geodesic distance between packed coordinates.
    #[inline]
    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            PointKind::Real => (a[0] - b[0]).abs(),
            PointKind::Circle { radius } => circle_dist(a[0], b[0], radius),
            PointKind::Sphere { .. } => 2.0 * diff_norm(a, b).atan2(sum_norm(a, b)),
            PointKind::Proj { .. } => {
                let m = diff_norm(a, b);
                let p = sum_norm(a, b);
                2.0 * m.min(p).atan2(m.max(p))
            }
        }
    }

    /// Distance in the standard Euclidean embedding (Veronese for ℝP^m).
    #[inline]
    pub fn chordal(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            PointKind::Real => (a[0] - b[0]).abs(),
            PointKind::Circle { radius } => {
                2.0 * radius * (circle_dist(a[0], b[0], radius) / (2.0 * radius)).sin()
            }
            PointKind::Sphere { .. } => diff_norm(a, b),
            PointKind::Proj { .. } => {
                let c = dot(a, b);
                (2.0 * (1.0 - c * c)).max(0.0).sqrt()
            }
        }
    }

    pub fn point(&self, coords: &[f64]) -> ManifoldPoint {
        match *self {
            PointKind::Real => ManifoldPoint::RealLine(coords[0]),
            PointKind::Circle { radius } => ManifoldPoint::CircleAngle {
                theta: coords[0],
                radius,
            },
            PointKind::Sphere { .. } => ManifoldPoint::SpherePoint(coords.to_vec()),
            PointKind::Proj { .. } => ManifoldPoint::ProjPoint(coords.to_vec()),
        }
    }

    /// Largest distance between two points of this kind.
    pub fn diameter(&self) -> f64 {
        match *self {
            PointKind::Real => f64::INFINITY,
            PointKind::Circle { radius } => PI * radius,
            PointKind::Sphere { .. } => PI,
            PointKind::Proj { .. } => PI / 2.0,
        }
    }
}

#[inline]
fn circle_dist(a: f64, b: f64, radius: f64) -> f64 {
    let period = TAU * radius;
    let g = (a - b).abs().rem_euclid(period);
    g.min(period - g)
}

impl Covering {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Covering::DFold(d) if d < 2 => {
                Err(Error::params(format!("d-fold cover needs d >= 2, got {d}")))
            }
            Covering::Antipodal(m) if m < 1 => Err(Error::params("antipodal cover needs m >= 1")),
            _ => Ok(()),
        }
    }

    pub fn base_kind(&self) -> PointKind {
        match *self {
            Covering::UniversalCircle | Covering::DFold(_) => PointKind::Circle { radius: 1.0 },
            Covering::Antipodal(m) => PointKind::Proj { dim: m + 1 },
        }
    }

    pub fn total_kind(&self) -> PointKind {
        match *self {
            Covering::UniversalCircle => PointKind::Real,
            Covering::DFold(d) => PointKind::Circle { radius: d as f64 },
            Covering::Antipodal(m) => PointKind::Sphere { dim: m + 1 },
        }
    }

    pub fn kind(&self, side: Side) -> PointKind {
        match side {
            Side::Base => self.base_kind(),
            Side::Total => self.total_kind(),
        }
    }

    /// Injectivity radius of the base.
    pub fn inj(&self) -> f64 {
        match self {
            Covering::UniversalCircle | Covering::DFold(_) => PI,
            Covering::Antipodal(_) => PI / 2.0,
        }
    }

    pub fn diam_total(&self) -> f64 {
        self.total_kind().diameter()
    }

    pub fn diam_base(&self) -> f64 {
        self.base_kind().diameter()
    }

    /// Number of sheets, `None` for the universal cover of the circle.
    pub fn sheets(&self) -> Option<usize> {
        match *self {
            Covering::UniversalCircle => None,
            Covering::DFold(d) => Some(d as usize),
            Covering::Antipodal(_) => Some(2),
        }
    }

    fn check(&self, side: Side, pt: &ManifoldPoint) -> Result<()> {
        let expected = self.kind(side);
        if pt.kind() != expected {
            return Err(Error::mismatch(format!(
                "{pt:?} is not a point of the {side:?} space of {self:?} (expected {expected:?})"
            )));
        }
        Ok(())
    }

    /// `π(pt)` in canonical form.
    pub fn project(&self, pt: &ManifoldPoint) -> Result<ManifoldPoint> {
        self.check(Side::Total, pt)?;
        let mut out = vec![0.0; self.base_kind().stride()];
        self.project_coords(pt.coords(), &mut out);
        Ok(self.base_kind().point(&out))
    }

    #[inline]
    pub(crate) fn project_coords(&self, c: &[f64], out: &mut [f64]) {
        match self {
            Covering::UniversalCircle | Covering::DFold(_) => {
                out[0] = canonical_arclength(c[0], 1.0);
            }
            Covering::Antipodal(_) => {
                out.copy_from_slice(c);
                canonicalize_proj(out);
            }
        }
    }

    pub fn dist(&self, side: Side, a: &ManifoldPoint, b: &ManifoldPoint) -> Result<f64> {
        self.check(side, a)?;
        self.check(side, b)?;
        Ok(self.kind(side).dist(a.coords(), b.coords()))
    }

    /// `π^{-1}(pt)`, sorted. The universal cover needs `window`: the
    /// representatives `t + 2πk` with `|k| <= window` are returned.
    pub fn fiber(&self, pt: &ManifoldPoint, window: Option<u32>) -> Result<Vec<ManifoldPoint>> {
        self.check(Side::Base, pt)?;
        let c = pt.coords();
        Ok(match *self {
            Covering::UniversalCircle => {
                let w = window.ok_or(Error::MissingWindow)? as i64;
                (-w..=w)
                    .map(|k| ManifoldPoint::RealLine(c[0] + TAU * k as f64))
                    .collect()
            }
            Covering::DFold(d) => (0..d)
                .map(|k| ManifoldPoint::circle(c[0] + TAU * k as f64, d as f64))
                .collect(),
            Covering::Antipodal(_) => {
                let v = c.to_vec();
                let neg: Vec<f64> = c.iter().map(|x| -x).collect();
                vec![
                    ManifoldPoint::SpherePoint(v),
                    ManifoldPoint::SpherePoint(neg),
                ]
            }
        })
    }

    /// The unique fiber point over `target` within distance `inj(N)` of
    /// `base`, provided the step `d_N(π(base), target)` is below
    /// `inj(N) − TOL_INJ`.
    pub fn local_lift(
        &self,
        base: &ManifoldPoint,
        target: &ManifoldPoint,
    ) -> Result<ManifoldPoint> {
        self.local_lift_with_tol(base, target, TOL_INJ)
    }

    pub fn local_lift_with_tol(
        &self,
        base: &ManifoldPoint,
        target: &ManifoldPoint,
        tol_inj: f64,
    ) -> Result<ManifoldPoint> {
        self.check(Side::Total, base)?;
        self.check(Side::Base, target)?;
        let mut out = vec![0.0; self.total_kind().stride()];
        let step = self.lift_coords(base.coords(), target.coords(), &mut out);
        let limit = self.inj() - tol_inj;
        if !(step < limit) {
            return Err(Error::Resolution {
                index: None,
                step,
                limit,
            });
        }
        Ok(self.total_kind().point(&out))
    }

    /// Writes the fiber point over `target` nearest to `prev` into `out` and
    /// returns the base step length. No admissibility check is made.
    #[inline]
    pub(crate) fn lift_coords(&self, prev: &[f64], target: &[f64], out: &mut [f64]) -> f64 {
        match *self {
            Covering::UniversalCircle => {
                let delta = wrap_signed(target[0] - prev[0].rem_euclid(TAU));
                out[0] = prev[0] + delta;
                delta.abs()
            }
            Covering::DFold(d) => {
                let delta = wrap_signed(target[0] - prev[0].rem_euclid(TAU));
                out[0] = canonical_arclength(prev[0] + delta, d as f64);
                delta.abs()
            }
            Covering::Antipodal(_) => {
                let flip = dot(prev, target) < 0.0;
                for (o, t) in out.iter_mut().zip(target) {
                    *o = if flip { -t } else { *t };
                }
                let m = diff_norm(prev, out);
                let p = sum_norm(prev, out);
                2.0 * m.min(p).atan2(m.max(p))
            }
        }
    }

    /// Base distance between the projection of `prev` and `target`.
    #[inline]
    pub(crate) fn step_length(&self, prev: &[f64], target: &[f64]) -> f64 {
        match *self {
            Covering::UniversalCircle | Covering::DFold(_) => {
                wrap_signed(target[0] - prev[0].rem_euclid(TAU)).abs()
            }
            Covering::Antipodal(_) => self.base_kind().dist(prev, target),
        }
    }

    pub fn deck_identity(&self) -> DeckElement {
        match self {
            Covering::UniversalCircle => DeckElement::IntShift(0),
            Covering::DFold(_) => DeckElement::ModShift(0),
            Covering::Antipodal(_) => DeckElement::Sign(1),
        }
    }

    fn check_deck(&self, tau: DeckElement) -> Result<()> {
        let ok = match (self, tau) {
            (Covering::UniversalCircle, DeckElement::IntShift(_)) => true,
            (Covering::DFold(d), DeckElement::ModShift(k)) => k < *d,
            (Covering::Antipodal(_), DeckElement::Sign(s)) => s == 1 || s == -1,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::mismatch(format!(
                "{tau:?} is not a deck transformation of {self:?}"
            )))
        }
    }

    pub fn deck_apply(&self, tau: DeckElement, pt: &ManifoldPoint) -> Result<ManifoldPoint> {
        self.check_deck(tau)?;
        self.check(Side::Total, pt)?;
        let mut out = vec![0.0; self.total_kind().stride()];
        self.deck_apply_coords(tau, pt.coords(), &mut out);
        Ok(self.total_kind().point(&out))
    }

    #[inline]
    pub(crate) fn deck_apply_coords(&self, tau: DeckElement, c: &[f64], out: &mut [f64]) {
        match (*self, tau) {
            (Covering::UniversalCircle, DeckElement::IntShift(k)) => out[0] = c[0] + TAU * k as f64,
            (Covering::DFold(d), DeckElement::ModShift(k)) => {
                out[0] = canonical_arclength(c[0] + TAU * k as f64, d as f64)
            }
            (Covering::Antipodal(_), DeckElement::Sign(s)) => {
                for (o, x) in out.iter_mut().zip(c) {
                    *o = if s < 0 { -x } else { *x };
                }
            }
            _ => out.copy_from_slice(c),
        }
    }

    /// `τ₁ ∘ τ₂`.
    pub fn deck_compose(&self, t1: DeckElement, t2: DeckElement) -> Result<DeckElement> {
        self.check_deck(t1)?;
        self.check_deck(t2)?;
        Ok(match (*self, t1, t2) {
            (Covering::UniversalCircle, DeckElement::IntShift(a), DeckElement::IntShift(b)) => {
                DeckElement::IntShift(a + b)
            }
            (Covering::DFold(d), DeckElement::ModShift(a), DeckElement::ModShift(b)) => {
                DeckElement::ModShift((a + b) % d)
            }
            (Covering::Antipodal(_), DeckElement::Sign(a), DeckElement::Sign(b)) => {
                DeckElement::Sign(a * b)
            }
            _ => unreachable!("checked above"),
        })
    }

    pub fn deck_inverse(&self, tau: DeckElement) -> Result<DeckElement> {
        self.check_deck(tau)?;
        Ok(match (*self, tau) {
            (_, DeckElement::IntShift(k)) => DeckElement::IntShift(-k),
            (Covering::DFold(d), DeckElement::ModShift(k)) => DeckElement::ModShift((d - k) % d),
            (_, s @ DeckElement::Sign(_)) => s,
            _ => unreachable!("checked above"),
        })
    }

    /// The deck transformation `τ` with `τ(from) = to`.
    pub fn deck_between(&self, from: &ManifoldPoint, to: &ManifoldPoint) -> Result<DeckElement> {
        self.check(Side::Total, from)?;
        self.check(Side::Total, to)?;
        self.deck_between_coords(from.coords(), to.coords())
    }

    pub(crate) fn deck_between_coords(&self, from: &[f64], to: &[f64]) -> Result<DeckElement> {
        let not_in_fiber = || Error::NotInFiber(format!("{from:?} and {to:?}"));
        match *self {
            Covering::UniversalCircle | Covering::DFold(_) => {
                let k = (to[0] - from[0]) / TAU;
                let kr = k.round();
                if (k - kr).abs() > FIBER_TOL {
                    return Err(not_in_fiber());
                }
                Ok(match *self {
                    Covering::DFold(d) => {
                        DeckElement::ModShift((kr as i64).rem_euclid(d as i64) as u32)
                    }
                    _ => DeckElement::IntShift(kr as i64),
                })
            }
            Covering::Antipodal(_) => {
                if diff_norm(from, to) <= FIBER_TOL {
                    Ok(DeckElement::Sign(1))
                } else if sum_norm(from, to) <= FIBER_TOL {
                    Ok(DeckElement::Sign(-1))
                } else {
                    Err(not_in_fiber())
                }
            }
        }
    }

    /// Deck elements, with shifts `|k| <= window` for the universal cover.
    pub fn deck_elements(&self, window: u32) -> Vec<DeckElement> {
        match *self {
            Covering::UniversalCircle => {
                let w = window as i64;
                (-w..=w).map(DeckElement::IntShift).collect()
            }
            Covering::DFold(d) => (0..d).map(DeckElement::ModShift).collect(),
            Covering::Antipodal(_) => vec![DeckElement::Sign(1), DeckElement::Sign(-1)],
        }
    }

    /// The default base point `b`: angle 0 on S¹, the line through `e₁` in ℝP^m.
    pub fn default_base_point(&self) -> ManifoldPoint {
        match *self {
            Covering::UniversalCircle | Covering::DFold(_) => ManifoldPoint::circle(0.0, 1.0),
            Covering::Antipodal(m) => {
                let mut v = vec![0.0; m + 1];
                v[0] = 1.0;
                ManifoldPoint::ProjPoint(v)
            }
        }
    }

    /// The `i`-th fiber point over the default base point (`i` taken modulo
    /// the number of sheets for finite covers).
    pub fn fiber_point(&self, i: i64) -> ManifoldPoint {
        match *self {
            Covering::UniversalCircle => ManifoldPoint::RealLine(TAU * i as f64),
            Covering::DFold(d) => {
                ManifoldPoint::circle(TAU * i.rem_euclid(d as i64) as f64, d as f64)
            }
            Covering::Antipodal(m) => ManifoldPoint::sphere_axis(m + 1, 0, i.rem_euclid(2) == 1),
        }
    }

    /// The two canonical distinct fiber points `(b̃, b̃′)` over the default base point.
    pub fn canonical_fiber_pair(&self) -> (ManifoldPoint, ManifoldPoint) {
        (self.fiber_point(0), self.fiber_point(1))
    }

    /// Point at fraction `lambda` along a minimizing geodesic of Ñ from `a`
    /// to `b`. Ties between two minimizing geodesics are broken towards the
    /// positive direction (circles) or the lowest-index orthogonal axis
    /// (antipodal sphere points).
    pub fn geodesic_total(
        &self,
        a: &ManifoldPoint,
        b: &ManifoldPoint,
        lambda: f64,
    ) -> Result<ManifoldPoint> {
        self.check(Side::Total, a)?;
        self.check(Side::Total, b)?;
        let mut out = vec![0.0; self.total_kind().stride()];
        geodesic_coords(self.total_kind(), a.coords(), b.coords(), lambda, &mut out);
        Ok(self.total_kind().point(&out))
    }
}

/// Minimizing-geodesic interpolation on the total-space point kinds.
pub(crate) fn geodesic_coords(kind: PointKind, a: &[f64], b: &[f64], lambda: f64, out: &mut [f64]) {
    match kind {
        PointKind::Real => out[0] = a[0] + lambda * (b[0] - a[0]),
        PointKind::Circle { radius } => {
            let period = TAU * radius;
            let mut delta = (b[0] - a[0]).rem_euclid(period);
            if delta > period / 2.0 {
                delta -= period;
            }
            out[0] = canonical_arclength(a[0] + lambda * delta, radius);
        }
        PointKind::Sphere { .. } | PointKind::Proj { .. } => {
            let omega = kind.dist(a, b);
            if omega < 1e-15 {
                out.copy_from_slice(a);
                return;
            }
            let antipodal = sum_norm(a, b) < 1e-12;
            if antipodal {
                // Any unit vector orthogonal to a gives a minimizing half great circle.
                let axis = (0..a.len())
                    .min_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs()))
                    .unwrap_or(0);
                let mut w = vec![0.0; a.len()];
                w[axis] = 1.0;
                let c = dot(&w, a);
                w.iter_mut().zip(a).for_each(|(wi, ai)| *wi -= c * ai);
                let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                let (s, co) = (lambda * PI).sin_cos();
                for i in 0..a.len() {
                    out[i] = co * a[i] + s * w[i] / nw;
                }
            } else {
                let so = omega.sin();
                let wa = ((1.0 - lambda) * omega).sin() / so;
                let wb = (lambda * omega).sin() / so;
                for i in 0..a.len() {
                    out[i] = wa * a[i] + wb * b[i];
                }
                let n = out.iter().map(|x| x * x).sum::<f64>().sqrt();
                out.iter_mut().for_each(|x| *x /= n);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(dim: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        v
    }

    #[test]
    fn project_examples() {
        let c = Covering::UniversalCircle;
        assert_eq!(
            c.project(&ManifoldPoint::real(0.0)).unwrap(),
            ManifoldPoint::circle(0.0, 1.0)
        );
        let p = c.project(&ManifoldPoint::real(5.0 * PI / 2.0)).unwrap();
        assert!(p.distance(&ManifoldPoint::circle(PI / 2.0, 1.0)).unwrap() < 1e-15);

        let a = Covering::Antipodal(2);
        let minus_e1 = ManifoldPoint::sphere(&[-1.0, 0.0, 0.0]).unwrap();
        assert_eq!(
            a.project(&minus_e1).unwrap(),
            ManifoldPoint::ProjPoint(e(3, 0))
        );
    }

    #[test]
    fn project_rejects_wrong_variant() {
        let err = Covering::DFold(2)
            .project(&ManifoldPoint::real(1.0))
            .unwrap_err();
        assert!(matches!(err, Error::TypeMismatch(_)));
    }

    #[test]
    fn dist_examples() {
        let c = Covering::DFold(2);
        let d = c
            .dist(
                Side::Base,
                &ManifoldPoint::circle(0.0, 1.0),
                &ManifoldPoint::circle(1.5 * PI, 1.0),
            )
            .unwrap();
        assert!((d - PI / 2.0).abs() < 1e-15);

        let a = Covering::Antipodal(2);
        let p1 = ManifoldPoint::proj(&e(3, 0)).unwrap();
        let p2 = ManifoldPoint::proj(&e(3, 1)).unwrap();
        let p3 = ManifoldPoint::proj(&[-1.0, 0.0, 0.0]).unwrap();
        assert!((a.dist(Side::Base, &p1, &p2).unwrap() - PI / 2.0).abs() < 1e-15);
        assert_eq!(a.dist(Side::Base, &p1, &p3).unwrap(), 0.0);
        assert!(a.dist(Side::Total, &p1, &p2).is_err());
    }

    #[test]
    fn fiber_examples() {
        let f = Covering::DFold(2)
            .fiber(&ManifoldPoint::circle(0.0, 1.0), None)
            .unwrap();
        assert_eq!(
            f,
            vec![
                ManifoldPoint::circle(0.0, 2.0),
                ManifoldPoint::circle(TAU, 2.0)
            ]
        );

        let f = Covering::Antipodal(1)
            .fiber(&ManifoldPoint::proj(&[1.0, 0.0]).unwrap(), None)
            .unwrap();
        assert_eq!(
            f,
            vec![
                ManifoldPoint::SpherePoint(vec![1.0, 0.0]),
                ManifoldPoint::SpherePoint(vec![-1.0, -0.0])
            ]
        );

        let f = Covering::UniversalCircle
            .fiber(&ManifoldPoint::circle(0.0, 1.0), Some(1))
            .unwrap();
        assert_eq!(
            f,
            vec![
                ManifoldPoint::real(-TAU),
                ManifoldPoint::real(0.0),
                ManifoldPoint::real(TAU)
            ]
        );
        assert!(matches!(
            Covering::UniversalCircle.fiber(&ManifoldPoint::circle(0.0, 1.0), None),
            Err(Error::MissingWindow)
        ));
    }

    #[test]
    fn local_lift_examples() {
        let u = Covering::UniversalCircle;
        let l = u
            .local_lift(
                &ManifoldPoint::real(0.0),
                &ManifoldPoint::circle(PI / 2.0, 1.0),
            )
            .unwrap();
        assert!((l.coords()[0] - PI / 2.0).abs() < 1e-15);
        let l = u
            .local_lift(
                &ManifoldPoint::real(TAU),
                &ManifoldPoint::circle(1.5 * PI, 1.0),
            )
            .unwrap();
        assert!((l.coords()[0] - (TAU - PI / 2.0)).abs() < 1e-14);

        // Brute force over the fiber: the unique point within arclength π of the base.
        let c = Covering::DFold(2);
        let base = ManifoldPoint::circle(0.0, 2.0);
        let target = ManifoldPoint::circle(PI / 2.0, 1.0);
        let near: Vec<_> = c
            .fiber(&target, None)
            .unwrap()
            .into_iter()
            .filter(|w| c.dist(Side::Total, &base, w).unwrap() < PI)
            .collect();
        assert_eq!(near.len(), 1);
        let l = c.local_lift(&base, &target).unwrap();
        assert!(c.dist(Side::Total, &l, &near[0]).unwrap() < 1e-14);
        assert!((l.coords()[0] - PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn local_lift_refuses_long_steps() {
        let u = Covering::UniversalCircle;
        let err = u
            .local_lift(&ManifoldPoint::real(0.0), &ManifoldPoint::circle(PI, 1.0))
            .unwrap_err();
        assert!(matches!(err, Error::Resolution { .. }));
        let a = Covering::Antipodal(1);
        let base = ManifoldPoint::sphere(&[1.0, 0.0]).unwrap();
        let target = ManifoldPoint::proj(&[0.0, 1.0]).unwrap();
        assert!(a.local_lift(&base, &target).is_err());
    }

    #[test]
    fn deck_examples() {
        let u = Covering::UniversalCircle;
        let p = u
            .deck_apply(DeckElement::IntShift(1), &ManifoldPoint::real(0.3))
            .unwrap();
        assert_eq!(p, ManifoldPoint::real(0.3 + TAU));

        let a = Covering::Antipodal(2);
        let p = a
            .deck_apply(DeckElement::Sign(-1), &ManifoldPoint::SpherePoint(e(3, 2)))
            .unwrap();
        assert_eq!(p.coords(), &[-0.0, -0.0, -1.0]);

        let d = Covering::DFold(3);
        assert_eq!(
            d.deck_compose(DeckElement::ModShift(2), DeckElement::ModShift(2))
                .unwrap(),
            DeckElement::ModShift(1)
        );
        assert!(d
            .deck_compose(DeckElement::Sign(1), DeckElement::ModShift(0))
            .is_err());
        assert!(d
            .deck_apply(DeckElement::ModShift(3), &ManifoldPoint::circle(0.0, 3.0))
            .is_err());
    }

    #[test]
    fn group_laws() {
        for cover in [
            Covering::UniversalCircle,
            Covering::DFold(3),
            Covering::Antipodal(2),
        ] {
            let els = cover.deck_elements(3);
            let id = cover.deck_identity();
            for &a in &els {
                assert_eq!(cover.deck_compose(a, id).unwrap(), a);
                let inv = cover.deck_inverse(a).unwrap();
                assert_eq!(cover.deck_compose(a, inv).unwrap(), id);
                for &b in &els {
                    for &c in &els {
                        let ab_c = cover
                            .deck_compose(cover.deck_compose(a, b).unwrap(), c)
                            .unwrap();
                        let a_bc = cover
                            .deck_compose(a, cover.deck_compose(b, c).unwrap())
                            .unwrap();
                        assert_eq!(ab_c, a_bc);
                    }
                }
            }
        }
    }

    #[test]
    fn proj_canonical_form_is_antipodal_invariant() {
        let v = [0.0, -0.3, 0.4, 0.5];
        let w: Vec<f64> = v.iter().map(|x| -x).collect();
        assert_eq!(
            ManifoldPoint::proj(&v).unwrap(),
            ManifoldPoint::proj(&w).unwrap()
        );
        // Coordinates below the zero threshold do not decide the sign.
        let tiny = [1e-13, 0.6, 0.8];
        let p = ManifoldPoint::proj(&tiny).unwrap();
        assert!(p.coords()[1] > 0.0);
    }

    #[test]
    fn arclength_ties_resolve_to_zero() {
        assert_eq!(canonical_arclength(-1e-300, 1.0), 0.0);
        assert_eq!(canonical_arclength(TAU, 1.0), 0.0);
        assert_eq!(canonical_arclength(-0.0, 2.0), 0.0);
    }

    #[test]
    fn dfold_constants() {
        let c = Covering::DFold(3);
        assert_eq!(c.inj(), PI);
        assert!((c.diam_total() - 3.0 * PI).abs() < 1e-15);
        assert_eq!(Covering::Antipodal(4).inj(), PI / 2.0);
        assert_eq!(Covering::Antipodal(4).diam_total(), PI);
        assert!(Covering::UniversalCircle.diam_total().is_infinite());
        assert!(Covering::DFold(1).validate().is_err());
    }

    #[test]
    fn geodesic_profile_endpoints() {
        for cover in [
            Covering::UniversalCircle,
            Covering::DFold(2),
            Covering::Antipodal(2),
        ] {
            let (a, b) = cover.canonical_fiber_pair();
            let start = cover.geodesic_total(&a, &b, 0.0).unwrap();
            let end = cover.geodesic_total(&a, &b, 1.0).unwrap();
            let mid = cover.geodesic_total(&a, &b, 0.5).unwrap();
            let total = cover.dist(Side::Total, &a, &b).unwrap();
            assert!(cover.dist(Side::Total, &start, &a).unwrap() < 1e-12);
            assert!(cover.dist(Side::Total, &end, &b).unwrap() < 1e-12);
            assert!((cover.dist(Side::Total, &a, &mid).unwrap() - total / 2.0).abs() < 1e-12);
        }
    }

    fn total_point(cover: Covering) -> impl Strategy<Value = ManifoldPoint> {
        match cover {
            Covering::UniversalCircle => (-30.0..30.0f64).prop_map(ManifoldPoint::real).boxed(),
            Covering::DFold(d) => (0.0..TAU * d as f64)
                .prop_map(move |t| ManifoldPoint::circle(t, d as f64))
                .boxed(),
            Covering::Antipodal(m) => proptest::collection::vec(-1.0..1.0f64, m + 1)
                .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
                .prop_map(|v| ManifoldPoint::sphere(&v).unwrap())
                .boxed(),
        }
    }

    fn covers() -> impl Strategy<Value = Covering> {
        prop_oneof![
            Just(Covering::UniversalCircle),
            Just(Covering::DFold(2)),
            Just(Covering::DFold(3)),
            Just(Covering::Antipodal(1)),
            Just(Covering::Antipodal(2)),
        ]
    }

    proptest! {
        #[test]
        fn non_expansive_and_locally_isometric(
            (cover, a, b) in covers().prop_flat_map(|c| (Just(c), total_point(c), total_point(c)))
        ) {
            let dt = cover.dist(Side::Total, &a, &b).unwrap();
            let db = cover.dist(Side::Base, &cover.project(&a).unwrap(), &cover.project(&b).unwrap()).unwrap();
            prop_assert!(db <= dt + 1e-10);
            if dt < cover.inj() {
                prop_assert!((db - dt).abs() <= 1e-10, "{} vs {}", db, dt);
            }
        }

        #[test]
        fn fiber_is_deck_transitive(
            (cover, a) in covers().prop_flat_map(|c| (Just(c), total_point(c)))
        ) {
            let base = cover.project(&a).unwrap();
            let fiber = cover.fiber(&base, Some(2)).unwrap();
            for x in &fiber {
                prop_assert!(cover.dist(Side::Base, &cover.project(x).unwrap(), &base).unwrap() < 1e-12);
                for y in &fiber {
                    let tau = cover.deck_between(x, y).unwrap();
                    let moved = cover.deck_apply(tau, x).unwrap();
                    prop_assert!(cover.dist(Side::Total, &moved, y).unwrap() < 1e-12);
                }
            }
        }

        #[test]
        fn local_lift_round_trip(
            (cover, a, frac, dir) in covers().prop_flat_map(|c| (Just(c), total_point(c), 0.0..0.999f64, 0.0..TAU))
        ) {
            let here = cover.project(&a).unwrap();
            prop_assert_eq!(cover.local_lift(&a, &here).unwrap(), a.clone());
            // Walk `frac * inj` away from `here` in base space.
            let step = frac * (cover.inj() - 2.0 * TOL_INJ);
            let target = match cover {
                Covering::Antipodal(m) => {
                    let v = here.coords();
                    let mut w: Vec<f64> = (0..=m).map(|k| (dir * (k as f64 + 1.0)).sin()).collect();
                    let c = dot(&w, v);
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
                    let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if nw < 1e-6 { return Ok(()); }
                    let pt: Vec<f64> = v.iter().zip(&w).map(|(vi, wi)| step.cos() * vi + step.sin() * wi / nw).collect();
                    ManifoldPoint::proj(&pt).unwrap()
                }
                _ => ManifoldPoint::circle(here.coords()[0] + if dir < PI { step } else { -step }, 1.0),
            };
            let lifted = cover.local_lift(&a, &target).unwrap();
            let back = cover.project(&lifted).unwrap();
            prop_assert!(cover.dist(Side::Base, &back, &target).unwrap() <= 1e-12);
            let d_total = cover.dist(Side::Total, &a, &lifted).unwrap();
            let d_base = cover.dist(Side::Base, &here, &target).unwrap();
            prop_assert!((d_total - d_base).abs() <= 1e-12);
        }
    }
}
