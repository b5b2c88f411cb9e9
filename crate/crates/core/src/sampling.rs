//! Uniform cell-centre discretizations of manifold-valued maps on intervals
//! and cubes, subset selectors and the JSON map format.
//!
//! Samples are stored packed: a map of `N` cells with point kind `K` holds
//! `N * K.stride()` coordinates. Grid cells are indexed with axis 0 varying
//! fastest, so a run of consecutive linear indices is a line along axis 0.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{canonical_arclength, canonicalize_proj, ManifoldPoint, PointKind};

/// Norm deviation tolerated for sphere and projective samples.
pub const UNIT_TOL: f64 = 1e-12;

/// Vortex descriptors are undefined closer than this to their centre.
pub const VORTEX_CORE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct FractionalParams {
    pub s: f64,
    pub p: f64,
    pub sp: f64,
}

#[derive(Deserialize)]
struct RawParams {
    s: f64,
    p: f64,
}

impl TryFrom<RawParams> for FractionalParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        FractionalParams::new(r.s, r.p)
    }
}

impl FractionalParams {
    pub fn new(s: f64, p: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::params(format!("s must lie in (0,1), got {s}")));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::params(format!("p must be finite and >= 1, got {p}")));
        }
        Ok(Self { s, p, sp: s * p })
    }

    /// `t^p`, using integer powers when `p` is integral.
    #[inline]
    pub fn pow(&self, t: f64) -> f64 {
        if self.p == self.p.trunc() && self.p <= 64.0 {
            t.powi(self.p as i32)
        } else {
            t.powf(self.p)
        }
    }
}

/// Closed-form maps that can be sampled at cell centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MapDescriptor {
    Constant {
        point: ManifoldPoint,
    },
    /// `offset + coeffs · x` on ℝ.
    RealLinear {
        coeffs: Vec<f64>,
        offset: f64,
    },
    /// Arclength `offset + coeffs · x` on the circle of radius `radius`.
    AngleLinear {
        coeffs: Vec<f64>,
        offset: f64,
        radius: f64,
    },
    /// `x ↦ d (cos ξx, sin ξx)` on the circle of radius `d`, in arclength form.
    Helix {
        d: u32,
        xi: f64,
    },
    /// The line through `(cos θ, sin θ, 0, …) ∈ ℝ^dim` with `θ = offset + coeffs · x`.
    /// A full turn of the projective line corresponds to `θ` advancing by π.
    ProjGreatCircle {
        coeffs: Vec<f64>,
        offset: f64,
        dim: usize,
    },
    /// `y ↦ f(y/|y|)` in the plane of the first two coordinates, where `f`
    /// winds `winding` times around S¹ or, for `proj_dim = Some(k)`, around
    /// the generator of π₁(ℝP^{k-1}) (half turns of a great circle).
    Vortex {
        winding: i64,
        center: Vec<f64>,
        #[serde(default)]
        proj_dim: Option<usize>,
    },
}

impl MapDescriptor {
    pub fn kind(&self) -> PointKind {
        match self {
            MapDescriptor::Constant { point } => point.kind(),
            MapDescriptor::RealLinear { .. } => PointKind::Real,
            MapDescriptor::AngleLinear { radius, .. } => PointKind::Circle { radius: *radius },
            MapDescriptor::Helix { d, .. } => PointKind::Circle { radius: *d as f64 },
            MapDescriptor::ProjGreatCircle { dim, .. } => PointKind::Proj { dim: *dim },
            MapDescriptor::Vortex { proj_dim, .. } => match proj_dim {
                Some(dim) => PointKind::Proj { dim: *dim },
                None => PointKind::Circle { radius: 1.0 },
            },
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        let need = |len: usize, what: &str| {
            if len == m {
                Ok(())
            } else {
                Err(Error::params(format!(
                    "{what} has length {len}, domain dimension is {m}"
                )))
            }
        };
        match self {
            MapDescriptor::Constant { .. } => Ok(()),
            MapDescriptor::RealLinear { coeffs, .. } => need(coeffs.len(), "coeffs"),
            MapDescriptor::AngleLinear { coeffs, radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::params("circle radius must be positive"));
                }
                need(coeffs.len(), "coeffs")
            }
            MapDescriptor::ProjGreatCircle { coeffs, dim, .. } => {
                if *dim < 2 {
                    return Err(Error::params("projective target needs dimension >= 2"));
                }
                need(coeffs.len(), "coeffs")
            }
            MapDescriptor::Helix { d, xi } => {
                if *d < 1 {
                    return Err(Error::params("helix needs d >= 1"));
                }
                if *xi == 0.0 || !xi.is_finite() {
                    return Err(Error::params("helix needs a finite nonzero xi"));
                }
                need(1, "helix domain")
            }
            MapDescriptor::Vortex {
                center, proj_dim, ..
            } => {
                if m < 2 {
                    return Err(Error::params("vortex maps need m >= 2"));
                }
                if matches!(proj_dim, Some(k) if *k < 2) {
                    return Err(Error::params(
                        "projective vortex target needs dimension >= 2",
                    ));
                }
                need(center.len(), "vortex center")
            }
        }
    }

    /// Canonical coordinates at `x`, or `None` where the map is undefined.
    pub fn eval(&self, x: &[f64], out: &mut [f64]) -> Option<()> {
        match self {
            MapDescriptor::Constant { point } => out.copy_from_slice(point.coords()),
            MapDescriptor::RealLinear { coeffs, offset } => {
                out[0] = offset + coeffs.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>();
            }
            MapDescriptor::AngleLinear {
                coeffs,
                offset,
                radius,
            } => {
                let t = offset + coeffs.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>();
                out[0] = canonical_arclength(t, *radius);
            }
            MapDescriptor::ProjGreatCircle { coeffs, offset, .. } => {
                let t = offset + coeffs.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>();
                out.iter_mut().for_each(|c| *c = 0.0);
                let (s, c) = t.sin_cos();
                out[0] = c;
                out[1] = s;
                canonicalize_proj(out);
            }
            MapDescriptor::Helix { d, xi } => {
                let d = *d as f64;
                out[0] = canonical_arclength(d * xi * x[0], d);
            }
            MapDescriptor::Vortex {
                winding,
                center,
                proj_dim,
            } => {
                let y0 = x[0] - center[0];
                let y1 = x[1] - center[1];
                if y0.hypot(y1) < VORTEX_CORE {
                    return None;
                }
                let phi = y1.atan2(y0);
                let w = *winding as f64;
                match proj_dim {
                    None => out[0] = canonical_arclength(w * phi, 1.0),
                    Some(_) => {
                        out.iter_mut().for_each(|c| *c = 0.0);
                        let (s, c) = (w * phi / 2.0).sin_cos();
                        out[0] = c;
                        out[1] = s;
                        canonicalize_proj(out);
                    }
                }
            }
        }
        Some(())
    }
}

/// Validates and canonicalizes packed coordinates of the given kind.
pub fn canonicalize_coords(kind: PointKind, c: &mut [f64]) -> Result<()> {
    if c.iter().any(|x| !x.is_finite()) {
        return Err(Error::params("non-finite sample coordinate"));
    }
    match kind {
        PointKind::Real => {}
        PointKind::Circle { radius } => c[0] = canonical_arclength(c[0], radius),
        PointKind::Sphere { .. } | PointKind::Proj { .. } => {
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::params(format!(
                    "sample of norm {norm} is not a unit vector"
                )));
            }
            if (norm - 1.0).abs() > UNIT_TOL {
                c.iter_mut().for_each(|x| *x /= norm);
            }
            if matches!(kind, PointKind::Proj { .. }) {
                canonicalize_proj(c);
            }
        }
    }
    Ok(())
}

fn pack_points(points: &[ManifoldPoint]) -> Result<(PointKind, Vec<f64>)> {
    let first = points
        .first()
        .ok_or_else(|| Error::params("no sample values"))?;
    let kind = first.kind();
    let mut coords = Vec::with_capacity(points.len() * kind.stride());
    for p in points {
        if p.kind() != kind {
            return Err(Error::mismatch(format!(
                "mixed sample kinds {kind:?} and {:?}",
                p.kind()
            )));
        }
        let start = coords.len();
        coords.extend_from_slice(p.coords());
        canonicalize_coords(kind, &mut coords[start..])?;
    }
    Ok((kind, coords))
}

/// Samples `x_i = a + (i + ½)(b − a)/n` of a map from an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub kind: PointKind,
    pub coords: Vec<f64>,
    /// `true` marks a selected (defined) cell; `None` selects every cell.
    pub mask: Option<Vec<bool>>,
}

impl SampledPath {
    pub fn new(a: f64, b: f64, kind: PointKind, coords: Vec<f64>) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::params(format!(
                "interval ({a}, {b}) is empty or unbounded"
            )));
        }
        let stride = kind.stride();
        if !coords.len().is_multiple_of(stride) {
            return Err(Error::params(
                "coordinate count is not a multiple of the point stride",
            ));
        }
        let n = coords.len() / stride;
        if n < 2 {
            return Err(Error::params(format!(
                "a sampled path needs n >= 2 cells, got {n}"
            )));
        }
        let mut coords = coords;
        for c in coords.chunks_mut(stride) {
            canonicalize_coords(kind, c)?;
        }
        Ok(Self {
            a,
            b,
            n,
            kind,
            coords,
            mask: None,
        })
    }

    pub fn from_points(a: f64, b: f64, points: &[ManifoldPoint]) -> Result<Self> {
        let (kind, coords) = pack_points(points)?;
        Self::new(a, b, kind, coords)
    }

    /// Builds a path whose coordinates are already canonical.
    pub(crate) fn from_raw(a: f64, b: f64, kind: PointKind, coords: Vec<f64>) -> Self {
        let n = coords.len() / kind.stride();
        Self {
            a,
            b,
            n,
            kind,
            coords,
            mask: None,
        }
    }

    #[inline]
    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.a + (i as f64 + 0.5) * self.h()
    }

    #[inline]
    pub fn value(&self, i: usize) -> &[f64] {
        let s = self.kind.stride();
        &self.coords[i * s..(i + 1) * s]
    }

    pub fn point(&self, i: usize) -> ManifoldPoint {
        self.kind.point(self.value(i))
    }

    pub fn points(&self) -> Vec<ManifoldPoint> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    #[inline]
    pub fn is_selected(&self, i: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[i])
    }

    pub fn selected_count(&self) -> usize {
        self.mask
            .as_ref()
            .map_or(self.n, |m| m.iter().filter(|&&b| b).count())
    }

    /// The same samples traversed backwards on the same interval.
    pub fn reversed(&self) -> Self {
        let s = self.kind.stride();
        let coords = self.coords.chunks(s).rev().flatten().copied().collect();
        let mask = self
            .mask
            .as_ref()
            .map(|m| m.iter().rev().copied().collect());
        Self {
            coords,
            mask,
            ..self.clone()
        }
    }

    pub fn with_values(&self, kind: PointKind, coords: Vec<f64>) -> Self {
        Self {
            kind,
            coords,
            ..self.clone()
        }
    }

    pub fn restrict(&self, selector: &SubsetSelector) -> Result<Self> {
        selector.validate(1)?;
        let mask: Vec<bool> = (0..self.n)
            .map(|i| self.is_selected(i) && selector.contains(&[self.center(i)], i))
            .collect();
        if !mask.iter().any(|&b| b) {
            return Err(Error::EmptySelection(format!("{selector:?}")));
        }
        Ok(Self {
            mask: Some(mask),
            ..self.clone()
        })
    }
}

/// Samples of a map from the cube `origin + (0, side)^m` at the centres of
/// its `n^m` congruent cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    pub m: usize,
    pub origin: Vec<f64>,
    pub side: f64,
    pub n: usize,
    pub kind: PointKind,
    pub coords: Vec<f64>,
    /// `true` marks a defined (selected) cell; `None` means every cell.
    pub mask: Option<Vec<bool>>,
}

impl GridMap {
    pub fn new(
        origin: Vec<f64>,
        side: f64,
        n: usize,
        kind: PointKind,
        coords: Vec<f64>,
        mask: Option<Vec<bool>>,
    ) -> Result<Self> {
        let m = origin.len();
        check_cube(m, side, n)?;
        let cells = n
            .checked_pow(m as u32)
            .ok_or_else(|| Error::params("grid too large"))?;
        let stride = kind.stride();
        if coords.len() != cells * stride {
            return Err(Error::params(format!(
                "expected {} coordinates for {cells} cells, got {}",
                cells * stride,
                coords.len()
            )));
        }
        if let Some(mk) = &mask {
            if mk.len() != cells {
                return Err(Error::params("mask length differs from the cell count"));
            }
        }
        let mut coords = coords;
        for (i, c) in coords.chunks_mut(stride).enumerate() {
            if mask.as_ref().is_none_or(|mk| mk[i]) {
                canonicalize_coords(kind, c)?;
            }
        }
        Ok(Self {
            m,
            origin,
            side,
            n,
            kind,
            coords,
            mask,
        })
    }

    pub(crate) fn from_raw(
        origin: Vec<f64>,
        side: f64,
        n: usize,
        kind: PointKind,
        coords: Vec<f64>,
        mask: Option<Vec<bool>>,
    ) -> Self {
        Self {
            m: origin.len(),
            origin,
            side,
            n,
            kind,
            coords,
            mask,
        }
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.side / self.n as f64
    }

    #[inline]
    pub fn cell_count(&self) -> usize {
        self.n.pow(self.m as u32)
    }

    pub fn multi_index(&self, mut lin: usize) -> Vec<usize> {
        let mut idx = vec![0; self.m];
        for k in idx.iter_mut() {
            *k = lin % self.n;
            lin /= self.n;
        }
        idx
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().rev().fold(0, |acc, &k| acc * self.n + k)
    }

    /// Linear-index offset of one step along `axis`.
    #[inline]
    pub fn axis_stride(&self, axis: usize) -> usize {
        self.n.pow(axis as u32)
    }

    pub fn center_into(&self, lin: usize, out: &mut [f64]) {
        let h = self.h();
        let mut rest = lin;
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.origin[k] + ((rest % self.n) as f64 + 0.5) * h;
            rest /= self.n;
        }
    }

    pub fn center(&self, lin: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.m];
        self.center_into(lin, &mut c);
        c
    }

    #[inline]
    pub fn value(&self, lin: usize) -> &[f64] {
        let s = self.kind.stride();
        &self.coords[lin * s..(lin + 1) * s]
    }

    pub fn point(&self, lin: usize) -> Option<ManifoldPoint> {
        self.is_defined(lin)
            .then(|| self.kind.point(self.value(lin)))
    }

    #[inline]
    pub fn is_defined(&self, lin: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[lin])
    }

    pub fn defined_count(&self) -> usize {
        self.mask
            .as_ref()
            .map_or(self.cell_count(), |m| m.iter().filter(|&&b| b).count())
    }

    pub fn masked_count(&self) -> usize {
        self.cell_count() - self.defined_count()
    }

    /// Fraction of the cube's measure carried by masked cells.
    pub fn masked_fraction(&self) -> f64 {
        self.masked_count() as f64 / self.cell_count() as f64
    }

    pub fn with_values(&self, kind: PointKind, coords: Vec<f64>) -> Self {
        Self {
            kind,
            coords,
            ..self.clone()
        }
    }

    pub fn selection(&self, selector: &SubsetSelector) -> Result<Vec<bool>> {
        selector.validate(self.m)?;
        let mut x = vec![0.0; self.m];
        Ok((0..self.cell_count())
            .map(|lin| {
                self.center_into(lin, &mut x);
                self.is_defined(lin) && selector.contains(&x, lin)
            })
            .collect())
    }

    /// Masks every cell outside `selector`.
    pub fn restrict(&self, selector: &SubsetSelector) -> Result<Self> {
        if matches!(selector, SubsetSelector::WholeDomain) {
            return Ok(self.clone());
        }
        let mask = self.selection(selector)?;
        if !mask.iter().any(|&b| b) {
            return Err(Error::EmptySelection(format!("{selector:?}")));
        }
        Ok(Self {
            mask: Some(mask),
            ..self.clone()
        })
    }
}

fn check_cube(m: usize, side: f64, n: usize) -> Result<()> {
    if m < 1 {
        return Err(Error::params("domain dimension must be >= 1"));
    }
    if !(side > 0.0 && side.is_finite()) {
        return Err(Error::params(format!(
            "cube side must be positive, got {side}"
        )));
    }
    if n < 2 {
        return Err(Error::params(format!(
            "need n >= 2 cells per axis, got {n}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SubsetSelector {
    WholeDomain,
    /// Open ball `|x − center| < radius`.
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Open box `lo < x < hi` componentwise.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// Open annulus `r_in < |x − center| < r_out`.
    Annulus {
        center: Vec<f64>,
        r_in: f64,
        r_out: f64,
    },
    /// Explicit linear cell indices.
    CellMask {
        cells: Vec<usize>,
    },
}

impl SubsetSelector {
    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            SubsetSelector::WholeDomain | SubsetSelector::CellMask { .. } => Ok(()),
            SubsetSelector::Ball { center, radius } => {
                if center.len() != m {
                    return Err(Error::params(
                        "ball centre dimension differs from the domain",
                    ));
                }
                if !(*radius > 0.0) {
                    return Err(Error::params("ball radius must be positive"));
                }
                Ok(())
            }
            SubsetSelector::Box { lo, hi } => {
                if lo.len() != m || hi.len() != m {
                    return Err(Error::params(
                        "box corners differ from the domain dimension",
                    ));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::params("box needs lo < hi in every coordinate"));
                }
                Ok(())
            }
            SubsetSelector::Annulus {
                center,
                r_in,
                r_out,
            } => {
                if center.len() != m {
                    return Err(Error::params(
                        "annulus centre dimension differs from the domain",
                    ));
                }
                if !(*r_in >= 0.0) || r_in > r_out {
                    return Err(Error::params(format!(
                        "annulus needs 0 <= r_in <= r_out, got r_in = {r_in}, r_out = {r_out}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Whether the cell with centre `x` and linear index `lin` is selected.
    pub fn contains(&self, x: &[f64], lin: usize) -> bool {
        let dist = |c: &[f64]| {
            x.iter()
                .zip(c)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };
        match self {
            SubsetSelector::WholeDomain => true,
            SubsetSelector::Ball { center, radius } => dist(center) < *radius,
            SubsetSelector::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| a < v && v < b),
            SubsetSelector::Annulus {
                center,
                r_in,
                r_out,
            } => {
                let r = dist(center);
                *r_in < r && r < *r_out
            }
            SubsetSelector::CellMask { cells } => cells.contains(&lin),
        }
    }

    pub fn label(&self) -> String {
        match self {
            SubsetSelector::WholeDomain => "whole".into(),
            SubsetSelector::Ball { radius, .. } => format!("ball(r={radius})"),
            SubsetSelector::Box { lo, hi } => format!("box({lo:?},{hi:?})"),
            SubsetSelector::Annulus { r_in, r_out, .. } => format!("annulus({r_in},{r_out})"),
            SubsetSelector::CellMask { cells } => format!("cells({})", cells.len()),
        }
    }
}

pub fn sample_path(desc: &MapDescriptor, a: f64, b: f64, n: usize) -> Result<SampledPath> {
    desc.validate(1)?;
    if n < 2 {
        return Err(Error::params(format!(
            "a sampled path needs n >= 2 cells, got {n}"
        )));
    }
    if !(a < b) {
        return Err(Error::params(format!("interval ({a}, {b}) is empty")));
    }
    let kind = desc.kind();
    let s = kind.stride();
    let h = (b - a) / n as f64;
    let mut coords = vec![0.0; n * s];
    for (i, out) in coords.chunks_mut(s).enumerate() {
        let x = a + (i as f64 + 0.5) * h;
        if desc.eval(&[x], out).is_none() {
            return Err(Error::params(format!("descriptor undefined at x = {x}")));
        }
    }
    Ok(SampledPath::from_raw(a, b, kind, coords))
}

/// Samples `desc` on `origin + (0, side)^m`; cells where the descriptor is
/// undefined are masked.
pub fn sample_grid(desc: &MapDescriptor, origin: &[f64], side: f64, n: usize) -> Result<GridMap> {
    let m = origin.len();
    check_cube(m, side, n)?;
    desc.validate(m)?;
    let kind = desc.kind();
    let s = kind.stride();
    let cells = n
        .checked_pow(m as u32)
        .ok_or_else(|| Error::params("grid too large"))?;
    let mut grid = GridMap::from_raw(origin.to_vec(), side, n, kind, vec![0.0; cells * s], None);
    let mut mask = vec![true; cells];
    let mut x = vec![0.0; m];
    for lin in 0..cells {
        grid.center_into(lin, &mut x);
        if desc
            .eval(&x, &mut grid.coords[lin * s..(lin + 1) * s])
            .is_none()
        {
            mask[lin] = false;
        }
    }
    if mask.iter().any(|&b| !b) {
        grid.mask = Some(mask);
    }
    Ok(grid)
}

/// Convenience: the vortex `f(y/|y|)` of winding `w` on the square
/// `[-side/2, side/2]^2` centred at the origin.
pub fn centered_vortex(
    winding: i64,
    side: f64,
    n: usize,
    proj_dim: Option<usize>,
) -> Result<GridMap> {
    let desc = MapDescriptor::Vortex {
        winding,
        center: vec![0.0, 0.0],
        proj_dim,
    };
    sample_grid(&desc, &[-side / 2.0, -side / 2.0], side, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Cube { origin: Vec<f64>, side: f64 },
}

/// On-disk shape of a sampled map. Masked cells are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFile {
    pub domain: Domain,
    pub n: usize,
    pub m: usize,
    pub point_kind: PointKind,
    pub values: Vec<Option<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampledMap {
    Path(SampledPath),
    Grid(GridMap),
}

impl From<&SampledPath> for MapFile {
    fn from(p: &SampledPath) -> Self {
        MapFile {
            domain: Domain::Interval { a: p.a, b: p.b },
            n: p.n,
            m: 1,
            point_kind: p.kind,
            values: (0..p.n)
                .map(|i| p.is_selected(i).then(|| p.value(i).to_vec()))
                .collect(),
        }
    }
}

impl From<&GridMap> for MapFile {
    fn from(g: &GridMap) -> Self {
        MapFile {
            domain: Domain::Cube {
                origin: g.origin.clone(),
                side: g.side,
            },
            n: g.n,
            m: g.m,
            point_kind: g.kind,
            values: (0..g.cell_count())
                .map(|i| g.is_defined(i).then(|| g.value(i).to_vec()))
                .collect(),
        }
    }
}

impl MapFile {
    pub fn into_map(self) -> Result<SampledMap> {
        let stride = self.point_kind.stride();
        let mut coords = Vec::with_capacity(self.values.len() * stride);
        let mut mask = Vec::with_capacity(self.values.len());
        for v in &self.values {
            match v {
                Some(c) if c.len() == stride => {
                    coords.extend_from_slice(c);
                    mask.push(true);
                }
                Some(c) => {
                    return Err(Error::params(format!(
                        "value with {} coordinates for point kind {:?}",
                        c.len(),
                        self.point_kind
                    )))
                }
                None => {
                    coords.extend(std::iter::repeat_n(0.0, stride));
                    mask.push(false);
                }
            }
        }
        let all = mask.iter().all(|&b| b);
        match self.domain {
            Domain::Interval { a, b } => {
                if self.m != 1 || self.values.len() != self.n {
                    return Err(Error::params("interval map needs m = 1 and n values"));
                }
                if !all {
                    // Undefined samples are replaced by a defined neighbour
                    // value and deselected.
                    let first = mask
                        .iter()
                        .position(|&b| b)
                        .ok_or_else(|| Error::EmptySelection("all path samples are null".into()))?;
                    for i in 0..self.n {
                        if !mask[i] {
                            let src = if i < first { first } else { i - 1 };
                            coords.copy_within(src * stride..(src + 1) * stride, i * stride);
                        }
                    }
                }
                let mut path = SampledPath::new(a, b, self.point_kind, coords)?;
                if !all {
                    path.mask = Some(mask);
                }
                Ok(SampledMap::Path(path))
            }
            Domain::Cube { origin, side } => {
                if origin.len() != self.m {
                    return Err(Error::params("cube origin dimension differs from m"));
                }
                let grid = GridMap::new(
                    origin,
                    side,
                    self.n,
                    self.point_kind,
                    coords,
                    (!all).then_some(mask),
                )?;
                Ok(SampledMap::Grid(grid))
            }
        }
    }
}

/// The angle `2π x` sampled on `(0,1)`, a loop of winding `w` when scaled.
pub fn winding_angle(w: i64) -> MapDescriptor {
    MapDescriptor::AngleLinear {
        coeffs: vec![2.0 * PI * w as f64],
        offset: 0.0,
        radius: 1.0,
    }
}
