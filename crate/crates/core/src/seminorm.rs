//! Cell-centre quadrature of the Gagliardo seminorm
//!
//! `|u|^p = ∫∫ d(u(x), u(y))^p / |x − y|^{m+sp} dx dy`,
//!
//! of the oscillation functional on intervals and of the directional
//! (line-by-line) seminorm on cubes. Only the diagonal `i = j` is excluded.
//!
//! Every sum is accumulated in a fixed order with compensated partials:
//! 1-D sums go column by column (`j` ascending, `i < j` ascending), m-D sums
//! go transverse offset by transverse offset. Results do not depend on the
//! number of threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointKind;
use crate::sampling::{FractionalParams, GridMap, SampledPath, SubsetSelector};
use crate::sum::{compensated_sum, merge_ordered, NeumaierSum};

/// Default cap on pair work for m-D sums.
pub const DEFAULT_PAIR_BUDGET: u64 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Geodesic,
    /// Euclidean distance of the standard embedding.
    Chordal,
}

impl Metric {
    #[inline]
    pub fn dist(&self, kind: PointKind, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Geodesic => kind.dist(a, b),
            Metric::Chordal => kind.chordal(a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeminormKind {
    Plain,
    Oscillation,
    Directional,
}

impl SeminormKind {
    pub fn label(&self) -> &'static str {
        match self {
            SeminormKind::Plain => "plain",
            SeminormKind::Oscillation => "oscillation",
            SeminormKind::Directional => "directional",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormOptions {
    pub metric: Metric,
    pub subset: SubsetSelector,
    pub pair_budget: u64,
}

impl Default for SeminormOptions {
    fn default() -> Self {
        Self {
            metric: Metric::Geodesic,
            subset: SubsetSelector::WholeDomain,
            pair_budget: DEFAULT_PAIR_BUDGET,
        }
    }
}

impl SeminormOptions {
    pub fn on(subset: SubsetSelector) -> Self {
        Self {
            subset,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormReport {
    pub kind: SeminormKind,
    /// The p-th power of the seminorm.
    pub value_p: f64,
    pub params: FractionalParams,
    pub n: usize,
    pub m: usize,
    pub subset: SubsetSelector,
    pub metric: Metric,
}

impl SeminormReport {
    pub const CSV_HEADER: [&'static str; 6] = ["kind", "s", "p", "n", "subset", "value_p"];

    pub fn csv_row(&self) -> [String; 6] {
        [
            self.kind.label().to_string(),
            self.params.s.to_string(),
            self.params.p.to_string(),
            self.n.to_string(),
            self.subset.label(),
            self.value_p.to_string(),
        ]
    }
}

/// `k^{-(1+sp)}` for `k = 0..n`, with `0` at `k = 0`.
fn weights_1d(n: usize, exponent: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    for (k, wk) in w.iter_mut().enumerate().skip(1) {
        *wk = (k as f64).powf(-exponent);
    }
    w
}

fn selected_1d(u: &SampledPath, subset: &SubsetSelector) -> Result<Vec<bool>> {
    let mask = if matches!(subset, SubsetSelector::WholeDomain) {
        (0..u.n).map(|i| u.is_selected(i)).collect::<Vec<_>>()
    } else {
        u.restrict(subset)?.mask.expect("restrict sets a mask")
    };
    if mask.iter().filter(|&&b| b).count() < 2 {
        return Err(Error::EmptySelection(
            "the seminorm needs at least two selected cells".into(),
        ));
    }
    Ok(mask)
}

/// `2 h^{1-sp} Σ_{i<j} d^p (j-i)^{-(1+sp)}` over selected cells of a line.
fn line_pair_sum(
    kind: PointKind,
    coords: &[f64],
    selected: &[bool],
    params: &FractionalParams,
    metric: Metric,
    w: &[f64],
) -> NeumaierSum {
    let s = kind.stride();
    let n = selected.len();
    let mut total = NeumaierSum::new();
    for j in 1..n {
        if !selected[j] {
            continue;
        }
        let uj = &coords[j * s..(j + 1) * s];
        let mut col = NeumaierSum::new();
        for i in 0..j {
            if selected[i] {
                let d = metric.dist(kind, &coords[i * s..(i + 1) * s], uj);
                col.add(params.pow(d) * w[j - i]);
            }
        }
        total.merge(&col);
    }
    total
}

/// Plain Gagliardo seminorm of a sampled path.
pub fn gagliardo_1d(
    u: &SampledPath,
    params: &FractionalParams,
    opts: &SeminormOptions,
) -> Result<SeminormReport> {
    let selected = selected_1d(u, &opts.subset)?;
    let w = weights_1d(u.n, 1.0 + params.sp);
    let s = u.kind.stride();
    // Columns are independent; partial sums are merged in column order.
    let cols: Vec<NeumaierSum> = (1..u.n)
        .into_par_iter()
        .map(|j| {
            let mut col = NeumaierSum::new();
            if selected[j] {
                let uj = u.value(j);
                for i in 0..j {
                    if selected[i] {
                        let d = opts.metric.dist(u.kind, &u.coords[i * s..(i + 1) * s], uj);
                        col.add(params.pow(d) * w[j - i]);
                    }
                }
            }
            col
        })
        .collect();
    let total = merge_ordered(cols.iter());
    let h = u.h();
    Ok(SeminormReport {
        kind: SeminormKind::Plain,
        value_p: 2.0 * h.powf(1.0 - params.sp) * total.value(),
        params: *params,
        n: u.n,
        m: 1,
        subset: opts.subset.clone(),
        metric: opts.metric,
    })
}

/// Result of comparing the oscillation and plain integrands pair by pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDominance {
    pub pairs: u64,
    /// Pairs where the oscillation term is below the plain term.
    pub violations: u64,
    pub osc_value_p: f64,
    pub plain_value_p: f64,
}

/// Runs the oscillation recurrence and sums both functionals at once.
/// For every `j`, `r[i] = max(r[i+1], d(u_i, u_j))` and
/// `M[i] ← max(M[i], r[i])` turn `M[i]` into `osc_{[x_i, x_j]} u`.
fn osc_sweep(
    u: &SampledPath,
    params: &FractionalParams,
    metric: Metric,
) -> (NeumaierSum, NeumaierSum, u64, u64) {
    let n = u.n;
    let w = weights_1d(n, 1.0 + params.sp);
    let mut osc = vec![0.0f64; n];
    let mut dist_col = vec![0.0f64; n];
    let mut osc_total = NeumaierSum::new();
    let mut plain_total = NeumaierSum::new();
    let (mut pairs, mut violations) = (0u64, 0u64);
    for j in 1..n {
        let uj = u.value(j);
        for (i, d) in dist_col.iter_mut().enumerate().take(j) {
            *d = metric.dist(u.kind, u.value(i), uj);
        }
        let mut r = 0.0f64;
        for i in (0..j).rev() {
            r = r.max(dist_col[i]);
            osc[i] = osc[i].max(r);
        }
        let mut osc_col = NeumaierSum::new();
        let mut plain_col = NeumaierSum::new();
        for i in 0..j {
            let to = params.pow(osc[i]) * w[j - i];
            let tp = params.pow(dist_col[i]) * w[j - i];
            pairs += 1;
            if to < tp {
                violations += 1;
            }
            osc_col.add(to);
            plain_col.add(tp);
        }
        osc_total.merge(&osc_col);
        plain_total.merge(&plain_col);
    }
    (osc_total, plain_total, pairs, violations)
}

fn whole_domain_only(u: &SampledPath, opts: &SeminormOptions) -> Result<()> {
    if !matches!(opts.subset, SubsetSelector::WholeDomain) || u.mask.is_some() {
        return Err(Error::Unsupported(
            "the oscillation functional is defined on the whole interval only".into(),
        ));
    }
    Ok(())
}

/// `h² Σ_{i<j} 2 osc[i,j]^p / |x_i − x_j|^{1+sp}`.
pub fn osc_functional_1d(
    u: &SampledPath,
    params: &FractionalParams,
    opts: &SeminormOptions,
) -> Result<SeminormReport> {
    whole_domain_only(u, opts)?;
    let (osc, _, _, _) = osc_sweep(u, params, opts.metric);
    Ok(SeminormReport {
        kind: SeminormKind::Oscillation,
        value_p: 2.0 * u.h().powf(1.0 - params.sp) * osc.value(),
        params: *params,
        n: u.n,
        m: 1,
        subset: SubsetSelector::WholeDomain,
        metric: opts.metric,
    })
}

/// Per-pair comparison of the oscillation functional with the plain seminorm.
pub fn osc_pair_dominance(
    u: &SampledPath,
    params: &FractionalParams,
    metric: Metric,
) -> Result<PairDominance> {
    whole_domain_only(u, &SeminormOptions::default())?;
    let (osc, plain, pairs, violations) = osc_sweep(u, params, metric);
    let f = 2.0 * u.h().powf(1.0 - params.sp);
    Ok(PairDominance {
        pairs,
        violations,
        osc_value_p: f * osc.value(),
        plain_value_p: f * plain.value(),
    })
}

fn grid_selection(u: &GridMap, subset: &SubsetSelector) -> Result<Vec<bool>> {
    let sel = match subset {
        SubsetSelector::WholeDomain => (0..u.cell_count()).map(|i| u.is_defined(i)).collect(),
        other => u.selection(other)?,
    };
    if sel.iter().filter(|&&b| b).count() < 2 {
        return Err(Error::EmptySelection(
            "the seminorm needs at least two selected cells".into(),
        ));
    }
    Ok(sel)
}

/// Maximal segment of equal selected values along axis 0.
#[derive(Debug, Clone, Copy)]
struct Run {
    start: i64,
    end: i64,
    cell: usize,
}

fn build_runs(u: &GridMap, sel: &[bool]) -> Vec<Vec<Run>> {
    let n = u.n;
    let lines = u.cell_count() / n;
    (0..lines)
        .map(|t| {
            let base = t * n;
            let mut runs = Vec::new();
            let mut i = 0;
            while i < n {
                if !sel[base + i] {
                    i += 1;
                    continue;
                }
                let start = i;
                let v = u.value(base + i);
                i += 1;
                while i < n && sel[base + i] && u.value(base + i) == v {
                    i += 1;
                }
                runs.push(Run {
                    start: start as i64,
                    end: (i - 1) as i64,
                    cell: base + start,
                });
            }
            runs
        })
        .collect()
}

/// Kernel `k(t) = (t² + |Δ|²)^{-e/2}` for one transverse offset `Δ`, with
/// first and second cumulative sums so that run-to-run weights
/// `Σ_{i∈R1} Σ_{j∈R2} k(j − i)` cost O(1).
struct KernelTables {
    n: i64,
    k: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

impl KernelTables {
    fn new(n: usize, delta_sq: f64, exponent: f64) -> Self {
        let n = n as i64;
        let k: Vec<f64> = (-n..=n)
            .map(|t| {
                let r2 = (t * t) as f64 + delta_sq;
                if r2 == 0.0 {
                    0.0
                } else {
                    r2.powf(-exponent / 2.0)
                }
            })
            .collect();
        // c[t + n + 1] = Σ_{τ ≤ t} k(τ) for t ∈ [−n−1, n]
        let mut c = vec![0.0; (2 * n + 2) as usize];
        for idx in 1..c.len() {
            c[idx] = c[idx - 1] + k[idx - 1];
        }
        // d[t + n + 2] = Σ_{τ ≤ t} c(τ) for t ∈ [−n−2, n]
        let mut d = vec![0.0; (2 * n + 3) as usize];
        for idx in 1..d.len() {
            d[idx] = d[idx - 1] + c[idx - 1];
        }
        Self { n, k, c, d }
    }

    #[inline]
    fn k(&self, t: i64) -> f64 {
        self.k[(t + self.n) as usize]
    }

    #[inline]
    fn c(&self, t: i64) -> f64 {
        self.c[(t + self.n + 1) as usize]
    }

    #[inline]
    fn d(&self, t: i64) -> f64 {
        self.d[(t + self.n + 2) as usize]
    }

    /// `Σ_{i=a1}^{b1} Σ_{j=a2}^{b2} k(j − i)`.
    #[inline]
    fn weight(&self, a1: i64, b1: i64, a2: i64, b2: i64) -> f64 {
        let l1 = b1 - a1 + 1;
        let l2 = b2 - a2 + 1;
        if l1 == 1 && l2 == 1 {
            return self.k(a2 - a1);
        }
        if l1 * l2 <= 64 {
            let mut acc = 0.0;
            for i in a1..=b1 {
                for j in a2..=b2 {
                    acc += self.k(j - i);
                }
            }
            return acc;
        }
        if l1 <= 32 {
            return (a1..=b1).map(|i| self.c(b2 - i) - self.c(a2 - 1 - i)).sum();
        }
        if l2 <= 32 {
            return (a2..=b2).map(|j| self.c(j - a1) - self.c(j - b1 - 1)).sum();
        }
        (self.d(b2 - a1) - self.d(b2 - b1 - 1)) - (self.d(a2 - a1 - 1) - self.d(a2 - b1 - 2))
    }
}

/// Transverse offsets: zero first, then the lexicographically positive half.
fn transverse_offsets(n: usize, dims: usize) -> Vec<Vec<i64>> {
    let n = n as i64;
    let mut out = vec![vec![0; dims]];
    if dims == 0 {
        return out;
    }
    let span = (2 * n - 1) as usize;
    let total = span.pow(dims as u32);
    for code in 0..total {
        let mut rest = code;
        let mut delta = vec![0i64; dims];
        for c in delta.iter_mut() {
            *c = (rest % span) as i64 - (n - 1);
            rest /= span;
        }
        if delta.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0) {
            out.push(delta);
        }
    }
    out
}

/// Linear transverse line pairs `(t1, t1 + Δ)` inside the grid.
fn line_pairs(n: usize, delta: &[i64]) -> Vec<(usize, usize)> {
    let n_i = n as i64;
    let dims = delta.len();
    let ranges: Vec<(i64, i64)> = delta
        .iter()
        .map(|&dk| ((-dk).max(0), n_i.min(n_i - dk)))
        .collect();
    if ranges.iter().any(|(lo, hi)| lo >= hi) {
        return Vec::new();
    }
    let mut shift = 0i64;
    let mut stride = 1i64;
    for &dk in delta {
        shift += dk * stride;
        stride *= n_i;
    }
    let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut out = Vec::new();
    loop {
        let mut t1 = 0i64;
        let mut st = 1i64;
        for &c in &idx {
            t1 += c * st;
            st *= n_i;
        }
        out.push((t1 as usize, (t1 + shift) as usize));
        let mut k = 0;
        loop {
            if k == dims {
                return out;
            }
            idx[k] += 1;
            if idx[k] < ranges[k].1 {
                break;
            }
            idx[k] = ranges[k].0;
            k += 1;
        }
    }
}

/// Sum over all ordered pairs of selected cells of `d^p k`, in units where
/// `h = 1`.
fn run_length_sum(
    u: &GridMap,
    sel: &[bool],
    params: &FractionalParams,
    metric: Metric,
    budget: u64,
) -> Result<f64> {
    let runs = build_runs(u, sel);
    let total_runs: u64 = runs.iter().map(|r| r.len() as u64).sum();
    let work = total_runs.saturating_mul(total_runs) / 2;
    if work > budget {
        return Err(Error::Budget { work, budget });
    }
    let exponent = u.m as f64 + params.sp;
    let offsets = transverse_offsets(u.n, u.m - 1);
    let partials: Vec<NeumaierSum> = offsets
        .par_iter()
        .map(|delta| {
            let delta_sq: f64 = delta.iter().map(|&c| (c * c) as f64).sum();
            let tables = KernelTables::new(u.n, delta_sq, exponent);
            let mut acc = NeumaierSum::new();
            if delta_sq == 0.0 {
                for line in &runs {
                    for (x, r1) in line.iter().enumerate() {
                        let v1 = u.value(r1.cell);
                        for r2 in &line[x + 1..] {
                            let d = metric.dist(u.kind, v1, u.value(r2.cell));
                            if d != 0.0 {
                                acc.add(
                                    params.pow(d)
                                        * tables.weight(r1.start, r1.end, r2.start, r2.end),
                                );
                            }
                        }
                    }
                }
            } else {
                for (t1, t2) in line_pairs(u.n, delta) {
                    let (l1, l2) = (&runs[t1], &runs[t2]);
                    if l2.is_empty() {
                        continue;
                    }
                    for r1 in l1 {
                        let v1 = u.value(r1.cell);
                        for r2 in l2 {
                            let d = metric.dist(u.kind, v1, u.value(r2.cell));
                            if d != 0.0 {
                                acc.add(
                                    params.pow(d)
                                        * tables.weight(r1.start, r1.end, r2.start, r2.end),
                                );
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    Ok(2.0 * merge_ordered(partials.iter()).value())
}

/// Plain Gagliardo seminorm of a grid map.
///
/// Cells are grouped into runs of equal values along axis 0 and run pairs
/// are weighted exactly through cumulative kernel tables, so piecewise
/// constant maps cost far less than the `n^{2m}` cell pairs. The pair work
/// (number of run pairs) is capped by `opts.pair_budget`.
pub fn gagliardo_nd(
    u: &GridMap,
    params: &FractionalParams,
    opts: &SeminormOptions,
) -> Result<SeminormReport> {
    let sel = grid_selection(u, &opts.subset)?;
    let raw = run_length_sum(u, &sel, params, opts.metric, opts.pair_budget)?;
    let h = u.h();
    Ok(SeminormReport {
        kind: SeminormKind::Plain,
        value_p: h.powf(u.m as f64 - params.sp) * raw,
        params: *params,
        n: u.n,
        m: u.m,
        subset: opts.subset.clone(),
        metric: opts.metric,
    })
}

/// Cell-pair evaluation of the same sum as [`gagliardo_nd`], kept as an
/// independent reference. Refuses grids with more than `budget` ordered
/// cell pairs (`n^{2m}`).
pub fn gagliardo_nd_direct(
    u: &GridMap,
    params: &FractionalParams,
    opts: &SeminormOptions,
) -> Result<SeminormReport> {
    let cells = u.cell_count() as u64;
    let work = cells.saturating_mul(cells);
    if work > opts.pair_budget {
        return Err(Error::Budget {
            work,
            budget: opts.pair_budget,
        });
    }
    let sel = grid_selection(u, &opts.subset)?;
    let idx: Vec<usize> = (0..u.cell_count()).filter(|&i| sel[i]).collect();
    let centers: Vec<Vec<f64>> = idx.iter().map(|&i| u.center(i)).collect();
    let exponent = u.m as f64 + params.sp;
    let cols: Vec<NeumaierSum> = (1..idx.len())
        .into_par_iter()
        .map(|b| {
            let mut col = NeumaierSum::new();
            let vb = u.value(idx[b]);
            for a in 0..b {
                let d = opts.metric.dist(u.kind, u.value(idx[a]), vb);
                if d == 0.0 {
                    continue;
                }
                let r2: f64 = centers[a]
                    .iter()
                    .zip(&centers[b])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                col.add(params.pow(d) * r2.powf(-exponent / 2.0));
            }
            col
        })
        .collect();
    let h = u.h();
    Ok(SeminormReport {
        kind: SeminormKind::Plain,
        value_p: 2.0 * h.powi(2 * u.m as i32) * merge_ordered(cols.iter()).value(),
        params: *params,
        n: u.n,
        m: u.m,
        subset: opts.subset.clone(),
        metric: opts.metric,
    })
}

/// Per-axis contributions of the directional seminorm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalReport {
    pub report: SeminormReport,
    pub per_axis: Vec<f64>,
}

/// `Σ_axes ∫ (1-D seminorm along the line) d(transverse)`, with each line
/// evaluated by the 1-D cell-centre rule and weighted by `h^{m−1}`.
pub fn directional_seminorm(
    u: &GridMap,
    params: &FractionalParams,
    metric: Metric,
) -> Result<DirectionalReport> {
    let n = u.n;
    let s = u.kind.stride();
    let w = weights_1d(n, 1.0 + params.sp);
    let lines = u.cell_count() / n;
    let mut per_axis = Vec::with_capacity(u.m);
    for axis in 0..u.m {
        let step = u.axis_stride(axis);
        let partials: Vec<Result<NeumaierSum>> = (0..lines)
            .into_par_iter()
            .map(|t| {
                // Base cell of the t-th line: insert a zero digit at `axis`.
                let low = t % step;
                let high = t / step;
                let base = low + high * step * n;
                let mut coords = Vec::with_capacity(n * s);
                let mut selected = Vec::with_capacity(n);
                for k in 0..n {
                    let lin = base + k * step;
                    coords.extend_from_slice(u.value(lin));
                    selected.push(u.is_defined(lin));
                }
                if !selected.iter().any(|&b| b) {
                    return Err(Error::EmptySelection(format!(
                        "grid line {t} along axis {axis} is fully masked"
                    )));
                }
                Ok(line_pair_sum(
                    u.kind, &coords, &selected, params, metric, &w,
                ))
            })
            .collect();
        let partials = partials.into_iter().collect::<Result<Vec<_>>>()?;
        per_axis.push(
            2.0 * u.h().powf(u.m as f64 - params.sp) * merge_ordered(partials.iter()).value(),
        );
    }
    let value_p = compensated_sum(per_axis.iter().copied());
    Ok(DirectionalReport {
        report: SeminormReport {
            kind: SeminormKind::Directional,
            value_p,
            params: *params,
            n,
            m: u.m,
            subset: SubsetSelector::WholeDomain,
            metric,
        },
        per_axis,
    })
}

/// Work estimate used by the run-length kernel for a selection.
pub fn run_pair_work(u: &GridMap, subset: &SubsetSelector) -> Result<u64> {
    let sel = grid_selection(u, subset)?;
    let total: u64 = build_runs(u, &sel).iter().map(|r| r.len() as u64).sum();
    Ok(total.saturating_mul(total) / 2)
}
