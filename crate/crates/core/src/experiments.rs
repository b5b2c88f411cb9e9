//! Verification suites with CSV/JSON reports.
//!
//! A configuration is the bundled default for the experiment with a JSON
//! override merged on top. Cases run in parallel; rows are assembled in case
//! order, so a fixed configuration always produces the same bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::constructions::{
    make_ball_schedule, make_bubble, make_bubble_tower_with, make_helix, BubbleEvaluator, GridSpec,
    ScheduleParams, SmoothProfile, TowerOptions,
};
use crate::defaults::{defaults, experiment_defaults, thresholds};
use crate::error::{Error, Result};
use crate::geometry::{Covering, DeckElement, ManifoldPoint, PointKind};
use crate::lifting::{lift_grid, lifting_estimate, lifting_estimate_grid, monodromy, winding_loop};
use crate::random::{
    case_rng, fourier, monotone, piecewise_linear, spike_train, RandomMap, Target,
};
use crate::sampling::{centered_vortex, FractionalParams, GridMap, SampledPath, SubsetSelector};
use crate::seminorm::{
    gagliardo_1d, gagliardo_nd, osc_pair_dominance, Metric, SeminormOptions, DEFAULT_PAIR_BUDGET,
};
use crate::sum::{compensated_sum, NeumaierSum};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    ReverseOsc,
    DfoldRatio,
    Bubble,
    Tower,
    Monodromy,
    Patching,
    LiftingEstimate,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 7] = [
        ExperimentName::ReverseOsc,
        ExperimentName::DfoldRatio,
        ExperimentName::Bubble,
        ExperimentName::Tower,
        ExperimentName::Monodromy,
        ExperimentName::Patching,
        ExperimentName::LiftingEstimate,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::ReverseOsc => "reverse_osc",
            ExperimentName::DfoldRatio => "dfold_ratio",
            ExperimentName::Bubble => "bubble",
            ExperimentName::Tower => "tower",
            ExperimentName::Monodromy => "monodromy",
            ExperimentName::Patching => "patching",
            ExperimentName::LiftingEstimate => "lifting_estimate",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|e| e.as_str()).collect();
                Error::params(format!(
                    "unknown experiment {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Alternating real- and circle-valued piecewise linear paths.
    Mixed,
    PiecewiseLinear,
    Monotone,
    /// Case `i` carries `i + 1` spikes.
    SpikeTrain,
}

/// Experiment-specific knobs; each experiment reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentOptions {
    pub exploratory: bool,
    pub family: Option<Family>,
    pub xi: Vec<f64>,
    /// Number of sheets for the helix ratio; `1` is the identity cover.
    pub d: Option<u32>,
    pub m: Option<usize>,
    pub deltas: Vec<f64>,
    pub cells_per_layer: Option<f64>,
    pub cross_cells_per_layer: Option<f64>,
    pub pair_budget: Option<u64>,
    pub generations: Vec<usize>,
    pub c: Option<f64>,
    pub delta_min: Option<f64>,
    pub delta_max: Option<f64>,
    pub bisection_tol: Option<f64>,
    /// Fiber-indexed tower.
    pub fiber_indexed: bool,
    pub windings: Vec<i64>,
    pub covers: Vec<Covering>,
    pub grid_n: Option<usize>,
    pub piece_counts: Vec<usize>,
    pub overlap: Option<f64>,
    /// Explicit pieces; replaces `piece_counts`.
    pub pieces: Vec<SubsetSelector>,
    pub grid_family_size: Option<usize>,
    pub grid_resolutions: Vec<usize>,
    pub modes: Option<usize>,
    pub amplitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentName,
    pub params: FractionalParams,
    pub cover: Covering,
    #[serde(default)]
    pub resolutions: Vec<usize>,
    #[serde(default)]
    pub family_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub options: ExperimentOptions,
}

fn merge_json(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge_json(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

impl ExperimentConfig {
    pub fn defaults(name: ExperimentName) -> Result<Self> {
        Self::with_overrides(name, &Value::Null)
    }

    /// Bundled defaults for `name` with `overrides` merged in key by key.
    pub fn with_overrides(name: ExperimentName, overrides: &Value) -> Result<Self> {
        let mut base = experiment_defaults(name.as_str())
            .ok_or_else(|| Error::params(format!("no defaults for experiment {name}")))?;
        base["experiment"] = json!(name.as_str());
        if !overrides.is_null() {
            if !overrides.is_object() {
                return Err(Error::params("configuration must be a JSON object"));
            }
            merge_json(&mut base, overrides);
        }
        let cfg: ExperimentConfig = serde_json::from_value(base)?;
        if cfg.experiment != name {
            return Err(Error::params(format!(
                "configuration names experiment {}, expected {name}",
                cfg.experiment
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.cover.validate()?;
        if self.resolutions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::params("resolutions must be strictly increasing"));
        }
        if self.resolutions.iter().any(|&n| n < 2) {
            return Err(Error::params("every resolution must be at least 2"));
        }
        Ok(())
    }

    fn require_resolutions(&self, count: usize) -> Result<&[usize]> {
        if self.resolutions.len() < count {
            return Err(Error::params(format!(
                "{} needs at least {count} resolution(s)",
                self.experiment
            )));
        }
        Ok(&self.resolutions)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row.iter().map(csv_cell))?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Finite floats as JSON numbers; infinities and NaN as strings.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub defaults_version: u32,
    pub config: ExperimentConfig,
    pub table: Table,
    #[serde(default)]
    pub extra: Vec<Table>,
    pub summary: BTreeMap<String, Value>,
    pub criteria: Vec<CriterionOutcome>,
}

impl Report {
    fn new(config: &ExperimentConfig, table: Table) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            defaults_version: defaults().version,
            config: config.clone(),
            table,
            extra: Vec::new(),
            summary: BTreeMap::new(),
            criteria: Vec::new(),
        }
    }

    fn criterion(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.criteria.push(CriterionOutcome {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    fn summarize(&mut self, key: &str, v: Value) {
        self.summary.insert(key.into(), v);
    }

    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn criterion_named(&self, name: &str) -> Option<&CriterionOutcome> {
        self.criteria.iter().find(|c| c.name == name)
    }

    pub fn table_named(&self, name: &str) -> Option<&Table> {
        std::iter::once(&self.table)
            .chain(&self.extra)
            .find(|t| t.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes the report to `path`. CSV output puts the main table at `path`
    /// and each extra table next to it as `<stem>_<name>.csv`; a JSON
    /// report is a single file. Returns the files written.
    pub fn write(&self, path: &Path, format: Format) -> Result<Vec<PathBuf>> {
        match format {
            Format::Json => {
                let mut text = self.to_json()?;
                text.push('\n');
                fs::write(path, text)?;
                Ok(vec![path.to_path_buf()])
            }
            Format::Csv => {
                let mut written = vec![path.to_path_buf()];
                self.table.write_csv(fs::File::create(path)?)?;
                let stem = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("report");
                for t in &self.extra {
                    let p = path.with_file_name(format!("{stem}_{}.csv", t.name));
                    t.write_csv(fs::File::create(&p)?)?;
                    written.push(p);
                }
                Ok(written)
            }
        }
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    match config.experiment {
        ExperimentName::ReverseOsc => run_reverse_osc(config),
        ExperimentName::DfoldRatio => run_dfold_ratio(config),
        ExperimentName::Bubble => run_bubble(config),
        ExperimentName::Tower => run_tower(config),
        ExperimentName::Monodromy => run_monodromy_suite(config),
        ExperimentName::Patching => run_patching(config),
        ExperimentName::LiftingEstimate => run_lifting_estimate(config),
    }
}

pub fn cover_label(c: &Covering) -> String {
    match c {
        Covering::UniversalCircle => "universal_circle".into(),
        Covering::DFold(d) => format!("d_fold({d})"),
        Covering::Antipodal(m) => format!("antipodal({m})"),
    }
}

fn rel_change(prev: f64, last: f64) -> f64 {
    if prev == last {
        0.0
    } else {
        (last / prev - 1.0).abs()
    }
}

fn sup(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        0.0
    } else {
        a / b
    }
}

fn project_path(cover: &Covering, u: &SampledPath) -> SampledPath {
    let bk = cover.base_kind();
    let (ts, bs) = (u.kind.stride(), bk.stride());
    let mut coords = vec![0.0; u.n * bs];
    for i in 0..u.n {
        cover.project_coords(
            &u.coords[i * ts..(i + 1) * ts],
            &mut coords[i * bs..(i + 1) * bs],
        );
    }
    u.with_values(bk, coords)
}

fn fiber_start(cover: &Covering, first: &[f64]) -> Result<ManifoldPoint> {
    let base = cover.base_kind().point(first);
    Ok(cover.fiber(&base, Some(0))?.remove(0))
}

fn path_member(family: Family, seed: u64, case: usize) -> (&'static str, RandomMap) {
    let mut rng = case_rng(seed, case as u64);
    let pieces = 2 + case % 7;
    match family {
        Family::Mixed if case.is_multiple_of(2) => (
            "real",
            piecewise_linear(&mut rng, pieces, 2.0, Target::Real),
        ),
        Family::Mixed => (
            "circle",
            piecewise_linear(&mut rng, pieces, 4.0, Target::Circle),
        ),
        Family::PiecewiseLinear => (
            "real",
            piecewise_linear(&mut rng, pieces, 2.0, Target::Real),
        ),
        Family::Monotone => ("real", monotone(&mut rng, pieces)),
        Family::SpikeTrain => ("spikes", spike_train(&mut rng, case + 1, 0.005, 1.0)),
    }
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Oscillation functional against the plain seminorm over a random family.
pub fn run_reverse_osc(config: &ExperimentConfig) -> Result<Report> {
    let params = config.params;
    let opts = &config.options;
    if !(params.sp > 1.0) && !opts.exploratory {
        return Err(Error::params(format!(
            "reverse oscillation needs sp > 1 (got {}); set exploratory to run anyway",
            params.sp
        )));
    }
    let ns = config.require_resolutions(1)?.to_vec();
    if config.family_size == 0 {
        return Err(Error::params("family_size must be positive"));
    }
    let family = opts.family.unwrap_or(Family::Mixed);
    let rows: Vec<Vec<(usize, &'static str, usize, crate::seminorm::PairDominance)>> = (0..config
        .family_size)
        .into_par_iter()
        .map(|case| {
            let (label, map) = path_member(family, config.seed, case);
            ns.iter()
                .map(|&n| {
                    let u = map.sample_path(n)?;
                    let d = osc_pair_dominance(&u, &params, Metric::Geodesic)?;
                    Ok((case, label, n, d))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(
        "cases",
        &[
            "case",
            "seed",
            "family",
            "target",
            "n",
            "osc_value_p",
            "plain_value_p",
            "ratio",
            "pairs",
            "violations",
        ],
    );
    let mut sups = vec![0.0f64; ns.len()];
    let mut violations = 0u64;
    let mut spike_points = Vec::new();
    for case_rows in &rows {
        for (k, (case, label, n, d)) in case_rows.iter().enumerate() {
            let r = ratio(d.osc_value_p, d.plain_value_p);
            sups[k] = sups[k].max(r);
            violations += d.violations;
            if k + 1 == ns.len() {
                spike_points.push(((case + 1) as f64, r));
            }
            table.push(vec![
                json!(case),
                json!(config.seed),
                json!(family),
                json!(label),
                json!(n),
                num(d.osc_value_p),
                num(d.plain_value_p),
                num(r),
                json!(d.pairs),
                json!(d.violations),
            ]);
        }
    }
    let mut report = Report::new(config, table);
    report.summarize(
        "sup_ratio",
        json!(ns
            .iter()
            .zip(&sups)
            .map(|(n, s)| json!({"n": n, "sup": num(*s)}))
            .collect::<Vec<_>>()),
    );
    report.summarize("violations", json!(violations));
    report.criterion(
        "forward_dominance",
        violations == 0,
        format!("{violations} pair(s) with oscillation term below the plain term"),
    );
    if family == Family::SpikeTrain {
        let (x, y): (Vec<f64>, Vec<f64>) = spike_points.into_iter().unzip();
        if x.len() > 1 {
            report.summarize("ratio_vs_spike_count_slope", num(slope(&x, &y)));
        }
    }
    if ns.len() >= 2 {
        let (a, b) = (sups[sups.len() - 2], sups[sups.len() - 1]);
        let change = rel_change(a, b);
        report.summarize("sup_ratio_change", num(change));
        if params.sp > 1.0 {
            let tol = thresholds().reverse_osc_stability;
            report.criterion(
                "sup_ratio_stability",
                b.is_finite() && change <= tol,
                format!("sup ratio {a} -> {b}, relative change {change:.4} (limit {tol})"),
            );
        }
    }
    Ok(report)
}

/// Lifted against projected seminorm of helices `x ↦ d e^{iξx}` as ξ grows.
pub fn run_dfold_ratio(config: &ExperimentConfig) -> Result<Report> {
    let d = match (config.options.d, config.cover) {
        (Some(0), _) => return Err(Error::params("d must be at least 1")),
        (Some(d), _) => d,
        (None, Covering::DFold(d)) => d,
        (None, other) => {
            return Err(Error::params(format!(
                "dfold_ratio needs a d_fold cover or an explicit d, got {}",
                cover_label(&other)
            )))
        }
    };
    let n = *config.require_resolutions(1)?.last().unwrap();
    let xi = &config.options.xi;
    if xi.is_empty() || xi.windows(2).any(|w| !(w[1] > w[0])) || xi[0] <= 0.0 {
        return Err(Error::params(
            "xi schedule must be positive and strictly increasing",
        ));
    }
    let params = config.params;
    let df = d as f64;
    let target = df.powf(params.p - params.sp + 1.0);
    let lower = df.powf(params.p - params.sp);
    let vals: Vec<(f64, f64)> = xi
        .par_iter()
        .map(|&x| {
            let lifted = make_helix(d, x, n)?;
            let projected = if d == 1 {
                lifted.clone()
            } else {
                project_path(&Covering::DFold(d), &lifted)
            };
            let o = SeminormOptions::default();
            Ok((
                gagliardo_1d(&lifted, &params, &o)?.value_p,
                gagliardo_1d(&projected, &params, &o)?.value_p,
            ))
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(
        "schedule",
        &[
            "d",
            "xi",
            "n",
            "lifted_value_p",
            "projected_value_p",
            "ratio",
            "target",
            "rel_err",
            "d_pow_p_minus_sp",
        ],
    );
    let ratios: Vec<f64> = vals.iter().map(|(l, p)| ratio(*l, *p)).collect();
    for ((x, (l, p)), r) in xi.iter().zip(&vals).zip(&ratios) {
        table.push(vec![
            json!(d),
            num(*x),
            json!(n),
            num(*l),
            num(*p),
            num(*r),
            num(target),
            num((r - target).abs() / target),
            num(lower),
        ]);
    }
    let mut report = Report::new(config, table);
    let last = *ratios.last().unwrap();
    let rel = (last - target).abs() / target;
    let tol = thresholds().dfold_ratio_tolerance;
    report.summarize("last_ratio", num(last));
    report.summarize("target", num(target));
    report.summarize("last_ratio_over_d_pow_p_minus_sp", num(last / lower));
    report.criterion(
        "ratio_limit",
        rel <= tol,
        format!(
            "ratio {last:.6} at xi = {}, target {target:.6}, relative error {rel:.4} (limit {tol})",
            xi.last().unwrap()
        ),
    );
    let gaps: Vec<f64> = ratios.iter().map(|r| (r - target).abs()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
    report.criterion(
        "monotone_trend",
        monotone,
        format!("distances to target across the schedule: {gaps:?}"),
    );
    Ok(report)
}

/// Projected and lifted seminorms of single bubbles as δ shrinks.
pub fn run_bubble(config: &ExperimentConfig) -> Result<Report> {
    let opts = &config.options;
    let m = opts.m.unwrap_or(2);
    let mut deltas = opts.deltas.clone();
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
        return Err(Error::params("bubble needs deltas in (0, 1)"));
    }
    deltas.sort_by(|a, b| b.total_cmp(a));
    deltas.dedup();
    let cover = config.cover;
    let (b0, b1) = cover.canonical_fiber_pair();
    let profile = SmoothProfile::new(cover, b0, b1)?;
    let eval = BubbleEvaluator::new(
        cover,
        config.params,
        m,
        opts.cells_per_layer.unwrap_or(8.0),
        opts.pair_budget.unwrap_or(DEFAULT_PAIR_BUDGET),
    );
    let base = cover.default_base_point();
    let bk = cover.base_kind();
    let mut table = Table::new(
        "deltas",
        &[
            "delta",
            "n",
            "m",
            "cells_across_layer",
            "lifted_value_p",
            "projected_value_p",
            "locality_gap",
            "advisory",
        ],
    );
    let (mut lifted, mut projected, mut gaps, mut advisories) =
        (Vec::new(), Vec::new(), Vec::new(), 0);
    for &delta in &deltas {
        let n = eval.resolution(delta);
        let grid = GridSpec {
            origin: vec![-1.0; m],
            side: 2.0,
            n,
        };
        let b = make_bubble(&profile, &vec![0.0; m], 1.0, delta, &grid)?;
        let annulus = SubsetSelector::Annulus {
            center: vec![0.0; m],
            r_in: (1.0 - delta) / 2.0,
            r_out: 0.5,
        };
        let inside = b.projected.selection(&annulus)?;
        let gap = inside
            .par_iter()
            .enumerate()
            .filter(|(_, &s)| !s)
            .map(|(lin, _)| bk.dist(b.projected.value(lin), base.coords()))
            .reduce(|| 0.0, f64::max);
        let lift_opts = SeminormOptions {
            metric: Metric::Geodesic,
            subset: SubsetSelector::Ball {
                center: vec![0.0; m],
                radius: 1.0,
            },
            pair_budget: eval.pair_budget,
        };
        let proj_opts = SeminormOptions {
            pair_budget: eval.pair_budget,
            ..SeminormOptions::default()
        };
        let l = gagliardo_nd(&b.lifted, &config.params, &lift_opts)?.value_p;
        let p = gagliardo_nd(&b.projected, &config.params, &proj_opts)?.value_p;
        if b.advisory.is_some() {
            advisories += 1;
        }
        table.push(vec![
            num(delta),
            json!(n),
            json!(m),
            num(b.cells_across_layer),
            num(l),
            num(p),
            num(gap),
            json!(b.advisory.clone().unwrap_or_default()),
        ]);
        lifted.push(l);
        projected.push(p);
        gaps.push(gap);
    }
    let mut report = Report::new(config, table);
    let t = thresholds();
    let (pmax, pmin) = (
        sup(projected.iter().copied()),
        projected.iter().copied().fold(f64::INFINITY, f64::min),
    );
    let factor = pmax / pmin;
    report.summarize("projected_factor", num(factor));
    let growth: Vec<f64> = lifted.windows(2).map(|w| w[1] / w[0]).collect();
    report.summarize(
        "lifted_growth",
        json!(growth.iter().map(|g| num(*g)).collect::<Vec<_>>()),
    );
    report.criterion(
        "projected_bounded",
        factor <= t.bubble_projected_factor,
        format!(
            "max/min projected value_p = {factor:.4} (limit {})",
            t.bubble_projected_factor
        ),
    );
    let min_growth = growth.iter().copied().fold(f64::INFINITY, f64::min);
    report.criterion(
        "lifted_growth",
        !growth.is_empty() && min_growth >= t.bubble_lifted_growth,
        format!(
            "per-halving lifted ratios {growth:?} (each must reach {})",
            t.bubble_lifted_growth
        ),
    );
    let worst_gap = sup(gaps.iter().copied());
    report.criterion(
        "projected_locality",
        worst_gap <= t.bubble_locality,
        format!("largest distance to the base point outside the annulus: {worst_gap:e}"),
    );
    report.criterion(
        "layer_resolved",
        advisories == 0,
        format!("{advisories} resolution advisory(ies)"),
    );
    Ok(report)
}

/// Bubble towers for several numbers of generations.
pub fn run_tower(config: &ExperimentConfig) -> Result<Report> {
    let opts = &config.options;
    let m = opts.m.unwrap_or(2);
    let cover = config.cover;
    let mut generations = opts.generations.clone();
    if generations.is_empty() || generations.contains(&0) {
        return Err(Error::params("tower needs positive generation counts"));
    }
    generations.sort_unstable();
    generations.dedup();
    let tower_opts = TowerOptions {
        params: config.params,
        cells_per_layer: opts.cells_per_layer.unwrap_or(4.0),
        cross_cells_per_layer: opts.cross_cells_per_layer.unwrap_or(2.0),
        delta_min: opts.delta_min.unwrap_or(1.0 / 64.0),
        delta_max: opts.delta_max.unwrap_or(0.75),
        bisection_tol: opts.bisection_tol.unwrap_or(0.25),
        pair_budget: opts.pair_budget.unwrap_or(DEFAULT_PAIR_BUDGET),
        global_n: config.resolutions.last().copied().unwrap_or(256),
    };
    let fibers = if opts.fiber_indexed {
        Some(cover.sheets().unwrap_or(2))
    } else {
        None
    };
    let mut eval = BubbleEvaluator::new(
        cover,
        config.params,
        m,
        tower_opts.cells_per_layer,
        tower_opts.pair_budget,
    );
    let mut ray = vec![0.0; m];
    ray[0] = 1.0;
    let mut balls = Table::new(
        "balls",
        &[
            "generations",
            "k",
            "fiber",
            "center",
            "radius",
            "eps_budget",
            "delta",
            "n_unit",
            "target",
            "lifted_value_p",
            "projected_value_p",
            "unit_projected_value_p",
            "converged",
            "endpoints",
        ],
    );
    let mut truncations = Table::new(
        "truncations",
        &[
            "generations",
            "j",
            "r_j",
            "balls_inside",
            "witness_value_p",
            "fraction_of_total",
        ],
    );
    let mut totals = Table::new(
        "totals",
        &[
            "generations",
            "projected_value_p",
            "lifted_lower_bound",
            "target_sum",
            "series_bound",
            "disjointness_margin",
            "advisories",
        ],
    );
    let mut projected_totals = Vec::new();
    let (mut all_converged, mut all_targets, mut all_series) = (true, true, true);
    let mut trunc_ok = true;
    let mut trunc_detail = Vec::new();
    for &k_count in &generations {
        let schedule = make_ball_schedule(
            &vec![0.0; m],
            &ScheduleParams {
                generations: k_count,
                c: opts.c.unwrap_or(1.0),
                ray: ray.clone(),
                fibers,
            },
        )?;
        let tower = make_bubble_tower_with(&mut eval, &schedule, &tower_opts)?;
        for b in &tower.balls {
            all_converged &= b.converged;
            all_targets &= b.lifted_value >= b.target;
            balls.push(vec![
                json!(k_count),
                json!(b.entry.generation),
                json!(b.entry.fiber),
                json!(b.entry.center.iter().map(|x| num(*x)).collect::<Vec<_>>()),
                num(b.entry.radius),
                num(b.entry.eps),
                num(b.delta),
                json!(b.unit.n),
                num(b.target),
                num(b.lifted_value),
                num(b.projected_value),
                num(b.unit.projected),
                json!(b.converged),
                json!([b.endpoints.0, b.endpoints.1]),
            ]);
        }
        let total = tower.projected_value();
        projected_totals.push(total);
        let series = tower.series_bound();
        all_series &= total <= series;
        let advisories = tower.balls.iter().filter(|b| b.advisory.is_some()).count();
        totals.push(vec![
            json!(k_count),
            num(total),
            num(tower.lifted_lower_bound()),
            num(tower.balls.iter().map(|b| b.target).sum::<f64>()),
            num(series),
            num(schedule.disjointness_margin()),
            json!(advisories),
        ]);
        let mut witness = Vec::new();
        for j in 0..schedule.r_seq.len() {
            let t = tower.truncate(j)?;
            truncations.push(vec![
                json!(k_count),
                json!(j),
                num(t.r),
                json!(t.balls_inside.len()),
                num(t.witness_value),
                num(t.witness_value / total),
            ]);
            witness.push(t.witness_value);
        }
        let decreasing = witness.windows(2).all(|w| w[1] < w[0]);
        let final_frac = witness.last().copied().unwrap_or(0.0) / total;
        let ok = decreasing && final_frac < thresholds().tower_final_truncation;
        trunc_ok &= ok;
        trunc_detail.push(format!(
            "K={k_count}: decreasing={decreasing}, final fraction {final_frac:.3e}"
        ));
    }
    let mut report = Report::new(config, balls);
    report.extra.push(truncations);
    report.extra.push(totals);
    let pmax = sup(projected_totals.iter().copied());
    let pmin = projected_totals
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let factor = pmax / pmin;
    let t = thresholds();
    report.summarize("projected_factor", num(factor));
    report.criterion(
        "projected_bounded",
        factor <= t.tower_projected_factor,
        format!("projected value_p across generations {projected_totals:?}, max/min {factor:.4} (limit {})", t.tower_projected_factor),
    );
    report.criterion("truncation_witnesses", trunc_ok, trunc_detail.join("; "));
    report.criterion(
        "per_ball_targets",
        all_converged && all_targets,
        format!("bisection converged for every ball: {all_converged}; every lifted ball value reaches k + 1: {all_targets}"),
    );
    report.criterion(
        "series_bound",
        all_series,
        "projected value_p at most 2^p times the sum of rho^(m-1) times the unit projected values",
    );
    Ok(report)
}

/// Closed-form monodromy of the winding-`w` loop.
pub fn expected_monodromy(cover: &Covering, w: i64) -> DeckElement {
    match *cover {
        Covering::UniversalCircle => DeckElement::IntShift(w),
        Covering::DFold(d) => DeckElement::ModShift(w.rem_euclid(d as i64) as u32),
        Covering::Antipodal(_) => DeckElement::Sign(if w.rem_euclid(2) == 0 { 1 } else { -1 }),
    }
}

/// Winding/cover monodromy table and the grid obstruction on vortices.
pub fn run_monodromy_suite(config: &ExperimentConfig) -> Result<Report> {
    let opts = &config.options;
    let n = *config.require_resolutions(1)?.last().unwrap();
    let covers = if opts.covers.is_empty() {
        vec![config.cover]
    } else {
        opts.covers.clone()
    };
    let windings = if opts.windings.is_empty() {
        (-2..=2).collect()
    } else {
        opts.windings.clone()
    };
    let cases: Vec<(Covering, i64)> = covers
        .iter()
        .flat_map(|c| windings.iter().map(move |&w| (*c, w)))
        .collect();
    let results: Vec<(Covering, i64, crate::lifting::MonodromyResult)> = cases
        .par_iter()
        .map(|&(c, w)| {
            let lp = winding_loop(&c, w, n)?;
            let start = fiber_start(&c, lp.value(0))?;
            Ok((c, w, monodromy(&c, &lp, &start)?))
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(
        "monodromy",
        &[
            "cover", "winding", "n", "deck", "closed", "expected", "matches", "max_step",
        ],
    );
    let mut all_match = true;
    for (c, w, r) in &results {
        let exp = expected_monodromy(c, *w);
        all_match &= exp == r.deck;
        table.push(vec![
            json!(cover_label(c)),
            json!(w),
            json!(n),
            json!(r.deck.to_string()),
            json!(r.closed),
            json!(exp.to_string()),
            json!(exp == r.deck),
            num(r.max_step),
        ]);
    }
    let mut report = Report::new(config, table);
    report.criterion(
        "table_matches_rule",
        all_match,
        "deck element of every loop against the closed-form rule",
    );
    let grid_n = opts.grid_n.unwrap_or(64);
    let mut grid = Table::new(
        "grid",
        &[
            "cover",
            "winding",
            "n",
            "outcome",
            "holonomy",
            "cycle",
            "unresolved_edges",
        ],
    );
    let dfold2 = Covering::DFold(2);
    let mut outcomes = Vec::new();
    for w in [1i64, 2] {
        let u = centered_vortex(w, 2.0, grid_n, None)?;
        let first = (0..u.cell_count()).find(|&c| u.is_defined(c)).unwrap_or(0);
        let start = fiber_start(&dfold2, u.value(first))?;
        let row = match lift_grid(&dfold2, &u, &start) {
            Ok(l) => {
                outcomes.push((w, true, false));
                vec![
                    json!("lifted"),
                    json!(""),
                    json!([]),
                    json!(l.unresolved_edges.len()),
                ]
            }
            Err(Error::Obstruction { cycle, holonomy }) => {
                let pts: Vec<Vec<f64>> = cycle.iter().map(|&c| u.center(c)).collect();
                outcomes.push((w, false, winding_about_origin(&pts) != 0));
                vec![
                    json!("obstruction"),
                    json!(holonomy),
                    json!(cycle),
                    json!(0),
                ]
            }
            Err(e) => return Err(e),
        };
        let mut full = vec![json!(cover_label(&dfold2)), json!(w), json!(grid_n)];
        full.extend(row);
        grid.push(full);
    }
    let w1 = outcomes
        .iter()
        .find(|o| o.0 == 1)
        .map(|o| !o.1 && o.2)
        .unwrap_or(false);
    let w2 = outcomes
        .iter()
        .find(|o| o.0 == 2)
        .map(|o| o.1)
        .unwrap_or(false);
    report.extra.push(grid);
    report.criterion(
        "winding_one_obstructed",
        w1,
        "winding-1 vortex under d_fold(2) yields a plaquette cycle around the centre",
    );
    report.criterion(
        "winding_two_lifts",
        w2,
        "winding-2 vortex under d_fold(2) lifts",
    );
    Ok(report)
}

/// Winding number of a closed polygon around the origin.
pub fn winding_about_origin(pts: &[Vec<f64>]) -> i64 {
    let mut total = 0.0;
    for i in 0..pts.len() {
        let (a, b) = (&pts[i], &pts[(i + 1) % pts.len()]);
        let cross = a[0] * b[1] - a[1] * b[0];
        let dot = a[0] * b[0] + a[1] * b[1];
        total += cross.atan2(dot);
    }
    (total / std::f64::consts::TAU).round() as i64
}

fn default_pieces(m: usize, count: usize, overlap: f64) -> Vec<SubsetSelector> {
    (0..count)
        .map(|j| {
            let lo0 = if j == 0 {
                -1.0
            } else {
                j as f64 / count as f64 - overlap
            };
            let hi0 = if j + 1 == count {
                2.0
            } else {
                (j + 1) as f64 / count as f64 + overlap
            };
            let mut lo = vec![-1.0; m];
            let mut hi = vec![2.0; m];
            lo[0] = lo0;
            hi[0] = hi0;
            SubsetSelector::Box { lo, hi }
        })
        .collect()
}

/// Checks that `pieces` cover every cell and can be ordered so that each
/// meets the union of the previous ones.
pub fn validate_pieces(selections: &[Vec<bool>]) -> Result<()> {
    let cells = selections.first().map_or(0, |s| s.len());
    if selections.is_empty() || (0..cells).any(|c| !selections.iter().any(|s| s[c])) {
        return Err(Error::params("pieces do not cover the domain"));
    }
    let mut union = selections[0].clone();
    let mut used = vec![false; selections.len()];
    used[0] = true;
    for _ in 1..selections.len() {
        let next = (0..selections.len())
            .find(|&j| !used[j] && selections[j].iter().zip(&union).any(|(a, b)| *a && *b))
            .ok_or_else(|| Error::params("pieces do not form an overlapping chain"))?;
        used[next] = true;
        for (u, s) in union.iter_mut().zip(&selections[next]) {
            *u |= *s;
        }
    }
    Ok(())
}

/// `∬ d(u(x), u(y))^p dx dy` over all cell pairs.
fn mean_oscillation_integral(
    kind: PointKind,
    coords: &[f64],
    volume: f64,
    params: &FractionalParams,
) -> f64 {
    let s = kind.stride();
    let cells = coords.len() / s;
    let rows: Vec<NeumaierSum> = (0..cells)
        .into_par_iter()
        .map(|i| {
            let mut acc = NeumaierSum::new();
            for j in 0..i {
                acc.add(
                    params.pow(kind.dist(&coords[i * s..(i + 1) * s], &coords[j * s..(j + 1) * s])),
                );
            }
            acc
        })
        .collect();
    2.0 * crate::sum::merge_ordered(rows.iter()).value() * volume * volume
}

enum Sample {
    Path(SampledPath),
    Grid(GridMap),
}

impl Sample {
    fn value_on(&self, params: &FractionalParams, subset: &SubsetSelector) -> Result<f64> {
        let o = SeminormOptions::on(subset.clone());
        Ok(match self {
            Sample::Path(u) => gagliardo_1d(u, params, &o)?.value_p,
            Sample::Grid(u) => gagliardo_nd(u, params, &o)?.value_p,
        })
    }

    fn selection(&self, subset: &SubsetSelector) -> Result<Vec<bool>> {
        match self {
            Sample::Path(u) => {
                subset.validate(1)?;
                Ok((0..u.n)
                    .map(|i| subset.contains(&[u.center(i)], i))
                    .collect())
            }
            Sample::Grid(u) => u.selection(subset),
        }
    }

    fn oscillation_integral(&self, params: &FractionalParams) -> f64 {
        match self {
            Sample::Path(u) => mean_oscillation_integral(u.kind, &u.coords, u.h(), params),
            Sample::Grid(u) => {
                mean_oscillation_integral(u.kind, &u.coords, u.h().powi(u.m as i32), params)
            }
        }
    }
}

/// Global seminorm against the sum over an overlapping cover.
pub fn run_patching(config: &ExperimentConfig) -> Result<Report> {
    let opts = &config.options;
    let m = opts.m.unwrap_or(1);
    if !(1..=2).contains(&m) {
        return Err(Error::params(
            "patching runs on the unit interval or the unit square",
        ));
    }
    let ns = config.require_resolutions(1)?.to_vec();
    let piece_sets: Vec<(String, Vec<SubsetSelector>)> = if !opts.pieces.is_empty() {
        vec![("custom".into(), opts.pieces.clone())]
    } else {
        let counts = if opts.piece_counts.is_empty() {
            vec![2, 3]
        } else {
            opts.piece_counts.clone()
        };
        counts
            .iter()
            .map(|&k| {
                (
                    format!("{k}_pieces"),
                    default_pieces(m, k, opts.overlap.unwrap_or(0.1)),
                )
            })
            .collect()
    };
    for (_, pieces) in &piece_sets {
        for p in pieces {
            p.validate(m)?;
        }
    }
    let params = config.params;
    let sample = |case: usize, n: usize| -> Result<Sample> {
        let mut rng = case_rng(config.seed, case as u64);
        Ok(if m == 1 {
            Sample::Path(piecewise_linear(&mut rng, 5, 3.0, Target::Circle).sample_path(n)?)
        } else {
            Sample::Grid(fourier(&mut rng, 2, 3, 1.5, Target::Circle).sample_grid(2, n)?)
        })
    };
    // Coverage and chaining are checked on the coarsest grid.
    let probe = sample(0, ns[0])?;
    for (_, pieces) in &piece_sets {
        let sel: Vec<Vec<bool>> = pieces
            .iter()
            .map(|p| probe.selection(p))
            .collect::<Result<_>>()?;
        validate_pieces(&sel)?;
    }
    let cases: Vec<(usize, usize)> = (0..config.family_size)
        .flat_map(|c| ns.iter().map(move |&n| (c, n)))
        .collect();
    let results: Vec<Vec<(f64, Vec<f64>, f64)>> = cases
        .par_iter()
        .map(|&(case, n)| {
            let u = sample(case, n)?;
            let global = u.value_on(&params, &SubsetSelector::WholeDomain)?;
            let osc = u.oscillation_integral(&params);
            piece_sets
                .iter()
                .map(|(_, pieces)| {
                    let locals = pieces
                        .iter()
                        .map(|p| u.value_on(&params, p))
                        .collect::<Result<Vec<_>>>()?;
                    Ok((global, locals, osc))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(
        "maps",
        &[
            "case",
            "seed",
            "m",
            "n",
            "cover",
            "global_value_p",
            "local_sum",
            "constant",
            "oscillation_integral",
            "poincare_ratio",
        ],
    );
    let mut sups: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut finite = true;
    for ((case, n), per_set) in cases.iter().zip(&results) {
        for (si, ((name, _), (global, locals, osc))) in piece_sets.iter().zip(per_set).enumerate() {
            let local_sum = compensated_sum(locals.iter().copied());
            let c = ratio(*global, local_sum);
            let pr = ratio(*osc, local_sum);
            finite &= c.is_finite() && pr.is_finite();
            let e = sups.entry((si, *n)).or_insert(0.0);
            *e = e.max(c);
            table.push(vec![
                json!(case),
                json!(config.seed),
                json!(m),
                json!(n),
                json!(name),
                num(*global),
                num(local_sum),
                num(c),
                num(*osc),
                num(pr),
            ]);
        }
    }
    let mut report = Report::new(config, table);
    report.criterion(
        "finite_constants",
        finite,
        "every constant and Poincaré ratio is finite",
    );
    let tol = thresholds().patching_stability;
    if ns.len() >= 2 {
        let (n0, n1) = (ns[ns.len() - 2], ns[ns.len() - 1]);
        for (si, (name, _)) in piece_sets.iter().enumerate() {
            let (a, b) = (sups[&(si, n0)], sups[&(si, n1)]);
            let change = rel_change(a, b);
            report.summarize(
                &format!("sup_constant_{name}"),
                json!({"coarse": num(a), "fine": num(b)}),
            );
            report.criterion(
                &format!("constant_stability_{name}"),
                change <= tol,
                format!("sup constant {a:.6} at n={n0}, {b:.6} at n={n1}, relative change {change:.4} (limit {tol})"),
            );
        }
    }
    Ok(report)
}

fn target_for(cover: &Covering) -> Result<Target> {
    match cover.base_kind() {
        PointKind::Circle { radius: 1.0 } => Ok(Target::Circle),
        PointKind::Proj { dim } => Ok(Target::Proj { dim }),
        other => Err(Error::Unsupported(format!(
            "no random family for base kind {other:?}"
        ))),
    }
}

/// Normalized lifting ratios over random smooth paths and grids.
pub fn run_lifting_estimate(config: &ExperimentConfig) -> Result<Report> {
    let opts = &config.options;
    let covers = if opts.covers.is_empty() {
        vec![config.cover]
    } else {
        opts.covers.clone()
    };
    let path_ns = config.require_resolutions(1)?.to_vec();
    let grid_ns = if opts.grid_resolutions.is_empty() {
        vec![32, 64]
    } else {
        opts.grid_resolutions.clone()
    };
    if grid_ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::params(
            "grid resolutions must be strictly increasing",
        ));
    }
    let grid_family = opts.grid_family_size.unwrap_or(20);
    let modes = opts.modes.unwrap_or(3);
    let amplitude = opts.amplitude.unwrap_or(1.5);
    let params = config.params;
    #[derive(Clone, Copy)]
    struct Case {
        cover: Covering,
        grid: bool,
        case: usize,
        n: usize,
    }
    let mut cases = Vec::new();
    for &cover in &covers {
        target_for(&cover)?;
        for case in 0..config.family_size {
            cases.extend(path_ns.iter().map(|&n| Case {
                cover,
                grid: false,
                case,
                n,
            }));
        }
        for case in 0..grid_family {
            cases.extend(grid_ns.iter().map(|&n| Case {
                cover,
                grid: true,
                case,
                n,
            }));
        }
    }
    let results: Vec<crate::lifting::LiftingEstimate> = cases
        .par_iter()
        .map(|c| {
            let target = target_for(&c.cover)?;
            let stream = if c.grid {
                (1 << 32) + c.case as u64
            } else {
                c.case as u64
            };
            let mut rng = case_rng(config.seed, stream);
            let m = if c.grid { 2 } else { 1 };
            let f = fourier(&mut rng, m, modes, amplitude, target);
            if c.grid {
                lifting_estimate_grid(&c.cover, &f.sample_grid(2, c.n)?, &params)
            } else {
                lifting_estimate(&c.cover, &f.sample_path(c.n)?, &params)
            }
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(
        "cases",
        &[
            "cover",
            "domain",
            "case",
            "seed",
            "n",
            "lifted_value_p",
            "base_value_p",
            "ratio",
            "bound_factor",
            "normalized",
        ],
    );
    let mut sups: BTreeMap<(String, bool, usize), f64> = BTreeMap::new();
    for (c, e) in cases.iter().zip(&results) {
        let label = cover_label(&c.cover);
        let s = sups.entry((label.clone(), c.grid, c.n)).or_insert(0.0);
        *s = s.max(e.normalized());
        table.push(vec![
            json!(label),
            json!(if c.grid { "square" } else { "interval" }),
            json!(c.case),
            json!(config.seed),
            json!(c.n),
            num(e.lhs),
            num(e.rhs),
            num(e.ratio),
            num(e.bound_factor),
            num(e.normalized()),
        ]);
    }
    let mut report = Report::new(config, table);
    let tol = thresholds().lifting_estimate_stability;
    for cover in &covers {
        let label = cover_label(cover);
        for (grid, ns, count) in [
            (false, &path_ns, config.family_size),
            (true, &grid_ns, grid_family),
        ] {
            if count == 0 || ns.len() < 2 {
                continue;
            }
            let (n0, n1) = (ns[ns.len() - 2], ns[ns.len() - 1]);
            let a = sups[&(label.clone(), grid, n0)];
            let b = sups[&(label.clone(), grid, n1)];
            let change = rel_change(a, b);
            let domain = if grid { "square" } else { "interval" };
            report.summarize(
                &format!("sup_normalized_{label}_{domain}"),
                json!({"coarse": num(a), "fine": num(b)}),
            );
            report.criterion(
                &format!("stable_sup_{label}_{domain}"),
                a.is_finite() && b.is_finite() && change <= tol,
                format!("sup normalized ratio {a:.6} at n={n0}, {b:.6} at n={n1}, relative change {change:.4} (limit {tol})"),
            );
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(name: ExperimentName, over: Value) -> ExperimentConfig {
        ExperimentConfig::with_overrides(name, &over).unwrap()
    }

    #[test]
    fn defaults_load_for_every_experiment() {
        for name in ExperimentName::ALL {
            let c = ExperimentConfig::defaults(name).unwrap();
            assert_eq!(c.experiment, name);
            assert_eq!(name.as_str().parse::<ExperimentName>().unwrap(), name);
        }
        assert!("nope".parse::<ExperimentName>().is_err());
    }

    #[test]
    fn overrides_merge_and_validate() {
        let c = cfg(
            ExperimentName::ReverseOsc,
            json!({"params": {"s": 0.5, "p": 4.0}, "family_size": 3}),
        );
        assert_eq!(c.params.sp, 2.0);
        assert_eq!(c.family_size, 3);
        assert_eq!(c.resolutions, vec![256, 512]);
        assert!(ExperimentConfig::with_overrides(
            ExperimentName::ReverseOsc,
            &json!({"resolutions": [512, 256]})
        )
        .is_err());
        assert!(
            ExperimentConfig::with_overrides(ExperimentName::ReverseOsc, &json!({"bogus": 1}))
                .is_err()
        );
        assert!(ExperimentConfig::with_overrides(
            ExperimentName::ReverseOsc,
            &json!({"options": {"bogus": 1}})
        )
        .is_err());
    }

    #[test]
    fn monotone_family_has_unit_ratios() {
        let c = cfg(
            ExperimentName::ReverseOsc,
            json!({"family_size": 6, "resolutions": [64, 128], "options": {"family": "monotone"}}),
        );
        let r = run_reverse_osc(&c).unwrap();
        for v in r.table.column("ratio").unwrap() {
            assert_eq!(v.as_f64().unwrap(), 1.0);
        }
        assert!(r.passed());
    }

    #[test]
    fn reverse_osc_requires_sp_above_one_unless_exploratory() {
        let low = json!({"params": {"s": 0.4, "p": 2.0}});
        assert!(run_reverse_osc(&cfg(ExperimentName::ReverseOsc, low.clone())).is_err());
        let c = cfg(
            ExperimentName::ReverseOsc,
            json!({"params": {"s": 0.4, "p": 2.0}, "family_size": 8, "resolutions": [256],
                   "options": {"exploratory": true, "family": "spike_train"}}),
        );
        let r = run_reverse_osc(&c).unwrap();
        assert!(r.criterion_named("sup_ratio_stability").is_none());
        assert!(r.summary["ratio_vs_spike_count_slope"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn trivial_cover_ratio_is_one() {
        let c = cfg(
            ExperimentName::DfoldRatio,
            json!({"resolutions": [256], "options": {"d": 1, "xi": [std::f64::consts::TAU, 2.0 * std::f64::consts::TAU]}}),
        );
        let r = run_dfold_ratio(&c).unwrap();
        for v in r.table.column("ratio").unwrap() {
            assert!((v.as_f64().unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(r.passed());
    }

    #[test]
    fn dfold_ratio_rejects_other_covers() {
        let c = cfg(
            ExperimentName::DfoldRatio,
            json!({"cover": "universal_circle"}),
        );
        assert!(run_dfold_ratio(&c).is_err());
    }

    #[test]
    fn coarse_bubble_gets_an_advisory() {
        let c = cfg(
            ExperimentName::Bubble,
            json!({"options": {"deltas": [0.25, 0.125], "cells_per_layer": 0.5}}),
        );
        let r = run_bubble(&c).unwrap();
        assert!(!r.criterion_named("layer_resolved").unwrap().passed);
        assert!(r.criterion_named("projected_locality").unwrap().passed);
    }

    #[test]
    fn monodromy_table_examples() {
        let c = cfg(
            ExperimentName::Monodromy,
            json!({"resolutions": [32], "options": {"grid_n": 16}}),
        );
        let r = run_monodromy_suite(&c).unwrap();
        let find = |cover: &str, w: i64| {
            let row = r
                .table
                .rows
                .iter()
                .find(|row| row[0] == json!(cover) && row[1] == json!(w))
                .unwrap();
            row[4].as_bool().unwrap()
        };
        assert!(!find("d_fold(2)", 1));
        assert!(find("d_fold(2)", 2));
        assert!(find("d_fold(3)", 0));
        assert!(find("antipodal(1)", -2));
        assert!(r.passed(), "{:?}", r.criteria);
    }

    #[test]
    fn winding_of_square_around_origin() {
        let sq = vec![
            vec![1.0, -1.0],
            vec![1.0, 1.0],
            vec![-1.0, 1.0],
            vec![-1.0, -1.0],
        ];
        assert_eq!(winding_about_origin(&sq), 1);
        let off: Vec<Vec<f64>> = sq.iter().map(|p| vec![p[0] + 5.0, p[1]]).collect();
        assert_eq!(winding_about_origin(&off), 0);
    }

    #[test]
    fn non_covering_pieces_are_rejected() {
        let c = cfg(
            ExperimentName::Patching,
            json!({"family_size": 1, "options": {"pieces": [
                {"type": "box", "lo": [-1.0], "hi": [0.3]},
                {"type": "box", "lo": [0.6], "hi": [2.0]}
            ]}}),
        );
        assert!(matches!(run_patching(&c), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn constant_map_patching_is_zero_over_zero() {
        let sel = vec![vec![true, true, false], vec![false, true, true]];
        assert!(validate_pieces(&sel).is_ok());
        assert!(validate_pieces(&[vec![true, false, false], vec![false, false, true]]).is_err());
        assert_eq!(ratio(0.0, 0.0), 0.0);
    }

    #[test]
    fn csv_and_json_round_trip() {
        let c = cfg(
            ExperimentName::Monodromy,
            json!({"resolutions": [16], "options": {"grid_n": 8, "windings": [0, 1]}}),
        );
        let r = run_monodromy_suite(&c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = r.write(&dir.path().join("mono.csv"), Format::Csv).unwrap();
        assert_eq!(files.len(), 2);
        let text = fs::read_to_string(&files[0]).unwrap();
        assert!(text.starts_with("cover,winding,n,deck,closed,expected,matches,max_step"));
        let jf = dir.path().join("mono.json");
        r.write(&jf, Format::Json).unwrap();
        let back: Report = serde_json::from_str(&fs::read_to_string(jf).unwrap()).unwrap();
        assert_eq!(back.schema_version, SCHEMA_VERSION);
        assert_eq!(back.table, r.table);
    }
}
