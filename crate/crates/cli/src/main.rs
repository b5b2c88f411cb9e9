use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use liftlab::experiments::{run_experiment, ExperimentConfig, ExperimentName, Format};
use liftlab::lifting::{lift_grid, lift_path, monodromy, winding_loop};
use liftlab::sampling::{MapFile, SampledMap};
use liftlab::seminorm::{
    directional_seminorm, gagliardo_1d, gagliardo_nd, gagliardo_nd_direct, osc_functional_1d,
    DEFAULT_PAIR_BUDGET,
};
use liftlab::{
    Covering, FractionalParams, ManifoldPoint, Metric, SeminormOptions, SeminormReport,
    SubsetSelector,
};

#[derive(Parser)]
#[command(
    name = "liftlab",
    version,
    about = "Fractional seminorms and liftings of sampled manifold-valued maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Seminorm of a sampled map read from a JSON map file.
    Seminorm(SeminormArgs),
    /// Continuous lift of a sampled path or grid.
    Lift(LiftArgs),
    /// Monodromy of a sampled loop.
    Monodromy(MonodromyArgs),
    /// Run a verification suite.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CoverArg {
    Universal,
    Dfold,
    Antipodal,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Functional {
    Plain,
    Osc,
    Directional,
    Direct,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Geodesic,
    Chordal,
}

#[derive(Args)]
struct CoverOpts {
    /// Covering space.
    #[arg(long, value_enum, default_value = "dfold")]
    cover: CoverArg,
    /// Sheets of the d-fold cover, or the dimension of the antipodal cover.
    #[arg(long)]
    d: Option<u32>,
}

impl CoverOpts {
    fn covering(&self) -> anyhow::Result<Covering> {
        let c = match self.cover {
            CoverArg::Universal => Covering::UniversalCircle,
            CoverArg::Dfold => Covering::DFold(self.d.unwrap_or(2)),
            CoverArg::Antipodal => Covering::Antipodal(self.d.unwrap_or(1) as usize),
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct SeminormArgs {
    /// JSON map file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    s: f64,
    #[arg(long)]
    p: f64,
    #[arg(long, value_enum, default_value = "plain")]
    functional: Functional,
    #[arg(long, value_enum, default_value = "geodesic")]
    metric: MetricArg,
    /// Subset selector as JSON, e.g. '{"type":"ball","center":[0.5],"radius":0.25}'.
    #[arg(long)]
    subset: Option<String>,
    #[arg(long, default_value_t = DEFAULT_PAIR_BUDGET)]
    pair_budget: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LiftArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    cover: CoverOpts,
    /// Start point in the total space as JSON; defaults to the first fiber point.
    #[arg(long)]
    start: Option<String>,
    /// Where to write the lifted map.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MonodromyArgs {
    /// Loop as a JSON map file; otherwise the winding loop given by `--w`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    cover: CoverOpts,
    /// Winding number of the generated loop.
    #[arg(long, allow_hyphen_values = true)]
    w: Option<i64>,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long)]
    start: Option<String>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// reverse_osc, dfold_ratio, bubble, tower, monodromy, patching or lifting_estimate.
    name: String,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, value_enum)]
    cover: Option<CoverArg>,
    #[arg(long)]
    d: Option<u32>,
    /// Resolutions, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// JSON file with configuration overrides.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Failure kinds mapped to exit codes.
enum Outcome {
    Pass,
    CriterionFailed,
}

fn read_json(path: &Path) -> anyhow::Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_map(path: &Path) -> anyhow::Result<SampledMap> {
    let file: MapFile = serde_json::from_value(read_json(path)?)
        .with_context(|| format!("map file {}", path.display()))?;
    Ok(file.into_map()?)
}

fn start_point(
    cover: &Covering,
    arg: &Option<String>,
    first: &[f64],
) -> anyhow::Result<ManifoldPoint> {
    if let Some(s) = arg {
        return serde_json::from_str(s).context("parsing --start");
    }
    let base = cover.base_kind().point(first);
    Ok(cover.fiber(&base, Some(0))?.remove(0))
}

fn emit(out: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn seminorm(a: &SeminormArgs) -> anyhow::Result<Outcome> {
    let params = FractionalParams::new(a.s, a.p)?;
    let subset: SubsetSelector = match &a.subset {
        Some(s) => serde_json::from_str(s).context("parsing --subset")?,
        None => SubsetSelector::WholeDomain,
    };
    let metric = match a.metric {
        MetricArg::Geodesic => Metric::Geodesic,
        MetricArg::Chordal => Metric::Chordal,
    };
    let opts = SeminormOptions {
        metric,
        subset,
        pair_budget: a.pair_budget,
    };
    let map = read_map(&a.input)?;
    let report: SeminormReport = match (&map, a.functional) {
        (SampledMap::Path(u), Functional::Plain) => gagliardo_1d(u, &params, &opts)?,
        (SampledMap::Path(u), Functional::Osc) => osc_functional_1d(u, &params, &opts)?,
        (SampledMap::Grid(u), Functional::Plain) => gagliardo_nd(u, &params, &opts)?,
        (SampledMap::Grid(u), Functional::Direct) => gagliardo_nd_direct(u, &params, &opts)?,
        (SampledMap::Grid(u), Functional::Directional) => {
            directional_seminorm(u, &params, metric)?.report
        }
        (SampledMap::Path(_), _) => bail!("paths support the plain and osc functionals"),
        (SampledMap::Grid(_), Functional::Osc) => bail!("the oscillation functional needs a path"),
    };
    let text = match a.format {
        FormatArg::Json => serde_json::to_string_pretty(&report)? + "\n",
        FormatArg::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(SeminormReport::CSV_HEADER)?;
            w.write_record(report.csv_row())?;
            String::from_utf8(w.into_inner()?)?
        }
    };
    emit(&a.out, &text)?;
    Ok(Outcome::Pass)
}

fn lift(a: &LiftArgs) -> anyhow::Result<Outcome> {
    let cover = a.cover.covering()?;
    let map = read_map(&a.input)?;
    let result = match &map {
        SampledMap::Path(u) => {
            let start = start_point(&cover, &a.start, u.value(0))?;
            lift_path(&cover, u, &start).map(|l| {
                (
                    MapFile::from(&l.lifted),
                    l.max_step,
                    l.unresolved_edges.len(),
                )
            })
        }
        SampledMap::Grid(u) => {
            let first = (0..u.cell_count())
                .find(|&c| u.is_defined(c))
                .context("grid has no defined cells")?;
            let start = start_point(&cover, &a.start, u.value(first))?;
            lift_grid(&cover, u, &start).map(|l| {
                (
                    MapFile::from(&l.lifted),
                    l.max_step,
                    l.unresolved_edges.len(),
                )
            })
        }
    };
    match result {
        Ok((file, max_step, unresolved)) => {
            if let Some(p) = &a.out {
                fs::write(p, serde_json::to_string(&file)? + "\n")?;
            }
            println!(
                "{}",
                json!({"lifted": true, "max_step": max_step, "unresolved_edges": unresolved})
            );
            Ok(Outcome::Pass)
        }
        Err(e @ (liftlab::Error::Obstruction { .. } | liftlab::Error::Resolution { .. })) => {
            println!("{}", json!({"lifted": false, "reason": e.to_string()}));
            Ok(Outcome::CriterionFailed)
        }
        Err(e) => Err(e.into()),
    }
}

fn monodromy_cmd(a: &MonodromyArgs) -> anyhow::Result<Outcome> {
    let cover = a.cover.covering()?;
    let lp = match (&a.input, a.w) {
        (Some(p), _) => match read_map(p)? {
            SampledMap::Path(u) => u,
            SampledMap::Grid(_) => bail!("a loop must be a path"),
        },
        (None, Some(w)) => winding_loop(&cover, w, a.n)?,
        (None, None) => bail!("give --input or --w"),
    };
    let start = start_point(&cover, &a.start, lp.value(0))?;
    let r = monodromy(&cover, &lp, &start)?;
    println!(
        "{}",
        json!({"deck": r.deck.to_string(), "closed": r.closed, "max_step": r.max_step})
    );
    Ok(Outcome::Pass)
}

fn experiment(a: &ExperimentArgs) -> anyhow::Result<Outcome> {
    let name: ExperimentName = a.name.parse()?;
    let mut over = match &a.config {
        Some(p) => read_json(p)?,
        None => json!({}),
    };
    if !over.is_object() {
        bail!("--config must hold a JSON object");
    }
    let o = over.as_object_mut().unwrap();
    o.remove("experiment");
    let params = o.entry("params").or_insert_with(|| json!({}));
    if let Some(s) = a.s {
        params["s"] = json!(s);
    }
    if let Some(p) = a.p {
        params["p"] = json!(p);
    }
    if params.as_object().is_some_and(|m| m.is_empty()) {
        o.remove("params");
    }
    if let Some(c) = a.cover {
        let cover = CoverOpts { cover: c, d: a.d }.covering()?;
        o.insert("cover".into(), serde_json::to_value(cover)?);
    } else if let Some(d) = a.d {
        let options = o.entry("options").or_insert_with(|| json!({}));
        options["d"] = json!(d);
    }
    if let Some(n) = &a.n {
        o.insert("resolutions".into(), json!(n));
    }
    if let Some(m) = a.m {
        let options = o.entry("options").or_insert_with(|| json!({}));
        options["m"] = json!(m);
    }
    if let Some(seed) = a.seed {
        o.insert("seed".into(), json!(seed));
    }
    if let Some(out) = &a.out {
        o.insert("output".into(), json!(out));
    }
    if let Some(f) = a.format {
        o.insert("format".into(), serde_json::to_value(Format::from(f))?);
    }
    let config = ExperimentConfig::with_overrides(name, &over)?;
    let report = run_experiment(&config)?;
    match &config.output {
        Some(path) => {
            for f in report.write(path, config.format)? {
                eprintln!("wrote {}", f.display());
            }
        }
        None => match config.format {
            Format::Json => println!("{}", report.to_json()?),
            Format::Csv => report.table.write_csv(io::stdout())?,
        },
    }
    for c in &report.criteria {
        eprintln!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    Ok(if report.passed() {
        Outcome::Pass
    } else {
        Outcome::CriterionFailed
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Seminorm(a) => seminorm(a),
        Command::Lift(a) => lift(a),
        Command::Monodromy(a) => monodromy_cmd(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::CriterionFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
