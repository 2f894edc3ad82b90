// SPDX-License-Identifier: Apache-2.0

//! `sog-ppa` command-line driver.
//!
//! Every subcommand reads its inputs from explicit paths, writes only under
//! `--out`, and logs progress to standard error.

pub mod manifest;

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use sog_ppa::activity::{propagate, ActivityError};
use sog_ppa::estimators::{
    evaluate, extract_training_set, predict_ppa, train_all, EstimateError, EstimatorConfig, LabeledDesign,
    ModelBundle, PpaPrediction, Target, TrainParams,
};
use sog_ppa::frontend::{generate_design, ClockSpec, GenError, GenParams, NetlistError, WordDesign};
use sog_ppa::golden::{golden_label, GoldenError, GoldenLabels, PowerConfig};
use sog_ppa::learners::{load_model, save_model, splitmix64, tree_seed, LearnError};
use sog_ppa::liberty::{fixture_library, Library, LibertyError};
use sog_ppa::sog::lower;
use sog_ppa::timing::{annotate, path_features, sta, worst_paths, EndpointKind, TimingConfig, TimingError};

use manifest::{copy_relative, LoadedManifest, Manifest, ManifestEntry, Split, MANIFEST_FILE, MANIFEST_VERSION};

pub const BUNDLE_FILE: &str = "bundle.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SCATTER_FILE: &str = "scatter.csv";
/// Name given to a user-supplied Liberty file copied next to a manifest.
const LIBRARY_FILE: &str = "library.lib";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Netlist { path: PathBuf, source: NetlistError },
    #[error("{}: {source}", path.display())]
    Liberty { path: PathBuf, source: LibertyError },
    #[error("{}: {source}", path.display())]
    Model { path: PathBuf, source: LearnError },
    #[error("bundle not found: {}", .0.display())]
    BundleNotFound(PathBuf),
    #[error("{0}")]
    Invalid(String),
    #[error("{design}: {source}")]
    Design { design: String, source: Box<CliError> },
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Golden(#[from] GoldenError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Activity(#[from] ActivityError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn in_design(self, design: &str) -> Self {
        CliError::Design {
            design: design.to_string(),
            source: Box::new(self),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sog-ppa", version, about = "Pre-synthesis PPA estimation on bit-level operator graphs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Liberty library (defaults to the manifest's library, then the built-in fixture).
    #[arg(long, global = true)]
    lib: Option<PathBuf>,
    /// Output directory; nothing is written elsewhere.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores). Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic design corpus and its manifest.
    Gen(GenArgs),
    /// Label every manifest entry with the golden flow.
    Golden(ManifestArgs),
    /// Lower a design to a SOG document with propagated activity.
    Lower(DesignArgs),
    /// Static timing analysis of the lowered design.
    Sta(StaArgs),
    /// Train all estimators on the manifest's training split.
    Train(TrainArgs),
    /// Predict PPA for one design.
    Predict(PredictArgs),
    /// Score a bundle against golden labels and emit CSV reports.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, default_value_t = 150)]
    count: usize,
    /// Maximum pipeline stages per design.
    #[arg(long, default_value_t = 4)]
    stages: usize,
    #[arg(long, default_value_t = 2)]
    width_min: u32,
    #[arg(long, default_value_t = 16)]
    width_max: u32,
    /// Maximum word-level operators per stage.
    #[arg(long, default_value_t = 8)]
    ops_per_stage: usize,
    /// Comma-separated clock periods in ns.
    #[arg(long, default_value = "0.5,0.75,1.0,1.5")]
    clock_set: String,
}

#[derive(Debug, Args)]
struct ManifestArgs {
    /// Manifest file or the directory holding `manifest.json`.
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[arg(long)]
    design: PathBuf,
}

#[derive(Debug, Args)]
struct StaArgs {
    #[arg(long)]
    design: PathBuf,
    /// Fraction of endpoints whose worst path is reported (at least 16).
    #[arg(long, default_value_t = 0.01)]
    path_fraction: f64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    forest_trees: Option<usize>,
    #[arg(long)]
    forest_depth: Option<usize>,
    #[arg(long)]
    gbm_trees: Option<usize>,
    #[arg(long)]
    gbm_depth: Option<usize>,
    #[arg(long)]
    gbm_lr: Option<f64>,
    #[arg(long)]
    gcn_epochs: Option<usize>,
    #[arg(long)]
    gcn_lr: Option<f64>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    design: PathBuf,
    /// Bundle file or the directory holding `bundle.json`.
    #[arg(long)]
    bundle: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

impl SplitArg {
    fn admits(self, s: Split) -> bool {
        match self {
            SplitArg::Train => s == Split::Train,
            SplitArg::Test => s == Split::Test,
            SplitArg::All => true,
        }
    }
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    split: SplitArg,
}

/// Parse `argv` (program name first), run the subcommand and return the
/// process exit code: 0 success, 1 runtime failure, 2 usage error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.global.quiet { "warn" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.jobs)
        .build()
        .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    let g = &cli.global;
    pool.install(|| match &cli.command {
        Command::Gen(a) => cmd_gen(g, a),
        Command::Golden(a) => cmd_golden(g, a),
        Command::Lower(a) => cmd_lower(g, a),
        Command::Sta(a) => cmd_sta(g, a),
        Command::Train(a) => cmd_train(g, a),
        Command::Predict(a) => cmd_predict(g, a),
        Command::Evaluate(a) => cmd_evaluate(g, a),
    })
}

fn out_dir(g: &Global) -> Result<&Path, CliError> {
    let out = g
        .out
        .as_deref()
        .ok_or_else(|| CliError::Usage("--out is required for this subcommand".into()))?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    Ok(out)
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn read_design(path: &Path) -> Result<WordDesign, CliError> {
    WordDesign::parse(&read_text(path)?).map_err(|source| CliError::Netlist {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("in-memory values serialize");
    text.push('\n');
    write_text(path, &text)
}

fn parse_library(path: &Path) -> Result<Library, CliError> {
    Library::parse(&read_text(path)?).map_err(|source| CliError::Liberty {
        path: path.to_path_buf(),
        source,
    })
}

/// `--lib`, else the manifest's library, else the built-in fixture.
fn resolve_library(g: &Global, m: Option<&LoadedManifest>) -> Result<Library, CliError> {
    match g.lib.clone().or_else(|| m.and_then(LoadedManifest::library_path)) {
        Some(p) => parse_library(&p),
        None => Ok(fixture_library()),
    }
}

fn parse_clock_set(text: &str) -> Result<Vec<f64>, CliError> {
    let clocks = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(format!("--clock-set `{text}`: {e}")))?;
    if clocks.is_empty() || clocks.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(CliError::Usage(format!("--clock-set `{text}`: periods must be positive")));
    }
    Ok(clocks)
}

/// Roughly one design in three goes to the test split.
fn split_of(design_seed: u64) -> Split {
    if splitmix64(design_seed ^ 0x5711) % 3 == 0 {
        Split::Test
    } else {
        Split::Train
    }
}

fn cmd_gen(g: &Global, a: &GenArgs) -> Result<(), CliError> {
    if a.stages == 0 || a.ops_per_stage == 0 {
        return Err(CliError::Usage("--stages and --ops-per-stage must be positive".into()));
    }
    let clocks = parse_clock_set(&a.clock_set)?;
    let out = out_dir(g)?;
    let library = match &g.lib {
        Some(p) => {
            parse_library(p)?;
            let dst = out.join(LIBRARY_FILE);
            fs::copy(p, &dst).map_err(|e| CliError::io(p, e))?;
            Some(LIBRARY_FILE.to_string())
        }
        None => None,
    };
    let designs: Vec<(u64, WordDesign)> = (0..a.count as u64)
        .into_par_iter()
        .map(|i| {
            let seed = tree_seed(g.seed, i);
            let r = splitmix64(seed);
            let params = GenParams {
                seed,
                n_stages: 1 + (r % a.stages as u64) as usize,
                width_min: a.width_min,
                width_max: a.width_max,
                ops_per_stage: 1 + (splitmix64(r) % a.ops_per_stage as u64) as usize,
                clock: ClockSpec::Choice(clocks.clone()),
            };
            generate_design(&params).map(|d| (seed, d))
        })
        .collect::<Result<_, _>>()?;
    let mut names = BTreeSet::new();
    let mut entries = Vec::with_capacity(designs.len());
    for (seed, d) in &designs {
        if !names.insert(d.name().to_string()) {
            return Err(CliError::Invalid(format!("duplicate design name {}", d.name())));
        }
        let rel = format!("designs/{}.json", d.name());
        write_text(&out.join(&rel), &d.to_json())?;
        entries.push(ManifestEntry {
            design: rel,
            clock_period_ns: d.clock_period_ns(),
            seed: *seed,
            split: split_of(*seed),
            golden: None,
        });
    }
    let n_test = entries.iter().filter(|e| e.split == Split::Test).count();
    info!(
        "generated {} designs ({} train, {} test) in {}",
        entries.len(),
        entries.len() - n_test,
        n_test,
        out.display()
    );
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        library,
        entries,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)
}

fn check_clock(entry: &ManifestEntry, d: &WordDesign) -> Result<(), CliError> {
    if entry.clock_period_ns != d.clock_period_ns() {
        return Err(CliError::Invalid(format!(
            "manifest clock {} ns differs from the design's {} ns",
            entry.clock_period_ns,
            d.clock_period_ns()
        )));
    }
    Ok(())
}

fn cmd_golden(g: &Global, a: &ManifestArgs) -> Result<(), CliError> {
    let m = LoadedManifest::load(&a.manifest)?;
    let lib = resolve_library(g, Some(&m))?;
    let out = out_dir(g)?;
    let timing = TimingConfig::default();
    let labels: Vec<GoldenLabels> = m
        .manifest
        .entries
        .par_iter()
        .map(|e| {
            let run = || -> Result<GoldenLabels, CliError> {
                let d = m.design(e)?;
                check_clock(e, &d)?;
                let power = PowerConfig {
                    seed: splitmix64(g.seed ^ e.seed),
                    ..PowerConfig::default()
                };
                Ok(golden_label(&d, &lib, &timing, &power)?)
            };
            run().map_err(|err| err.in_design(&e.design))
        })
        .collect::<Result<_, _>>()?;
    let mut labeled = m.manifest.clone();
    for (e, l) in labeled.entries.iter_mut().zip(labels) {
        copy_relative(&m.dir, out, &e.design)?;
        e.golden = Some(l);
    }
    labeled.library = match (&g.lib, &m.manifest.library) {
        (Some(p), _) => {
            fs::copy(p, out.join(LIBRARY_FILE)).map_err(|e| CliError::io(p, e))?;
            Some(LIBRARY_FILE.to_string())
        }
        (None, Some(rel)) => {
            copy_relative(&m.dir, out, rel)?;
            Some(rel.clone())
        }
        (None, None) => None,
    };
    let before: usize = labeled.entries.iter().filter_map(|e| e.golden.as_ref()).map(|l| l.nodes_before).sum();
    let after: usize = labeled.entries.iter().filter_map(|e| e.golden.as_ref()).map(|l| l.nodes_after).sum();
    info!(
        "labeled {} designs; optimization kept {after} of {before} SOG nodes",
        labeled.entries.len()
    );
    write_json(&out.join(MANIFEST_FILE), &labeled)
}

fn cmd_lower(g: &Global, a: &DesignArgs) -> Result<(), CliError> {
    let d = read_design(&a.design)?;
    let out = out_dir(g)?;
    let graph = lower(&d);
    let act = propagate(&graph, EstimatorConfig::default().input_p)?;
    let mut doc = graph.to_doc();
    act.attach(&mut doc);
    info!("{}: {} SOG nodes", d.name(), graph.len());
    write_json(&out.join(format!("{}.sog.json", d.name())), &doc)
}

fn kind_str(k: EndpointKind) -> &'static str {
    match k {
        EndpointKind::Dff => "dff",
        EndpointKind::Po => "po",
    }
}

fn cmd_sta(g: &Global, a: &StaArgs) -> Result<(), CliError> {
    if !(a.path_fraction > 0.0 && a.path_fraction <= 1.0) {
        return Err(CliError::Usage("--path-fraction must lie in (0, 1]".into()));
    }
    let d = read_design(&a.design)?;
    let lib = resolve_library(g, None)?;
    let out = out_dir(g)?;
    let graph = lower(&d);
    let cfg = TimingConfig::default();
    let ann = annotate(&graph, &lib, &cfg)?;
    let result = sta(&ann, graph.clock_period_ns)?;
    let endpoints: Vec<_> = result
        .endpoints
        .iter()
        .map(|e| {
            json!({
                "identity": e.identity,
                "kind": kind_str(e.kind),
                "arrival_ns": e.arrival_ns,
                "slack_ns": e.slack_ns,
            })
        })
        .collect();
    let paths: Vec<_> = worst_paths(&result, &ann, a.path_fraction)
        .iter()
        .map(|p| {
            let f = path_features(p, &ann);
            json!({
                "source": p.source_identity,
                "sink": p.sink_identity,
                "kind": kind_str(p.sink_kind),
                "delay_ns": p.analytical_delay_ns,
                "slack_ns": p.slack_ns,
                "n_ops": f.n_ops,
                "max_fanout": f.max_fanout,
                "nodes": p.nodes,
            })
        })
        .collect();
    info!("{}: WNS {:.4} ns, TNS {:.4} ns", d.name(), result.wns_r, result.tns_r);
    let report = json!({
        "design": d.name(),
        "clock_period_ns": result.clock_period_ns,
        "wns_ns": result.wns_r,
        "tns_ns": result.tns_r,
        "endpoints": endpoints,
        "worst_paths": paths,
    });
    write_json(&out.join(format!("{}.sta.json", d.name())), &report)
}

fn labeled_entries(m: &LoadedManifest, pick: impl Fn(Split) -> bool + Sync) -> Result<Vec<LabeledDesign>, CliError> {
    m.manifest
        .entries
        .par_iter()
        .filter(|e| pick(e.split))
        .map(|e| {
            let labels = e
                .golden
                .clone()
                .ok_or_else(|| CliError::Invalid(format!("{} has no golden labels; run `golden` first", e.design)))?;
            let design = m.design(e)?;
            check_clock(e, &design).map_err(|err| err.in_design(&e.design))?;
            Ok(LabeledDesign {
                design,
                labels: Some(labels),
            })
        })
        .collect()
}

fn train_params(g: &Global, a: &TrainArgs) -> Result<TrainParams, CliError> {
    let mut p = TrainParams::with_seed(g.seed);
    if let Some(n) = a.forest_trees {
        p.forest.n_estimators = n;
    }
    if let Some(n) = a.forest_depth {
        p.forest.max_depth = n;
    }
    for gbm in [&mut p.wns_gbm, &mut p.tns_gbm, &mut p.area_gbm] {
        if let Some(n) = a.gbm_trees {
            gbm.n_estimators = n;
        }
        if let Some(n) = a.gbm_depth {
            gbm.max_depth = n;
        }
        if let Some(lr) = a.gbm_lr {
            gbm.learning_rate = lr;
        }
    }
    if let Some(n) = a.gcn_epochs {
        p.gcn.epochs = n;
    }
    if let Some(lr) = a.gcn_lr {
        p.gcn.learning_rate = lr;
    }
    let positive = [a.forest_trees, a.gbm_trees, a.gcn_epochs, a.forest_depth, a.gbm_depth];
    if positive.iter().flatten().any(|&n| n == 0) {
        return Err(CliError::Usage("tree counts, depths and epochs must be positive".into()));
    }
    if [a.gbm_lr, a.gcn_lr].iter().flatten().any(|lr| !(lr.is_finite() && *lr > 0.0)) {
        return Err(CliError::Usage("learning rates must be positive".into()));
    }
    Ok(p)
}

fn cmd_train(g: &Global, a: &TrainArgs) -> Result<(), CliError> {
    let params = train_params(g, a)?;
    let m = LoadedManifest::load(&a.manifest)?;
    let lib = resolve_library(g, Some(&m))?;
    let out = out_dir(g)?;
    let train = labeled_entries(&m, |s| s == Split::Train)?;
    if train.is_empty() {
        return Err(CliError::Invalid("manifest has no training designs".into()));
    }
    let cfg = EstimatorConfig::default();
    let tables = extract_training_set(&train, &lib, &cfg)?;
    info!(
        "training on {} designs: {} matched paths, {} dropped",
        train.len(),
        tables.matched_paths,
        tables.unmatched_paths
    );
    let bundle = train_all(&tables, &params, &lib, &cfg)?;
    write_text(&out.join(BUNDLE_FILE), &save_model(&bundle))?;
    let summary = json!({
        "designs": train.len(),
        "matched_paths": tables.matched_paths,
        "unmatched_paths": tables.unmatched_paths,
        "path_rows": tables.path_x.len(),
    });
    write_json(&out.join("training.json"), &summary)
}

fn load_bundle(arg: &Path) -> Result<ModelBundle, CliError> {
    let path = if arg.is_dir() { arg.join(BUNDLE_FILE) } else { arg.to_path_buf() };
    if !path.is_file() {
        return Err(CliError::BundleNotFound(path));
    }
    load_model(&read_text(&path)?).map_err(|source| CliError::Model { path, source })
}

fn cmd_predict(g: &Global, a: &PredictArgs) -> Result<(), CliError> {
    let bundle = load_bundle(&a.bundle)?;
    let d = read_design(&a.design)?;
    let lib = resolve_library(g, None)?;
    let out = out_dir(g)?;
    let p = predict_ppa(&d, &lib, &bundle)?;
    info!(
        "{}: WNS {:.4} ns, TNS {:.4} ns, power {:.3} uW, area {:.2}",
        p.design, p.wns_ns, p.tns_ns, p.power_uw, p.area.total
    );
    write_json(&out.join(format!("{}.prediction.json", d.name())), &p)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

/// Write `metrics.csv` and `scatter.csv` into `out`.
pub fn emit_reports(
    metrics: &sog_ppa::estimators::Metrics,
    scatter: &[(String, Target, f64, f64)],
    out: &Path,
) -> Result<(), CliError> {
    let path = out.join(METRICS_FILE);
    let mut w = csv_writer(&path)?;
    w.write_record(["target", "r", "mape", "rrse", "n_used", "n_excluded"])?;
    for t in &metrics.targets {
        w.write_record([
            t.target.as_str().to_string(),
            fmt_opt(t.r),
            t.mape_percent.to_string(),
            fmt_opt(t.rrse),
            t.n_used.to_string(),
            t.n_excluded.to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;

    let path = out.join(SCATTER_FILE);
    let mut w = csv_writer(&path)?;
    w.write_record(["design", "target", "truth", "prediction"])?;
    for (design, target, truth, pred) in scatter {
        w.write_record([design.clone(), target.as_str().to_string(), truth.to_string(), pred.to_string()])?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))
}

fn cmd_evaluate(g: &Global, a: &EvaluateArgs) -> Result<(), CliError> {
    let bundle = load_bundle(&a.bundle)?;
    let m = LoadedManifest::load(&a.manifest)?;
    let splits: BTreeSet<_> = m.manifest.entries.iter().map(|e| e.split == Split::Test).collect();
    if splits.len() < 2 {
        return Err(CliError::Invalid("manifest split tags must cover both train and test".into()));
    }
    let lib = resolve_library(g, Some(&m))?;
    let out = out_dir(g)?;
    let chosen = labeled_entries(&m, |s| a.split.admits(s))?;
    let preds: Vec<PpaPrediction> = chosen
        .par_iter()
        .map(|l| predict_ppa(&l.design, &lib, &bundle).map_err(|e| CliError::from(e).in_design(l.design.name())))
        .collect::<Result<_, _>>()?;
    let labels: Vec<GoldenLabels> = chosen.iter().filter_map(|l| l.labels.clone()).collect();
    let metrics = evaluate(&preds, &labels)?;
    let mut scatter = Vec::with_capacity(preds.len() * Target::ALL.len());
    for (p, l) in preds.iter().zip(&labels) {
        for t in Target::ALL {
            scatter.push((p.design.clone(), t, t.of_labels(l), t.of_prediction(p)));
        }
    }
    for t in &metrics.targets {
        info!(
            "{:>5}: R {} MAPE {:.2}% RRSE {}",
            t.target.as_str(),
            fmt_opt(t.r),
            t.mape_percent,
            fmt_opt(t.rrse)
        );
    }
    emit_reports(&metrics, &scatter, out)?;
    write_json(&out.join("predictions.json"), &preds)
}
