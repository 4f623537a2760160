//! The `semimarkov` command line: argument parsing, configuration merging and
//! the six subcommand pipelines.
//!
//! Exit status is 0 on success, 2 on a usage error and 1 on a runtime error,
//! whose message goes to standard error.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use semimarkov_core::decode::{DecodeMode, DecodeOptions};
use semimarkov_core::evaluate::{CvSettings, StudyConfig, StudyRow};
use semimarkov_core::features::{window_features, FeatureOptions};
use semimarkov_core::fit::{map_fit, PosteriorDraws, SamplerDiagnostics, SamplerSettings};
use semimarkov_core::math::Quartiles;
use semimarkov_core::rng::derive_seed;
use semimarkov_core::simulate::{scenario_grid, simulate_series, ScenarioConfig};
use semimarkov_core::{LabeledSeries, ModelSpec, Params, Priors};

use crate::io::{self, fmt_f64, SeriesTable};
use crate::manifest::Manifest;
use crate::report::fit_report;
use crate::runner;

/// Draws per fit when neither the flag nor the configuration sets it.
pub const DEFAULT_FIT_DRAWS: usize = 1000;
pub const DEFAULT_SEED: u64 = 1;

/// Invalid or incomplete invocation; maps to exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(
    name = "semimarkov",
    version,
    about = "Supervised HMM/HSMM state classification of time series"
)]
pub struct Cli {
    /// More log output on standard error (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate labelled series from a scenario grid or a single model.
    Simulate(SimulateArgs),
    /// Turn raw tri-axial acceleration into windowed features.
    Features(FeaturesArgs),
    /// Draw from the posterior (or find the mode) given labelled series.
    Fit(FitArgs),
    /// Decode state probabilities and paths of series under fitted draws.
    Decode(DecodeArgs),
    /// Leave-one-series-out cross-validation.
    Cv(CvArgs),
    /// Run the HMM vs HSMM simulation study.
    Study(StudyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Desk,
    Paper,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario grid JSON, or `{"spec", "params", "n_series", "length"}` for one model.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in grid used when no configuration is given.
    #[arg(long, value_enum, default_value = "desk")]
    pub scale: Scale,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Raw CSV files `t,surge,sway,heave[,label]` or directories of them.
    #[arg(long, required = true, num_args = 1..)]
    pub series: Vec<PathBuf>,
    /// Feature options JSON (`rate`, `smoothing_window`, `static_window`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Recorded in the manifest; feature extraction is deterministic.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Labelled series CSV files or directories of them.
    #[arg(long, required = true, num_args = 1..)]
    pub series: Vec<PathBuf>,
    /// Model specification JSON; overrides `spec` in the configuration.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Priors JSON; overrides `priors` in the configuration.
    #[arg(long)]
    pub priors: Option<PathBuf>,
    /// Fit configuration JSON (`spec`, `priors`, `sampler`, `n_draws`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of posterior draws to keep.
    #[arg(long)]
    pub draws: Option<usize>,
    /// Write the posterior mode as a single draw instead of sampling.
    #[arg(long)]
    pub map: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Draws JSON file; the text report goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Series CSV files or directories of them.
    #[arg(long, required = true, num_args = 1..)]
    pub series: Vec<PathBuf>,
    /// Draws file written by `fit`, a parameter set, or an array of them.
    #[arg(long)]
    pub draws: PathBuf,
    /// Model specification JSON; required unless the draws file has one.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Decoding options JSON (`max_duration`, `coverage`, `work_budget`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Recorded in the manifest; decoding is deterministic.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output CSV for a single series, otherwise a directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    /// Labelled series CSV files or directories of them.
    #[arg(long, required = true, num_args = 1..)]
    pub series: Vec<PathBuf>,
    /// Model specification JSON; overrides `spec` in the configuration.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Priors JSON; overrides `priors` in the configuration.
    #[arg(long)]
    pub priors: Option<PathBuf>,
    /// CV configuration JSON (`spec`, `priors`, `cv`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Posterior draws used to decode each held-out series.
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output CSV with one row per fold and draw.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional Vega-Lite JSON for plotting.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Built-in study size used when no configuration is given.
    #[arg(long, value_enum, default_value = "desk")]
    pub scale: Scale,
    /// Study configuration JSON (`scenario`, `cv`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output CSV with one row per grid cell and model.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional Vega-Lite JSON for plotting.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

/// Parse `args` (program name first), run, and return the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                2
            } else {
                1
            }
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

pub fn run(cli: Cli) -> Result<()> {
    let pool = runner::thread_pool().map_err(|e| usage(format!("{e:#}")))?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Features(a) => features(a),
        Command::Fit(a) => fit(a),
        Command::Decode(a) => decode(a),
        Command::Cv(a) => cv(a),
        Command::Study(a) => study(a),
    })
}

/// `out.ext` becomes `out.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

/// `draws.json` becomes `draws.diagnostics.txt`.
pub fn diagnostics_path(out: &Path) -> PathBuf {
    out.with_extension("diagnostics.txt")
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(())
}

fn read_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    path.map_or_else(|| Ok(T::default()), io::read_json)
}

fn load_series(inputs: &[PathBuf]) -> Result<(Vec<PathBuf>, Vec<SeriesTable>)> {
    let paths = io::expand_inputs(inputs)?;
    let tables = paths.iter().map(|p| io::read_series(p)).collect::<Result<Vec<_>>>()?;
    Ok((paths, tables))
}

/// Flag value, then configuration value; a missing spec is a usage error.
fn resolve_spec(flag: Option<&Path>, config: Option<ModelSpec>) -> Result<ModelSpec> {
    let spec = match flag {
        Some(p) => io::read_json(p)?,
        None => config.ok_or_else(|| usage("a model specification is required (--spec or `spec` in --config)"))?,
    };
    spec.validate()?;
    Ok(spec)
}

fn resolve_priors(flag: Option<&Path>, config: Option<Priors>, spec: &ModelSpec) -> Result<Priors> {
    let priors = match flag {
        Some(p) => io::read_json(p)?,
        None => config.unwrap_or_else(|| Priors::default_for(spec)),
    };
    priors.validate(spec)?;
    Ok(priors)
}

// ---- simulate ----

/// One model simulated `n_series` times.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSimulation {
    spec: ModelSpec,
    params: Params,
    #[serde(default = "one")]
    n_series: usize,
    length: usize,
}

fn one() -> usize {
    1
}

fn simulate(a: SimulateArgs) -> Result<()> {
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let raw: Option<Value> = a.config.as_deref().map(io::read_json).transpose()?;
    let is_model = raw.as_ref().is_some_and(|v| v.get("params").is_some());
    let mut outputs = Vec::new();
    let (config, generating) = if is_model {
        let sim: ModelSimulation =
            serde_json::from_value(raw.expect("checked")).context("invalid model simulation config")?;
        let mut files = Vec::new();
        for i in 0..sim.n_series {
            let mut s = simulate_series(&sim.spec, &sim.params, sim.length, derive_seed(a.seed, i as u64))?;
            s.id = format!("series{i:02}");
            let name = format!("{}.csv", s.id);
            io::write_series(&a.out.join(&name), &SeriesTable::numbered(s))?;
            files.push(name);
        }
        outputs.extend(files.iter().cloned());
        let generating = json!({ "spec": sim.spec, "params": sim.params, "files": files });
        (serde_json::to_value(&sim)?, generating)
    } else {
        let grid: ScenarioConfig = match raw {
            Some(v) => serde_json::from_value(v).context("invalid scenario grid config")?,
            None => match a.scale {
                Scale::Desk => ScenarioConfig::desk(),
                Scale::Paper => ScenarioConfig::paper(),
            },
        };
        let mut cells = Vec::new();
        for (cell, series) in scenario_grid(&grid, a.seed)? {
            let mut files = Vec::new();
            for s in series {
                let name = format!("{}.csv", s.id);
                io::write_series(&a.out.join(&name), &SeriesTable::numbered(s))?;
                files.push(name);
            }
            outputs.extend(files.iter().cloned());
            cells.push(json!({
                "cell": cell.index,
                "label": cell.label(),
                "scenario": cell,
                "spec": cell.spec(),
                "params": cell.params(),
                "files": files,
            }));
        }
        (serde_json::to_value(&grid)?, Value::Array(cells))
    };
    let mut manifest = Manifest::new("simulate", a.seed, &config)?;
    manifest.add_inputs(a.config.as_deref())?;
    manifest.outputs = outputs;
    io::write_json(
        &a.out.join("manifest.json"),
        &json!({ "manifest": manifest, "generating": generating }),
    )
}

// ---- features ----

fn features(a: FeaturesArgs) -> Result<()> {
    let options: FeatureOptions = read_config(a.config.as_deref())?;
    let paths = io::expand_inputs(&a.series)?;
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let mut manifest = Manifest::new("features", a.seed, &options)?;
    manifest.add_inputs(paths.iter().map(PathBuf::as_path))?;
    for p in &paths {
        let raw = io::read_raw_accel(p)?;
        let feats = window_features(&raw, &options).with_context(|| format!("{}", p.display()))?;
        let name = format!("{}.csv", io::stem(p));
        io::write_features(&a.out.join(&name), &feats)?;
        manifest.outputs.push(name);
        manifest
            .warnings
            .extend(feats.warnings.iter().map(|w| format!("{}: {w}", io::stem(p))));
    }
    io::write_json(&a.out.join("manifest.json"), &json!({ "manifest": manifest }))
}

// ---- fit ----

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FitConfig {
    spec: Option<ModelSpec>,
    priors: Option<Priors>,
    sampler: SamplerSettings,
    n_draws: Option<usize>,
}

/// Effective fit configuration, recorded in the manifest.
#[derive(Debug, Serialize)]
struct FitRun<'a> {
    method: &'static str,
    spec: &'a ModelSpec,
    priors: &'a Priors,
    sampler: SamplerSettings,
    n_draws: usize,
}

/// Contents of a draws file written by `fit`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrawsFile {
    pub manifest: Manifest,
    pub spec: ModelSpec,
    pub draws: Vec<Params>,
    pub diagnostics: SamplerDiagnostics,
}

fn fit(a: FitArgs) -> Result<()> {
    let config: FitConfig = read_config(a.config.as_deref())?;
    let spec = resolve_spec(a.spec.as_deref(), config.spec)?;
    let priors = resolve_priors(a.priors.as_deref(), config.priors, &spec)?;
    let n_draws = if a.map {
        1
    } else {
        a.draws.or(config.n_draws).unwrap_or(DEFAULT_FIT_DRAWS)
    };
    let (paths, tables) = load_series(&a.series)?;
    let series: Vec<LabeledSeries> = tables.into_iter().map(|t| t.series).collect();
    let n_obs = series.iter().map(LabeledSeries::len).sum();

    let method = if a.map { "posterior mode" } else { "posterior sampling" };
    let posterior = if a.map {
        PosteriorDraws {
            spec: spec.clone(),
            draws: vec![map_fit(&series, &priors, &spec)?],
            diagnostics: SamplerDiagnostics {
                settings: config.sampler,
                n_draws: 1,
                blocks: Vec::new(),
                warnings: Vec::new(),
            },
        }
    } else {
        runner::fit(&series, &priors, &spec, config.sampler, n_draws, a.seed)?
    };

    let run = FitRun {
        method,
        spec: &spec,
        priors: &priors,
        sampler: config.sampler,
        n_draws,
    };
    let mut manifest = Manifest::new("fit", a.seed, &run)?;
    manifest.add_inputs(a.config.iter().chain(&a.spec).chain(&a.priors).map(PathBuf::as_path))?;
    manifest.add_inputs(paths.iter().map(PathBuf::as_path))?;
    let report_path = diagnostics_path(&a.out);
    manifest.outputs = vec![file_name(&a.out), file_name(&report_path)];
    manifest.warnings = posterior.diagnostics.warnings.clone();

    create_parent(&a.out)?;
    fs::write(
        &report_path,
        fit_report(&posterior, series.len(), n_obs, a.seed, method),
    )
    .with_context(|| format!("cannot write {}", report_path.display()))?;
    let file = DrawsFile {
        manifest,
        spec,
        draws: posterior.draws,
        diagnostics: posterior.diagnostics,
    };
    io::write_json(&a.out, &file)
}

// ---- decode ----

/// Accepts a draws file, a bare parameter set, or an array of them.
fn read_draws(path: &Path) -> Result<(Option<ModelSpec>, Vec<Params>)> {
    let v: Value = io::read_json(path)?;
    let context = || format!("{}: not a draws file or parameter set", path.display());
    if v.is_array() {
        return Ok((None, serde_json::from_value(v).with_context(context)?));
    }
    if v.get("draws").is_some() {
        #[derive(Deserialize)]
        struct Loose {
            spec: Option<ModelSpec>,
            draws: Vec<Params>,
        }
        let loose: Loose = serde_json::from_value(v).with_context(context)?;
        return Ok((loose.spec, loose.draws));
    }
    Ok((None, vec![serde_json::from_value(v).with_context(context)?]))
}

fn decode(a: DecodeArgs) -> Result<()> {
    let options: DecodeOptions = read_config(a.config.as_deref())?;
    let (file_spec, draws) = read_draws(&a.draws)?;
    let spec = match (a.spec.as_deref(), file_spec) {
        (Some(p), Some(fs)) => {
            let given: ModelSpec = io::read_json(p)?;
            if given != fs {
                return Err(usage("--spec differs from the specification stored in the draws file"));
            }
            given
        }
        (flag, fs) => resolve_spec(flag, fs)?,
    };
    if draws.is_empty() {
        anyhow::bail!("{}: no parameter draws", a.draws.display());
    }
    for (i, p) in draws.iter().enumerate() {
        p.validate(&spec).with_context(|| format!("draw {}", i + 1))?;
    }
    let (paths, tables) = load_series(&a.series)?;
    let single = tables.len() == 1 && !(a.out.is_dir() || a.out.to_string_lossy().ends_with(['/', '\\']));
    let (out_files, manifest_file): (Vec<PathBuf>, PathBuf) = if single {
        create_parent(&a.out)?;
        (vec![a.out.clone()], manifest_path(&a.out))
    } else {
        fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
        let files = paths
            .iter()
            .map(|p| a.out.join(format!("{}.csv", io::stem(p))))
            .collect();
        (files, a.out.join("manifest.json"))
    };

    let mut summaries = Vec::new();
    for (table, out) in tables.iter().zip(&out_files) {
        let s = &table.series;
        let pooled = runner::decode(s, &draws, &spec, DecodeMode::Both, &options)
            .with_context(|| format!("decoding {}", s.id))?;
        let probs = pooled.mean_local_probs.clone().expect("local decoding requested");
        let local = pooled.local_path.clone().expect("local decoding requested");
        let global = runner::majority_path(&pooled).expect("global decoding requested");
        io::write_decoding(out, &table.time, &global, &probs, &local)?;
        let evidence: Vec<f64> = pooled
            .per_draw
            .iter()
            .filter_map(|r| r.local.as_ref().map(|l| l.log_evidence))
            .collect();
        let mut summary = json!({
            "series": s.id,
            "output": file_name(out),
            "mean_log_evidence": evidence.iter().sum::<f64>() / evidence.len() as f64,
        });
        if let Some(labels) = &s.labels {
            let acc =
                |path: &[usize]| labels.iter().zip(path).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64;
            summary["accuracy_local"] = json!(acc(&local));
            summary["accuracy_global"] = json!(acc(&global));
        }
        summaries.push(summary);
    }
    let mut manifest = Manifest::new("decode", a.seed, &json!({ "spec": spec, "options": options }))?;
    manifest.add_inputs(
        std::iter::once(a.draws.as_path())
            .chain(a.spec.as_deref())
            .chain(a.config.as_deref()),
    )?;
    manifest.add_inputs(paths.iter().map(PathBuf::as_path))?;
    manifest.outputs = out_files.iter().map(|p| file_name(p)).collect();
    io::write_json(&manifest_file, &json!({ "manifest": manifest, "series": summaries }))
}

// ---- cv ----

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CvConfig {
    spec: Option<ModelSpec>,
    priors: Option<Priors>,
    cv: CvSettings,
}

fn quartile_fields(q: &Quartiles) -> [String; 3] {
    [fmt_f64(q.q1), fmt_f64(q.median), fmt_f64(q.q3)]
}

/// Vega-Lite document over `rows` with the manifest under `usermeta`.
fn plot_document(manifest: &Manifest, rows: Vec<Value>, mark: &str, encoding: Value) -> Value {
    json!({
        "$schema": "https://vega.github.io/schema/vega-lite/v5.json",
        "usermeta": { "manifest": manifest },
        "data": { "values": rows },
        "mark": mark,
        "encoding": encoding,
    })
}

fn cv(a: CvArgs) -> Result<()> {
    let config: CvConfig = read_config(a.config.as_deref())?;
    let spec = resolve_spec(a.spec.as_deref(), config.spec)?;
    let priors = resolve_priors(a.priors.as_deref(), config.priors, &spec)?;
    let mut settings = config.cv;
    if let Some(n) = a.draws {
        settings.n_pred_draws = n;
    }
    let (paths, tables) = load_series(&a.series)?;
    let series: Vec<LabeledSeries> = tables.into_iter().map(|t| t.series).collect();
    let report = runner::cross_validate(&series, &priors, &spec, &settings, a.seed)?;

    let header: Vec<String> = [
        "fold",
        "held_out",
        "series",
        "draw",
        "accuracy_local",
        "accuracy_global",
        "ce_total",
        "ce_mean",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = Vec::new();
    let mut plot_rows = Vec::new();
    for (f, fold) in report.folds.iter().enumerate() {
        for r in 0..fold.accuracy_local.len() {
            rows.push(vec![
                (f + 1).to_string(),
                (fold.held_out + 1).to_string(),
                fold.held_out_id.clone(),
                (r + 1).to_string(),
                fmt_f64(fold.accuracy_local[r]),
                fmt_f64(fold.accuracy_global[r]),
                fmt_f64(fold.ce_total[r]),
                fmt_f64(fold.ce_mean[r]),
            ]);
            plot_rows.push(json!({
                "series": fold.held_out_id,
                "draw": r + 1,
                "accuracy_local": fold.accuracy_local[r],
                "accuracy_global": fold.accuracy_global[r],
                "ce_mean": fold.ce_mean[r],
            }));
        }
    }
    create_parent(&a.out)?;
    io::write_table(&a.out, &header, rows)?;

    let run = json!({ "spec": spec, "priors": priors, "cv": settings });
    let mut manifest = Manifest::new("cv", a.seed, &run)?;
    manifest.add_inputs(a.config.iter().chain(&a.spec).chain(&a.priors).map(PathBuf::as_path))?;
    manifest.add_inputs(paths.iter().map(PathBuf::as_path))?;
    manifest.outputs = std::iter::once(&a.out).chain(&a.plot).map(|p| file_name(p)).collect();
    for fold in &report.folds {
        manifest
            .warnings
            .extend(fold.warnings.iter().map(|w| format!("fold {}: {w}", fold.held_out_id)));
    }
    if let Some(plot) = &a.plot {
        create_parent(plot)?;
        let encoding = json!({
            "x": { "field": "series", "type": "nominal" },
            "y": { "field": "accuracy_local", "type": "quantitative" },
        });
        io::write_json(plot, &plot_document(&manifest, plot_rows, "boxplot", encoding))?;
    }
    io::write_json(
        &manifest_path(&a.out),
        &json!({ "manifest": manifest, "summary": report.pooled }),
    )
}

// ---- study ----

/// Column order of the study table.
pub fn study_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "cell",
        "label",
        "overlap",
        "sojourn_mean_avg",
        "sojourn_mean_diff",
        "k1",
        "k2",
        "dispersion_class",
        "model",
        "n_folds",
    ]
    .map(String::from)
    .to_vec();
    for metric in ["ce_mean", "ce_total", "accuracy_local", "accuracy_global"] {
        for q in ["q1", "median", "q3"] {
            h.push(format!("{metric}_{q}"));
        }
    }
    h
}

fn enum_text<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        _ => String::new(),
    }
}

fn study_fields(r: &StudyRow) -> Vec<String> {
    let mut row = vec![
        r.cell.to_string(),
        r.label.clone(),
        enum_text(&r.overlap),
        fmt_f64(r.sojourn_mean_avg),
        fmt_f64(r.sojourn_mean_diff),
        fmt_f64(r.k1),
        fmt_f64(r.k2),
        enum_text(&r.dispersion_class),
        enum_text(&r.model),
        r.n_folds.to_string(),
    ];
    for q in [&r.ce_mean, &r.ce_total, &r.accuracy_local, &r.accuracy_global] {
        row.extend(quartile_fields(q));
    }
    row
}

fn study(a: StudyArgs) -> Result<()> {
    let config: StudyConfig = match a.config.as_deref() {
        Some(p) => io::read_json(p)?,
        None => match a.scale {
            Scale::Desk => StudyConfig::desk(),
            Scale::Paper => StudyConfig::paper(),
        },
    };
    let rows = runner::study(&config, a.seed)?;
    create_parent(&a.out)?;
    io::write_table(&a.out, &study_header(), rows.iter().map(study_fields))?;

    let mut manifest = Manifest::new("study", a.seed, &config)?;
    manifest.add_inputs(a.config.as_deref())?;
    manifest.outputs = std::iter::once(&a.out).chain(&a.plot).map(|p| file_name(p)).collect();
    if let Some(plot) = &a.plot {
        create_parent(plot)?;
        let values = rows
            .iter()
            .map(|r| {
                json!({
                    "cell": r.cell,
                    "overlap": r.overlap,
                    "sojourn_mean_avg": r.sojourn_mean_avg,
                    "sojourn_mean_diff": r.sojourn_mean_diff,
                    "dispersion": format!("k=({},{})", r.k1, r.k2),
                    "model": r.model,
                    "accuracy_local_median": r.accuracy_local.median,
                    "ce_mean_median": r.ce_mean.median,
                })
            })
            .collect();
        let encoding = json!({
            "row": { "field": "overlap", "type": "nominal" },
            "column": { "field": "dispersion", "type": "nominal" },
            "x": { "field": "sojourn_mean_diff", "type": "ordinal" },
            "y": { "field": "accuracy_local_median", "type": "quantitative" },
            "color": { "field": "model", "type": "nominal" },
            "shape": { "field": "sojourn_mean_avg", "type": "ordinal" },
        });
        io::write_json(plot, &plot_document(&manifest, values, "point", encoding))?;
    }
    io::write_json(&manifest_path(&a.out), &json!({ "manifest": manifest }))
}
