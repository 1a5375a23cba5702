//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage and validation errors (reported
//! before any computation), 3 for data and runtime errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    self, column_stats, compute_domains, derive_class, load_csv, load_domains, split_train_test,
    AttributeDomain, Dataset, LoadOptions,
};
use crate::error::Error;
use crate::evaluation::{run_experiment, sse, ExperimentGrid, Normalization};
use crate::mechanisms::{MechanismConfig, Method, Release, MIN_K_CBLS};
use crate::microaggregation::cluster_all;
use crate::sensitivity::{SensitivityDigest, SensitivityKind, SensitivityProfile, REPORT_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

/// Version of the manifest and experiment-config layouts.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "idp-microagg", version, about = "DP / iDP microdata release via microaggregation")]
pub struct Cli {
    /// Worker threads (defaults to the machine's parallelism). Output does
    /// not depend on this value.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Release a masked copy of a dataset.
    Anonymize(AnonymizeArgs),
    /// Information loss (SSE and mean SSE) between original and masked data.
    Sse(SseArgs),
    /// Train rows from the masked file, test rows from the original.
    Split(SplitArgs),
    /// Replace a numeric attribute by a low/high class label.
    DeriveClass(DeriveClassArgs),
    /// Run an experiment grid described by a JSON config.
    Experiment(ExperimentArgs),
    /// Per-cluster sensitivities as CSV.
    SensitivityReport(SensitivityArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated attributes to read (default: every non-id, non-label column).
    #[arg(long, value_delimiter = ',')]
    pub attributes: Option<Vec<String>>,
    /// String column carried through as a class label.
    #[arg(long)]
    pub label: Option<String>,
}

impl InputArgs {
    fn load(&self) -> Result<Dataset, CliError> {
        Ok(load_csv(
            &self.input,
            &LoadOptions {
                attributes: self.attributes.clone(),
                label: self.label.clone(),
            },
        )?)
    }
}

#[derive(Debug, Args)]
pub struct DomainArgs {
    /// Domains are [0, alpha * column max].
    #[arg(long, conflicts_with = "domains")]
    pub alpha: Option<f64>,
    /// JSON file mapping attribute name to [lower, upper].
    #[arg(long)]
    pub domains: Option<PathBuf>,
}

impl DomainArgs {
    fn given(&self) -> bool {
        self.alpha.is_some() || self.domains.is_some()
    }

    fn validate(&self) -> Result<(), CliError> {
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(CliError::usage(format!("--alpha must be positive, got {a}")));
            }
        }
        Ok(())
    }

    fn resolve(&self, d: &Dataset) -> Result<Option<Vec<AttributeDomain>>, CliError> {
        if let Some(alpha) = self.alpha {
            return Ok(Some(compute_domains(d, alpha)?));
        }
        if let Some(path) = &self.domains {
            return Ok(Some(load_domains(path, d.attributes())?));
        }
        Ok(None)
    }
}

#[derive(Debug, Args)]
pub struct AnonymizeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub method: Method,
    #[arg(long)]
    pub epsilon: f64,
    /// Minimum cluster size (not used by dp).
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub domains: DomainArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Force clamping on or off (default: on whenever domains are known).
    #[arg(long)]
    pub clamp: Option<bool>,
    /// Comma-separated positive budget weights, one per attribute.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long)]
    pub output: PathBuf,
    /// Manifest path (default: <output>.manifest.json).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Write per-cluster boundaries and centroids here.
    #[arg(long)]
    pub dump_clusters: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SseArgs {
    #[arg(long)]
    pub original: PathBuf,
    #[arg(long)]
    pub masked: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub attributes: Option<Vec<String>>,
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, default_value = "variance")]
    pub normalization: Normalization,
    /// Also write the report as JSON.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub original: PathBuf,
    #[arg(long)]
    pub masked: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub attributes: Option<Vec<String>>,
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, default_value_t = 0.66)]
    pub fraction: f64,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
}

#[derive(Debug, Args)]
pub struct DeriveClassArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub attribute: String,
    #[arg(long)]
    pub threshold: f64,
    #[arg(long, default_value = "class")]
    pub label_name: String,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    pub domains: DomainArgs,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Data(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        // Fails only if a pool already exists (repeated in-process calls).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Anonymize(a) => cmd_anonymize(&a),
        Command::Sse(a) => cmd_sse(&a),
        Command::Split(a) => cmd_split(&a),
        Command::DeriveClass(a) => cmd_derive_class(&a),
        Command::Experiment(a) => cmd_experiment(&a.config),
        Command::SensitivityReport(a) => cmd_sensitivity_report(&a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e).into())
}

fn validate_anonymize(a: &AnonymizeArgs) -> Result<usize, CliError> {
    if !(a.epsilon > 0.0 && a.epsilon.is_finite()) {
        return Err(CliError::usage(format!("--epsilon must be positive, got {}", a.epsilon)));
    }
    a.domains.validate()?;
    if a.seed.is_none() {
        return Err(CliError::usage("--seed is required; randomness is never seeded implicitly"));
    }
    let k = match (a.method.microaggregates(), a.k) {
        (true, None) => return Err(CliError::usage(format!("--k is required for {}", a.method))),
        (true, Some(k)) if k < a.method.min_k() => {
            return Err(CliError::usage(format!(
                "k must be ≥ {} for {}",
                a.method.min_k(),
                a.method
            )))
        }
        (true, Some(k)) => k,
        (false, _) => 1,
    };
    if a.method.needs_domains() && !a.domains.given() {
        return Err(CliError::usage(format!(
            "{} needs bounded domains: pass --alpha or --domains",
            a.method
        )));
    }
    if a.clamp == Some(true) && !a.domains.given() {
        return Err(CliError::usage("--clamp true needs --alpha or --domains"));
    }
    if let Some(w) = &a.weights {
        if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(CliError::usage("--weights must all be positive"));
        }
    }
    Ok(k)
}

/// JSON manifest written next to every masked file.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub tool_version: String,
    pub schema_version: u32,
    pub config: ManifestConfig,
    pub epsilon_shares: Vec<f64>,
    pub sensitivity: Vec<ManifestSensitivity>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestConfig {
    pub input: String,
    pub output: String,
    pub attributes: Vec<String>,
    pub method: Method,
    pub epsilon: f64,
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    pub domains: Option<Vec<AttributeDomain>>,
    pub weights: Option<Vec<f64>>,
    pub seed: u64,
    pub clamp: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestSensitivity {
    pub attribute: String,
    pub kind: String,
    pub clusters: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl From<SensitivityDigest> for ManifestSensitivity {
    fn from(d: SensitivityDigest) -> Self {
        Self {
            attribute: d.attribute,
            kind: d.kind.as_str().to_string(),
            clusters: d.clusters,
            min: d.min,
            median: d.median,
            max: d.max,
        }
    }
}

fn manifest_path(a: &AnonymizeArgs) -> PathBuf {
    a.manifest.clone().unwrap_or_else(|| {
        let mut s = a.output.clone().into_os_string();
        s.push(".manifest.json");
        PathBuf::from(s)
    })
}

pub fn cmd_anonymize(a: &AnonymizeArgs) -> Result<(), CliError> {
    let k = validate_anonymize(a)?;
    let seed = a.seed.expect("validated");
    let data = a.input.load()?;
    let domains = a.domains.resolve(&data)?;
    let cfg = MechanismConfig {
        method: a.method,
        epsilon: a.epsilon,
        k,
        domains,
        weights: a.weights.clone(),
        seed,
        clamp: a.clamp,
    };
    let release = cfg.release(&data)?;
    release.dataset.save_csv(&a.output)?;

    let manifest = build_manifest(a, &cfg, &release);
    let path = manifest_path(a);
    serde_json::to_writer_pretty(create(&path)?, &manifest).map_err(Error::from)?;

    if let Some(path) = &a.dump_clusters {
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(["attribute", "cluster_index", "size", "min", "max", "centroid"])
            .map_err(Error::from)?;
        for (c, col) in release.clusterings.iter().zip(data.columns()) {
            c.write_summary(col, &mut w)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn build_manifest(a: &AnonymizeArgs, cfg: &MechanismConfig, release: &Release) -> Manifest {
    Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        schema_version: SCHEMA_VERSION,
        config: ManifestConfig {
            input: a.input.input.display().to_string(),
            output: a.output.display().to_string(),
            attributes: release.dataset.attributes().to_vec(),
            method: cfg.method,
            epsilon: cfg.epsilon,
            k: cfg.method.microaggregates().then_some(cfg.k),
            alpha: a.domains.alpha,
            domains: cfg.domains.clone(),
            weights: cfg.weights.clone(),
            seed: cfg.seed,
            clamp: cfg.clamps(),
        },
        epsilon_shares: release.budget.shares().to_vec(),
        sensitivity: release
            .profiles
            .iter()
            .map(|p| p.digest().into())
            .collect(),
    }
}

fn cmd_sse(a: &SseArgs) -> Result<(), CliError> {
    let opts = LoadOptions {
        attributes: a.attributes.clone(),
        label: a.label.clone(),
    };
    let original = load_csv(&a.original, &opts)?;
    let masked = load_csv(&a.masked, &opts)?;
    let stats = column_stats(&original)?;
    let report = sse(&original, &masked, &stats, a.normalization)?;
    println!("sse,mean_sse");
    println!("{},{}", report.sse, report.mean_sse);
    if let Some(path) = &a.output {
        serde_json::to_writer_pretty(create(path)?, &report).map_err(Error::from)?;
    }
    Ok(())
}

fn cmd_split(a: &SplitArgs) -> Result<(), CliError> {
    if !(a.fraction > 0.0 && a.fraction < 1.0) {
        return Err(CliError::usage(format!(
            "--fraction must lie strictly between 0 and 1, got {}",
            a.fraction
        )));
    }
    let opts = LoadOptions {
        attributes: a.attributes.clone(),
        label: a.label.clone(),
    };
    let original = load_csv(&a.original, &opts)?;
    let masked = load_csv(&a.masked, &opts)?;
    let (train, test) = split_train_test(&original, &masked, a.fraction)?;
    train.save_csv(&a.train)?;
    test.save_csv(&a.test)?;
    Ok(())
}

fn cmd_derive_class(a: &DeriveClassArgs) -> Result<(), CliError> {
    if !a.threshold.is_finite() {
        return Err(CliError::usage("--threshold must be finite"));
    }
    if a.label_name.is_empty() || a.label_name == dataset::ID_COLUMN {
        return Err(CliError::usage(format!("invalid label name '{}'", a.label_name)));
    }
    let data = load_csv(&a.input, &LoadOptions::default())?;
    let labeled = derive_class(&data, &a.attribute, a.threshold, &a.label_name)?;
    labeled.save_csv(&a.output)?;
    Ok(())
}

/// Experiment configuration file (JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Input CSV; relative paths are resolved against the config's directory.
    pub dataset: PathBuf,
    #[serde(default)]
    pub attributes: Option<Vec<String>>,
    #[serde(flatten)]
    pub grid: ExperimentGrid,
    pub results_csv: PathBuf,
    pub averages_csv: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| CliError::usage(format!("invalid experiment config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::usage(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.grid
            .validate()
            .map_err(|e| CliError::usage(e.to_string()))?;
        Ok(cfg)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn cmd_experiment(config_path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(config_path).map_err(|e| Error::io(config_path, e))?;
    let cfg = ExperimentConfig::parse(&text)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let data = load_csv(
        resolve(base, &cfg.dataset),
        &LoadOptions {
            attributes: cfg.attributes.clone(),
            label: None,
        },
    )?;
    let out = run_experiment(&cfg.grid, &data)?;
    let results = resolve(base, &cfg.results_csv);
    out.write_results(create(&results)?)?;
    let averages = resolve(base, &cfg.averages_csv);
    out.write_averages(create(&averages)?)?;
    Ok(())
}

fn cmd_sensitivity_report(a: &SensitivityArgs) -> Result<(), CliError> {
    if a.k == 0 {
        return Err(CliError::usage("--k must be at least 1"));
    }
    a.domains.validate()?;
    let data = a.input.load()?;
    let domains = a.domains.resolve(&data)?;
    let clusterings = cluster_all(&data, a.k)?;

    let mut kinds = Vec::new();
    if domains.is_some() {
        kinds.extend([SensitivityKind::Global, SensitivityKind::Local]);
    }
    if a.k >= MIN_K_CBLS {
        kinds.push(SensitivityKind::ClusterBasedLocal);
    }
    if kinds.is_empty() {
        return Err(CliError::usage(format!(
            "nothing to report: give --alpha/--domains or use k ≥ {MIN_K_CBLS}"
        )));
    }

    let mut w = csv::Writer::from_writer(create(&a.output)?);
    w.write_record(REPORT_HEADER).map_err(Error::from)?;
    for (i, (clustering, col)) in clusterings.iter().zip(data.columns()).enumerate() {
        for &kind in &kinds {
            let dom = domains.as_ref().map(|d| &d[i]);
            SensitivityProfile::compute(kind, clustering, col, dom)?.write_rows(&mut w)?;
        }
    }
    w.flush().map_err(|e| Error::io(&a.output, e))?;
    Ok(())
}
