//! Command-line front end: robustness scores, dependency matrices, the MI
//! baseline, plot-data emission and synthetic data generation.
//!
//! Exit codes: 0 success, 2 usage/validation error, 3 degenerate result
//! (e.g. only inactive features), 4 I/O error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use sha2::{Digest, Sha256};

use irs_engine::io::{load_matrix, write_csv, write_npy, ColumnSelector};
use irs_engine::synth::{sample_dataset, SampleMode, ScmConfig as Process};
use irs_engine::viz::viz_report;
use irs_engine::{
    build_partition, dependency_matrix, domain_shift_score, ingest, irs, mi_report,
    DiscretizationPlan, Distance, Error as EngineError, FastPath, IndexSpec, LabeledDataset,
    MeanMode, ScoreConfig, Strategy, WeightNorm, DEFAULT_BINS, DEFAULT_MI_BUCKETS,
};

const EXIT_VALIDATION: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "irs",
    version,
    about = "Interventional robustness and disentanglement scores for labeled representations"
)]
struct Cli {
    /// Worker threads for parallel sections (default: IRS_ENGINE_WORKERS or all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one robustness score IRS(L | I, J) or a domain-shift score
    Score(ScoreArgs),
    /// Compute the full feature-by-factor dependency matrix (or the MI baseline)
    Matrix(MatrixArgs),
    /// Emit plot-ready interventional response curves for chosen features
    Viz(VizArgs),
    /// Generate a synthetic labeled dataset from a causal-process config
    Synth(SynthArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Codes file: CSV (columns prefixed z_ by default) or .npy matrix
    #[arg(long)]
    codes: PathBuf,
    /// Factors file: CSV (columns prefixed g_ by default) or .npy matrix
    #[arg(long)]
    factors: PathBuf,
    /// Explicit code column names (comma-separated; CSV only)
    #[arg(long, value_name = "NAMES")]
    code_columns: Option<String>,
    /// Explicit factor column names (comma-separated; CSV only)
    #[arg(long, value_name = "NAMES")]
    factor_columns: Option<String>,
    /// Discretization plan JSON for continuous factor columns
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Args)]
struct EstimatorArgs {
    /// Distance between mean encodings: l2, l1 or linf
    #[arg(long, default_value = "l2")]
    distance: String,
    /// Mean estimation: weighted (confounding-corrected) or conditional
    #[arg(long, default_value = "weighted")]
    mode: String,
    /// Use raw importance weights instead of self-normalized ones
    #[arg(long)]
    raw_weights: bool,
    /// Exclude nuisance cells with fewer rows from the worst case
    #[arg(long, default_value_t = 1)]
    min_cell_size: usize,
    /// Clamp reported scores into [0, 1]
    #[arg(long)]
    clamp: bool,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Feature indices or names (comma-separated)
    #[arg(long = "L", value_name = "SET")]
    features: String,
    /// Held factor indices or names (comma-separated; may be empty)
    #[arg(long = "I", value_name = "SET", default_value = "")]
    held: String,
    /// Nuisance factor indices or names (comma-separated)
    #[arg(long = "J", value_name = "SET", default_value = "")]
    nuisance: String,
    /// Domain-shift factor set S; overrides --I/--J with I = complement, J = S
    #[arg(long, value_name = "SET")]
    shift: Option<String>,
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Debug: dump the partition skeleton (keys and sizes) as JSON to this path
    #[arg(long)]
    dump_partition: Option<PathBuf>,
}

#[derive(Args)]
struct MatrixArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Metric: irs or mi
    #[arg(long, default_value = "irs")]
    metric: String,
    /// Bucket count for the MI baseline
    #[arg(long, default_value_t = DEFAULT_MI_BUCKETS)]
    buckets: usize,
    /// Crossed noise-free fast path: auto, on or off
    #[arg(long, default_value = "auto")]
    fast_path: String,
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the bare matrix as CSV to this path
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct VizArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Feature indices or names to plot (comma-separated)
    #[arg(long = "features", value_name = "SET")]
    features: String,
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// Write the JSON curve sets here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Causal-process config JSON
    #[arg(long)]
    config: PathBuf,
    /// Number of rows to sample (ignored with --crossed)
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// RNG seed; identical seeds give byte-identical outputs
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Emit every full factor combination exactly once instead of sampling
    #[arg(long)]
    crossed: bool,
    /// Data file format: csv or npy
    #[arg(long, default_value = "csv")]
    format: String,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_IO,
            message: message.into(),
        }
    }

    fn degenerate(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DEGENERATE,
            message: message.into(),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Io(inner) => CliError::io(inner.to_string()),
            other => CliError::validation(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_workers(cli.workers) {
        eprintln!("error: {}", e.message);
        return ExitCode::from(e.code);
    }
    let result = match cli.command {
        Command::Score(args) => cmd_score(args),
        Command::Matrix(args) => cmd_matrix(args),
        Command::Viz(args) => cmd_viz(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn configure_workers(flag: Option<usize>) -> Result<(), CliError> {
    let workers = match flag {
        Some(w) => Some(w),
        None => match std::env::var("IRS_ENGINE_WORKERS") {
            Ok(v) => Some(v.parse::<usize>().map_err(|_| {
                CliError::validation(format!(
                    "IRS_ENGINE_WORKERS must be a positive integer, got '{v}'"
                ))
            })?),
            Err(_) => None,
        },
    };
    if let Some(w) = workers {
        if w == 0 {
            return Err(CliError::validation("worker count must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::validation(format!("cannot configure {w} workers: {e}")))?;
    }
    Ok(())
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::io(format!("no such file: {}", path.display())));
    }
    Ok(())
}

fn split_names(list: &str) -> Vec<String> {
    list.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Load codes + factors, apply the discretization plan, and return the
/// dataset with whatever column names the inputs carried.
fn load_dataset(input: &InputArgs) -> Result<LabeledDataset, CliError> {
    require_file(&input.codes)?;
    require_file(&input.factors)?;

    let code_selector = match &input.code_columns {
        Some(list) => ColumnSelector::Names(split_names(list)),
        None => ColumnSelector::Prefix("z_".to_string()),
    };
    let factor_selector = match &input.factor_columns {
        Some(list) => ColumnSelector::Names(split_names(list)),
        None => ColumnSelector::Prefix("g_".to_string()),
    };
    let (codes, code_names) = load_matrix(&input.codes, &code_selector)?;
    let (raw_factors, factor_names) = load_matrix(&input.factors, &factor_selector)?;

    let resolved_factor_names: Vec<String> = match &factor_names {
        Some(names) => names.clone(),
        None => (0..raw_factors.ncols()).map(|i| format!("g_{i}")).collect(),
    };
    let default_continuous = Strategy::Quantile { bins: DEFAULT_BINS };
    let strategies = match &input.plan {
        Some(path) => {
            require_file(path)?;
            let text = fs::read_to_string(path).map_err(|e| CliError::io(e.to_string()))?;
            let plan = DiscretizationPlan::from_json(&text)?;
            plan.resolve(&resolved_factor_names, &raw_factors, default_continuous)?
        }
        None => {
            let plan = DiscretizationPlan { factors: vec![] };
            plan.resolve(&resolved_factor_names, &raw_factors, default_continuous)?
        }
    };

    let outcome = ingest(codes, &raw_factors, &strategies)?;
    Ok(outcome
        .dataset
        .with_names(Some(resolved_factor_names), code_names))
}

/// Parse a comma-separated index set; tokens may be 0-based indices or
/// column names when the dataset carries them.
fn parse_index_set(
    list: &str,
    names: Option<&[String]>,
    bound: usize,
    flag: &str,
) -> Result<Vec<usize>, CliError> {
    let mut out = Vec::new();
    for token in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let idx = if let Ok(i) = token.parse::<usize>() {
            i
        } else if let Some(pos) = names.and_then(|n| n.iter().position(|h| h == token)) {
            pos
        } else {
            return Err(CliError::validation(format!(
                "{flag}: '{token}' is neither an index nor a known column name"
            )));
        };
        if idx >= bound {
            return Err(CliError::validation(format!(
                "{flag}: index {idx} out of range (limit {bound})"
            )));
        }
        out.push(idx);
    }
    Ok(out)
}

fn build_score_config(args: &EstimatorArgs) -> Result<ScoreConfig, CliError> {
    let distance: Distance = args
        .distance
        .parse()
        .map_err(|e: String| CliError::validation(format!("--distance: {e}")))?;
    let mode: MeanMode = args
        .mode
        .parse()
        .map_err(|e: String| CliError::validation(format!("--mode: {e}")))?;
    Ok(ScoreConfig {
        distance,
        mode,
        weight_norm: if args.raw_weights {
            WeightNorm::Raw
        } else {
            WeightNorm::SelfNormalized
        },
        min_cell_size: args.min_cell_size.max(1),
        clamp: args.clamp,
        ..ScoreConfig::default()
    })
}

fn emit(out: &Option<PathBuf>, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable report");
    match out {
        Some(path) => fs::write(path, text + "\n").map_err(|e| CliError::io(e.to_string())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_score(args: ScoreArgs) -> Result<(), CliError> {
    let d = load_dataset(&args.input)?;
    let cfg = build_score_config(&args.estimator)?;
    let feature_names = d.feature_names().map(<[String]>::to_vec);
    let factor_names = d.factor_names().map(<[String]>::to_vec);
    let features = parse_index_set(
        &args.features,
        feature_names.as_deref(),
        d.num_features(),
        "--L",
    )?;
    if features.is_empty() {
        return Err(CliError::validation("--L: feature set must be non-empty"));
    }

    let (spec, outcome, kind) = if let Some(shift) = &args.shift {
        let s = parse_index_set(shift, factor_names.as_deref(), d.num_factors(), "--shift")?;
        if s.is_empty() {
            return Err(CliError::validation("--shift: factor set must be non-empty"));
        }
        let held: Vec<usize> = (0..d.num_factors()).filter(|i| !s.contains(i)).collect();
        let spec = IndexSpec::new(features.clone(), held, s, &d)?;
        let outcome = domain_shift_score(&d, features.clone(), spec.nuisance(), &cfg)?;
        (spec, outcome, "domain_shift")
    } else {
        let held = parse_index_set(&args.held, factor_names.as_deref(), d.num_factors(), "--I")?;
        let nuisance =
            parse_index_set(&args.nuisance, factor_names.as_deref(), d.num_factors(), "--J")?;
        if nuisance.is_empty() {
            return Err(CliError::validation(
                "--J: nuisance factor set must be non-empty",
            ));
        }
        let spec = IndexSpec::new(features.clone(), held, nuisance, &d)?;
        let outcome = irs(&d, &spec, &cfg)?;
        (spec, outcome, "irs")
    };

    if let Some(path) = &args.dump_partition {
        let (parts, _) = build_partition(&d, &spec);
        let text = serde_json::to_string_pretty(&parts.skeleton()).expect("skeleton json");
        fs::write(path, text + "\n").map_err(|e| CliError::io(e.to_string()))?;
    }

    let report = serde_json::json!({
        "metric": kind,
        "L": spec.features(),
        "I": spec.held(),
        "J": spec.nuisance(),
        "score": outcome.score,
        "numerator": outcome.numerator,
        "normalizer": outcome.normalizer,
        "active": outcome.active,
        "clamped": outcome.clamped,
        "config": cfg,
        "warnings": outcome.warnings,
    });
    emit(&args.out, &report)?;
    if !outcome.active {
        return Err(CliError::degenerate(
            "the requested feature set is inactive (normalizer below threshold); no score",
        ));
    }
    Ok(())
}

fn cmd_matrix(args: MatrixArgs) -> Result<(), CliError> {
    let d = load_dataset(&args.input)?;
    match args.metric.as_str() {
        "irs" => {
            let cfg = build_score_config(&args.estimator)?;
            let fast_path: FastPath = args
                .fast_path
                .parse()
                .map_err(|e: String| CliError::validation(format!("--fast-path: {e}")))?;
            let report = dependency_matrix(&d, &cfg, fast_path)?;
            if let Some(path) = &args.csv {
                write_matrix_csv(path, d.num_factors(), &report_matrix(&report.matrix))?;
            }
            let value = serde_json::to_value(&report).expect("serializable report");
            emit(&args.out, &value)?;
            if report.overall.is_none() {
                return Err(CliError::degenerate(
                    "all features are inactive; no overall score",
                ));
            }
        }
        "mi" => {
            let report = mi_report(&d, args.buckets)?;
            if let Some(path) = &args.csv {
                let rows: Vec<Vec<f64>> = report.matrix.clone();
                write_matrix_csv(path, d.num_factors(), &rows)?;
            }
            let value = serde_json::to_value(&report).expect("serializable report");
            emit(&args.out, &value)?;
        }
        other => {
            return Err(CliError::validation(format!(
                "--metric: unknown metric '{other}' (expected irs or mi)"
            )));
        }
    }
    Ok(())
}

fn report_matrix(matrix: &[Vec<Option<f64>>]) -> Vec<Vec<f64>> {
    matrix
        .iter()
        .map(|row| row.iter().map(|v| v.unwrap_or(f64::NAN)).collect())
        .collect()
}

fn write_matrix_csv(path: &Path, k: usize, rows: &[Vec<f64>]) -> Result<(), CliError> {
    let headers: Vec<String> = (0..k).map(|i| format!("g_{i}")).collect();
    let data = Array2::from_shape_fn((rows.len(), k), |(r, c)| rows[r][c]);
    write_csv(path, &headers, &data)?;
    Ok(())
}

fn cmd_viz(args: VizArgs) -> Result<(), CliError> {
    let d = load_dataset(&args.input)?;
    let cfg = build_score_config(&args.estimator)?;
    let feature_names = d.feature_names().map(<[String]>::to_vec);
    let features = parse_index_set(
        &args.features,
        feature_names.as_deref(),
        d.num_features(),
        "--features",
    )?;
    if features.is_empty() {
        return Err(CliError::validation(
            "--features: feature set must be non-empty",
        ));
    }
    let mut reports = Vec::with_capacity(features.len());
    for feature in features {
        reports.push(viz_report(&d, feature, &cfg)?);
    }
    let value = serde_json::to_value(&reports).expect("serializable curves");
    emit(&args.out, &value)
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    require_file(&args.config)?;
    let config_text = fs::read_to_string(&args.config).map_err(|e| CliError::io(e.to_string()))?;
    let process = Process::from_json(&config_text)?;
    let mode = if args.crossed {
        SampleMode::Crossed
    } else {
        SampleMode::Random { n: args.n }
    };
    let d = sample_dataset(&process, mode, args.seed)?;

    fs::create_dir_all(&args.out).map_err(|e| CliError::io(e.to_string()))?;
    let codes = d.codes().clone();
    let factors = d.factors().mapv(|v| v as f64);
    let (codes_file, factors_file) = match args.format.as_str() {
        "csv" => {
            let code_headers: Vec<String> =
                (0..d.num_features()).map(|l| format!("z_{l}")).collect();
            let factor_headers: Vec<String> =
                (0..d.num_factors()).map(|i| format!("g_{i}")).collect();
            write_csv(&args.out.join("codes.csv"), &code_headers, &codes)?;
            write_csv(&args.out.join("factors.csv"), &factor_headers, &factors)?;
            ("codes.csv", "factors.csv")
        }
        "npy" => {
            write_npy(&args.out.join("codes.npy"), &codes)?;
            write_npy(&args.out.join("factors.npy"), &factors)?;
            ("codes.npy", "factors.npy")
        }
        other => {
            return Err(CliError::validation(format!(
                "--format: unknown format '{other}' (expected csv or npy)"
            )));
        }
    };

    // config echo + manifest with a hash tying outputs to the exact config
    fs::write(args.out.join("scm_config.json"), &config_text)
        .map_err(|e| CliError::io(e.to_string()))?;
    let config_sha256 = hex(&Sha256::digest(config_text.as_bytes()));
    let manifest = serde_json::json!({
        "seed": args.seed,
        "n": d.n(),
        "crossed": args.crossed,
        "format": args.format,
        "codes_file": codes_file,
        "factors_file": factors_file,
        "num_factors": d.num_factors(),
        "num_features": d.num_features(),
        "factor_cardinalities": d.factor_cardinalities(),
        "config_sha256": config_sha256,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest json");
    fs::write(args.out.join("manifest.json"), text + "\n")
        .map_err(|e| CliError::io(e.to_string()))?;
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
