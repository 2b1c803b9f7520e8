//! The `driftlab` command-line front end.
//!
//! Every subcommand accepts `--config FILE` (TOML, or JSON when the file ends
//! in `.json` or is not valid TOML); flags override file values. The master
//! seed comes from `--seed`, then the file's `seed` key, then `DRIFTLAB_SEED`,
//! then 0. Exit codes: 0 success, 1 data error or failed verification, 2
//! usage or configuration error.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::baselines::{kswin_detect, mmdddm_detect, BaselineConfig};
use crate::detector::{sddm_stream, DriftEvent, DriftReport, SddmConfig};
use crate::error::{DriftError, Result};
use crate::eval::{run_benchmark, BenchmarkConfig, Method};
use crate::kernels::{compute_kernel_matrix, KernelConfig};
use crate::linalg::Matrix;
use crate::magnitude::{check_weighted_identity, gaussian_shift_stream, verify_shape};
use crate::seed::{derive_seed, rng_from};
use crate::spectral::{spectral_embedding, BlockAutoCorrelation, LaplacianKind};
use crate::streams::{
    compose_stream, ingest_csv, normalize_stream, read_jsonl, write_jsonl, write_truth, ConceptFamily, CsvOptions,
    Pattern, StreamSample, StreamSpec, MAX_DELTA,
};

pub const SEED_ENV: &str = "DRIFTLAB_SEED";

#[derive(Debug, Parser)]
#[command(name = "driftlab", version, about = "Spectral concept-drift detection toolkit")]
pub struct Cli {
    /// Master seed for every stochastic component.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Log more (repeat for trace output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic drift stream (JSON lines) and its ground truth.
    Generate(GenerateArgs),
    /// Run a detector over a stream file and print the report as JSON.
    Detect(DetectArgs),
    /// Run the multi-run benchmark and write CSV, JSON and Markdown tables.
    Benchmark(BenchmarkArgs),
    /// Compare empirical two-window drift magnitudes with the predicted shape.
    VerifyShape(VerifyShapeArgs),
    /// Check block-kernel eigen-coincidence and the weighted quadratic-form identity.
    VerifySpectral(VerifySpectralArgs),
    /// Write Laplacian eigenvectors (and optionally the kernel matrix) of a stream window as CSV.
    ExportEigen(ExportEigenArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// AB, ABA or ABC.
    #[arg(long)]
    pub pattern: Option<String>,
    /// Length of concept B (25, 50, 75 or 100).
    #[arg(long = "b")]
    pub b_length: Option<usize>,
    /// stagger, random-rbf or hyperplane.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Warm-up extension; drawn from the seed when omitted.
    #[arg(long)]
    pub delta: Option<usize>,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Ground-truth sidecar; defaults to `<out>.truth.json`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Stream file: JSON lines, or CSV with a header when the name ends in `.csv`.
    pub input: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// sddm-mt, sddm-rbf, mmdddm or kswin.
    #[arg(long)]
    pub method: Option<String>,
    /// CSV column holding the class label.
    #[arg(long)]
    pub label_column: Option<String>,
    /// Skip per-feature standardization.
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// File stem for `<prefix>.csv`, `<prefix>.json` and `<prefix>.md`.
    #[arg(long, default_value = "benchmark")]
    pub prefix: String,
}

#[derive(Debug, Args)]
pub struct VerifyShapeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub n_per_concept: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub peak_tolerance: Option<usize>,
    /// Write the per-run profiles as JSON.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifySpectralArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub cases: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub identity_tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExportEigenArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// mt or rbf.
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub n_eigen: Option<usize>,
    /// First sample of the window.
    #[arg(long)]
    pub start: Option<usize>,
    /// Window length; defaults to the rest of the stream.
    #[arg(long)]
    pub len: Option<usize>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub no_normalize: bool,
    /// Eigenvector CSV; stdout when omitted.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Also write the kernel matrix as CSV.
    #[arg(long)]
    pub kernel_matrix: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GenerateFile {
    pattern: Option<Pattern>,
    b_length: Option<usize>,
    dataset: Option<ConceptFamily>,
    delta: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DetectFile {
    method: Option<Method>,
    normalize: Option<bool>,
    sddm: Option<SddmConfig>,
    baseline: Option<BaselineConfig>,
    seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeCheckConfig {
    pub l: usize,
    pub runs: usize,
    pub n_per_concept: usize,
    pub dim: usize,
    /// Offset of the second Gaussian's mean in every coordinate.
    pub shift: f64,
    pub kernel: KernelConfig,
    pub tolerance: f64,
    pub peak_tolerance: usize,
    /// Fraction of runs whose peak must land within `peak_tolerance`.
    pub peak_fraction: f64,
    pub seed: u64,
}

impl Default for ShapeCheckConfig {
    fn default() -> Self {
        ShapeCheckConfig {
            l: 200,
            runs: 20,
            n_per_concept: 2000,
            dim: 2,
            shift: 3.0,
            kernel: KernelConfig::rbf_median(),
            tolerance: 0.15,
            peak_tolerance: 2,
            peak_fraction: 0.9,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralCheckConfig {
    pub cases: usize,
    pub max_blocks: usize,
    pub min_block: usize,
    pub max_block: usize,
    pub tolerance: f64,
    pub identity_cases: usize,
    pub identity_max_n: usize,
    /// Relative to `‖K‖_F ‖w‖²`.
    pub identity_tolerance: f64,
    pub seed: u64,
}

impl Default for SpectralCheckConfig {
    fn default() -> Self {
        SpectralCheckConfig {
            cases: 100,
            max_blocks: 4,
            min_block: 3,
            max_block: 50,
            tolerance: 1e-8,
            identity_cases: 100,
            identity_max_n: 200,
            identity_tolerance: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExportFile {
    kernel: Option<KernelConfig>,
    laplacian: Option<LaplacianKind>,
    n_eigen: Option<usize>,
    seed: Option<u64>,
}

/// Exit code for an error: 2 for usage and configuration problems, 1 otherwise.
pub fn exit_code(err: &DriftError) -> i32 {
    match err {
        DriftError::Config(_) | DriftError::InvalidArgument(_) => 2,
        _ => 1,
    }
}

/// Parses a config file into `T`, returning the top-level `seed` key too.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<(T, Option<u64>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DriftError::config(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let value: serde_json::Value = if is_json {
        serde_json::from_str(&text).map_err(|e| DriftError::config(format!("{}: {e}", path.display())))?
    } else {
        match toml::from_str(&text) {
            Ok(v) => v,
            Err(toml_err) => serde_json::from_str(&text)
                .map_err(|_| DriftError::config(format!("{}: {toml_err}", path.display())))?,
        }
    };
    let seed = value.get("seed").and_then(serde_json::Value::as_u64);
    let parsed = serde_json::from_value(value).map_err(|e| DriftError::config(format!("{}: {e}", path.display())))?;
    Ok((parsed, seed))
}

fn load_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<(T, Option<u64>)> {
    match path {
        Some(p) => load_config(p),
        None => Ok((T::default(), None)),
    }
}

/// `--seed`, else the config file, else `DRIFTLAB_SEED`, else 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| DriftError::config(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

pub fn parse_dataset(name: &str) -> Result<ConceptFamily> {
    match name.to_ascii_lowercase().replace('-', "_").as_str() {
        "stagger" => Ok(ConceptFamily::Stagger),
        "random_rbf" | "rbf" => Ok(ConceptFamily::random_rbf()),
        "hyperplane" => Ok(ConceptFamily::hyperplane()),
        other => Err(DriftError::config(format!(
            "unknown dataset `{other}` (expected stagger, random-rbf or hyperplane)"
        ))),
    }
}

fn parse_kernel(name: &str) -> Result<KernelConfig> {
    match name {
        "mt" => Ok(KernelConfig::default()),
        "rbf" => Ok(KernelConfig::rbf_median()),
        other => Err(DriftError::config(format!("unknown kernel `{other}` (expected mt or rbf)"))),
    }
}

fn write_output(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, contents)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn read_stream(path: &Path, label_column: Option<&str>) -> Result<Vec<StreamSample>> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let opts = CsvOptions {
            label_column: label_column.map(str::to_string),
            resample: None,
        };
        Ok(ingest_csv(path, &opts)?.samples)
    } else {
        read_jsonl(BufReader::new(File::open(path)?))
    }
}

fn generate(args: &GenerateArgs, seed_flag: Option<u64>) -> Result<()> {
    let (file, file_seed): (GenerateFile, _) = load_or_default(args.config.as_deref())?;
    let seed = resolve_seed(seed_flag, file.seed.or(file_seed))?;
    let pattern = match &args.pattern {
        Some(p) => p.parse()?,
        None => file
            .pattern
            .ok_or_else(|| DriftError::config("missing --pattern (AB, ABA or ABC)"))?,
    };
    let dataset = match &args.dataset {
        Some(d) => parse_dataset(d)?,
        None => file.dataset.unwrap_or(ConceptFamily::Stagger),
    };
    let delta = match args.delta.or(file.delta) {
        Some(d) => d,
        None => rng_from(derive_seed(seed, 0xde17a)).random_range(0..=MAX_DELTA),
    };
    let spec = StreamSpec {
        pattern,
        b_length: args.b_length.or(file.b_length).unwrap_or(50),
        delta,
        concepts: dataset.draw_concepts(pattern.concept_count(), seed)?,
        seed,
    };
    let (samples, truth) = compose_stream(&spec)?;
    write_jsonl(BufWriter::new(File::create(&args.out)?), &samples)?;
    let truth_path = args.truth.clone().unwrap_or_else(|| {
        let mut name = args.out.clone().into_os_string();
        name.push(".truth.json");
        PathBuf::from(name)
    });
    write_truth(BufWriter::new(File::create(&truth_path)?), &truth)?;
    info!(
        "wrote {} samples to {} (change points {:?})",
        samples.len(),
        args.out.display(),
        truth.change_points
    );
    Ok(())
}

#[derive(Serialize)]
struct DetectOutput<'a> {
    method: &'a str,
    #[serde(flatten)]
    report: &'a DriftReport,
}

fn detect(args: &DetectArgs, seed_flag: Option<u64>) -> Result<()> {
    let (file, file_seed): (DetectFile, _) = load_or_default(args.config.as_deref())?;
    let seed = resolve_seed(seed_flag, file.seed.or(file_seed))?;
    let method = match &args.method {
        Some(m) => m.parse()?,
        None => file.method.unwrap_or(Method::SddmMt),
    };
    let mut samples = read_stream(&args.input, args.label_column.as_deref())?;
    if !args.no_normalize && file.normalize.unwrap_or(true) && !samples.is_empty() {
        samples = normalize_stream(&samples)?;
    }
    let sddm = file.sddm.unwrap_or_default();
    let baseline = BaselineConfig {
        seed,
        ..file.baseline.unwrap_or_default()
    };
    let as_events = |times: Vec<usize>| DriftReport {
        events: times
            .into_iter()
            .map(|time| DriftEvent {
                time,
                batch_id: 0,
                support: 1,
            })
            .collect(),
        ..DriftReport::default()
    };
    let report = match method {
        Method::SddmMt | Method::SddmRbf => {
            let kernel = match (method, &sddm.kernel) {
                (Method::SddmMt, k @ KernelConfig::MomentForest(_)) => k.clone(),
                (Method::SddmMt, _) => KernelConfig::default(),
                (_, k @ KernelConfig::Rbf { .. }) => k.clone(),
                _ => KernelConfig::rbf_median(),
            };
            sddm_stream(samples, &SddmConfig { kernel, seed, ..sddm })?
        }
        Method::Mmdddm => as_events(mmdddm_detect(&samples, &baseline)?),
        Method::KsWin => as_events(kswin_detect(&samples, &baseline)?),
        Method::Oracle => return Err(DriftError::config("the oracle method needs ground truth; use it in benchmarks")),
    };
    let json = serde_json::to_string_pretty(&DetectOutput {
        method: method.name(),
        report: &report,
    })
    .map_err(std::io::Error::from)?;
    write_output(args.out.as_deref(), &(json + "\n"))
}

fn benchmark(args: &BenchmarkArgs, seed_flag: Option<u64>) -> Result<()> {
    let (mut cfg, file_seed): (BenchmarkConfig, _) = load_or_default(args.config.as_deref())?;
    cfg.seed = resolve_seed(seed_flag, file_seed)?;
    if let Some(r) = args.runs {
        cfg.n_runs = r;
    }
    if let Some(j) = args.jobs {
        cfg.jobs = j;
    }
    if let Some(ms) = &args.methods {
        cfg.methods = ms.iter().map(|m| m.trim().parse()).collect::<Result<_>>()?;
    }
    let table = run_benchmark(&cfg)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let stem = args.out_dir.join(&args.prefix);
    std::fs::write(stem.with_extension("csv"), table.to_csv()?)?;
    std::fs::write(stem.with_extension("json"), table.to_json()?)?;
    let md = table.to_markdown();
    std::fs::write(stem.with_extension("md"), &md)?;
    print!("{md}");
    info!("tables written to {}.{{csv,json,md}}", stem.display());
    Ok(())
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

#[derive(Serialize)]
struct ShapeRun {
    seed: u64,
    relative_deviation: f64,
    noise_floor: f64,
    peak: usize,
    expected_peak: usize,
    positions: Vec<usize>,
    empirical: Vec<f64>,
    predicted: Vec<f64>,
}

/// Runs the shape check; prints one line per criterion and returns whether all passed.
pub fn run_shape_check(cfg: &ShapeCheckConfig, out: Option<&Path>) -> Result<bool> {
    if cfg.runs == 0 || cfg.n_per_concept <= 2 * cfg.l || cfg.dim == 0 {
        return Err(DriftError::config("need runs >= 1, dim >= 1 and n_per_concept > 2l"));
    }
    let mut runs = Vec::with_capacity(cfg.runs);
    for r in 0..cfg.runs as u64 {
        let seed = derive_seed(cfg.seed, r);
        let stream = gaussian_shift_stream(cfg.n_per_concept, cfg.dim, cfg.shift, seed);
        let rep = verify_shape(&stream, &[cfg.n_per_concept], &cfg.kernel, cfg.l, seed)?;
        runs.push(ShapeRun {
            seed,
            relative_deviation: rep.relative_deviation,
            noise_floor: rep.noise_floor,
            peak: rep.empirical_peaks[0],
            expected_peak: rep.predicted_peaks[0],
            positions: rep.positions,
            empirical: rep.empirical,
            predicted: rep.predicted,
        });
    }
    let worst = runs.iter().map(|r| r.relative_deviation).fold(0.0, f64::max);
    let hits = runs
        .iter()
        .filter(|r| r.peak.abs_diff(r.expected_peak) <= cfg.peak_tolerance)
        .count();
    let needed = (cfg.peak_fraction * cfg.runs as f64).ceil() as usize;
    let dev_ok = worst <= cfg.tolerance;
    let peak_ok = hits >= needed;
    println!(
        "relative sup deviation: worst {worst:.4} over {} runs (tolerance {}) {}",
        cfg.runs,
        cfg.tolerance,
        verdict(dev_ok)
    );
    println!(
        "peak location: {hits}/{} runs within {} of t0 + l (need {needed}) {}",
        cfg.runs,
        cfg.peak_tolerance,
        verdict(peak_ok)
    );
    if let Some(p) = out {
        let json = serde_json::to_string(&runs).map_err(std::io::Error::from)?;
        std::fs::write(p, json)?;
    }
    Ok(dev_ok && peak_ok)
}

fn random_block_case(rng: &mut impl Rng, cfg: &SpectralCheckConfig) -> Result<BlockAutoCorrelation> {
    let m = rng.random_range(1..=cfg.max_blocks);
    let a = Matrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    let mut reduced = a.matmul(&a.transpose())?;
    for i in 0..m {
        reduced[(i, i)] += 0.1;
    }
    let sizes = (0..m).map(|_| rng.random_range(cfg.min_block..=cfg.max_block)).collect();
    BlockAutoCorrelation::from_reduced(reduced, sizes)
}

/// Runs the block-spectrum and weighted-identity checks; prints one line per criterion.
pub fn run_spectral_check(cfg: &SpectralCheckConfig) -> Result<bool> {
    if cfg.max_blocks == 0 || cfg.min_block == 0 || cfg.min_block > cfg.max_block || cfg.identity_max_n == 0 {
        return Err(DriftError::config("block counts and sizes must be positive and ordered"));
    }
    let mut rng = rng_from(derive_seed(cfg.seed, 0xb10c));
    let (mut gap, mut dev) = (0.0f64, 0.0f64);
    for _ in 0..cfg.cases {
        let check = random_block_case(&mut rng, cfg)?.check_spectrum()?;
        gap = gap.max(check.eigenvalue_gap);
        dev = dev.max(check.block_deviation);
    }
    let mut worst = 0.0f64;
    for _ in 0..cfg.identity_cases {
        let n = rng.random_range(1..=cfg.identity_max_n);
        let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let k = a.matmul(&a.transpose())?;
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let scale = k.frobenius_norm() * crate::linalg::dot(&w, &w);
        let r = check_weighted_identity(&k, &w)?;
        if scale > 0.0 {
            worst = worst.max(r.gap / scale);
        }
    }
    let (gap_ok, dev_ok, id_ok) = (gap <= cfg.tolerance, dev <= cfg.tolerance, worst <= cfg.identity_tolerance);
    println!(
        "block eigenvalue coincidence: max gap {gap:.3e} over {} matrices (tolerance {:e}) {}",
        cfg.cases,
        cfg.tolerance,
        verdict(gap_ok)
    );
    println!(
        "blockwise-constant eigenvectors: max deviation {dev:.3e} (tolerance {:e}) {}",
        cfg.tolerance,
        verdict(dev_ok)
    );
    println!(
        "weighted quadratic-form identity: max relative gap {worst:.3e} over {} matrices (tolerance {:e}) {}",
        cfg.identity_cases,
        cfg.identity_tolerance,
        verdict(id_ok)
    );
    Ok(gap_ok && dev_ok && id_ok)
}

fn export_eigen(args: &ExportEigenArgs, seed_flag: Option<u64>) -> Result<()> {
    let (file, file_seed): (ExportFile, _) = load_or_default(args.config.as_deref())?;
    let seed = resolve_seed(seed_flag, file.seed.or(file_seed))?;
    let kernel = match &args.kernel {
        Some(k) => parse_kernel(k)?,
        None => file.kernel.unwrap_or_default(),
    }
    .with_seed(seed);
    let mut samples = read_stream(&args.input, args.label_column.as_deref())?;
    let start = args.start.unwrap_or(0);
    let end = args.len.map_or(samples.len(), |l| start.saturating_add(l));
    if start >= end || end > samples.len() {
        return Err(DriftError::arg(format!(
            "window [{start}, {end}) does not fit a stream of {} samples",
            samples.len()
        )));
    }
    if !args.no_normalize {
        samples = normalize_stream(&samples)?;
    }
    let window = &samples[start..end];
    let k = compute_kernel_matrix(window, &kernel)?;
    let basis = spectral_embedding(
        &k,
        file.laplacian.unwrap_or_default(),
        args.n_eigen.or(file.n_eigen).unwrap_or(5),
    )?;
    write_output(args.out.as_deref(), &basis.to_csv())?;
    if let Some(p) = &args.kernel_matrix {
        let mut w = BufWriter::new(File::create(p)?);
        let times = k.window_times();
        let header: Vec<String> = times.iter().map(|t| t.to_string()).collect();
        writeln!(w, "t,{}", header.join(","))?;
        for (i, t) in times.iter().enumerate() {
            let row: Vec<String> = k.values().row(i).iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{t},{}", row.join(","))?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Executes a parsed command; `Ok(false)` means a verification failed.
pub fn execute(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Generate(a) => generate(a, cli.seed).map(|_| true),
        Command::Detect(a) => detect(a, cli.seed).map(|_| true),
        Command::Benchmark(a) => benchmark(a, cli.seed).map(|_| true),
        Command::VerifyShape(a) => {
            let (mut cfg, file_seed): (ShapeCheckConfig, _) = load_or_default(a.config.as_deref())?;
            cfg.seed = resolve_seed(cli.seed, file_seed)?;
            cfg.l = a.l.unwrap_or(cfg.l);
            cfg.runs = a.runs.unwrap_or(cfg.runs);
            cfg.n_per_concept = a.n_per_concept.unwrap_or(cfg.n_per_concept);
            cfg.tolerance = a.tolerance.unwrap_or(cfg.tolerance);
            cfg.peak_tolerance = a.peak_tolerance.unwrap_or(cfg.peak_tolerance);
            run_shape_check(&cfg, a.out.as_deref())
        }
        Command::VerifySpectral(a) => {
            let (mut cfg, file_seed): (SpectralCheckConfig, _) = load_or_default(a.config.as_deref())?;
            cfg.seed = resolve_seed(cli.seed, file_seed)?;
            cfg.cases = a.cases.unwrap_or(cfg.cases);
            cfg.tolerance = a.tolerance.unwrap_or(cfg.tolerance);
            cfg.identity_tolerance = a.identity_tolerance.unwrap_or(cfg.identity_tolerance);
            run_spectral_check(&cfg)
        }
        Command::ExportEigen(a) => export_eigen(a, cli.seed).map(|_| true),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match execute(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&DriftError::config("x")), 2);
        assert_eq!(exit_code(&DriftError::arg("x")), 2);
        assert_eq!(exit_code(&DriftError::Parse { line: 3, message: "x".into() }), 1);
        assert_eq!(exit_code(&DriftError::precondition("x")), 1);
    }

    #[test]
    fn config_files_parse_as_toml_or_json() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("c.toml");
        std::fs::write(&toml_path, "seed = 9\nn_runs = 4\nmethods = [\"oracle\"]\n").unwrap();
        let (cfg, seed): (BenchmarkConfig, _) = load_config(&toml_path).unwrap();
        assert_eq!((cfg.n_runs, seed), (4, Some(9)));
        assert_eq!(cfg.methods, vec![Method::Oracle]);

        let json_path = dir.path().join("c.conf");
        std::fs::write(&json_path, r#"{"n_runs": 2, "beta": 1}"#).unwrap();
        let (cfg, seed): (BenchmarkConfig, _) = load_config(&json_path).unwrap();
        assert_eq!((cfg.n_runs, cfg.beta, seed), (2, 1.0, None));

        std::fs::write(&toml_path, "n_runz = 4\n").unwrap();
        let err = load_config::<BenchmarkConfig>(&toml_path).unwrap_err();
        assert!(matches!(err, DriftError::Config(_)) && err.to_string().contains("n_runz"));
    }

    #[test]
    fn flag_seed_beats_file_seed() {
        assert_eq!(resolve_seed(Some(3), Some(4)).unwrap(), 3);
        assert_eq!(resolve_seed(None, Some(4)).unwrap(), 4);
    }

    #[test]
    fn datasets_by_name() {
        assert_eq!(parse_dataset("random-rbf").unwrap(), ConceptFamily::random_rbf());
        assert_eq!(parse_dataset("STAGGER").unwrap(), ConceptFamily::Stagger);
        assert!(parse_dataset("sea").is_err());
    }
}
