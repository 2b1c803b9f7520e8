//! Scoring and the benchmark harness.
//!
//! Detections are matched one-to-one to true change points, closest pairs
//! first. A match within `max_delay` is a true positive; every other
//! detection is a false positive. The β-score is `tp / (p + β fp)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use log::{info, warn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{kswin_detect, mmdddm_detect, BaselineConfig};
use crate::detector::{sddm_stream, SddmConfig};
use crate::error::{DriftError, Result};
use crate::kernels::KernelConfig;
use crate::seed::{derive_seed, rng_from};
use crate::streams::{
    compose_stream, ingest_csv, normalize_stream, split_into_windows, ConceptFamily, CsvOptions, Pattern,
    StreamSample, StreamSpec, MAX_DELTA,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaScore {
    pub score: f64,
    pub tp: usize,
    pub fp: usize,
    pub p: usize,
    /// `detection - truth` of every true positive, in truth order.
    pub delays: Vec<i64>,
}

/// Greedy one-to-one matching, closest pairs first (ties: earlier truth,
/// then earlier detection). Returns `(truth index, detection index)` pairs.
fn match_closest(detected: &[usize], truth: &[usize]) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize, usize)> = truth
        .iter()
        .enumerate()
        .flat_map(|(i, &t)| detected.iter().enumerate().map(move |(j, &d)| (t.abs_diff(d), i, j)))
        .collect();
    pairs.sort_unstable();
    let mut used_t = vec![false; truth.len()];
    let mut used_d = vec![false; detected.len()];
    let mut out = Vec::new();
    for (_, i, j) in pairs {
        if !used_t[i] && !used_d[j] {
            used_t[i] = true;
            used_d[j] = true;
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out
}

pub fn beta_score(detected: &[usize], truth: &[usize], max_delay: usize, beta: f64) -> Result<BetaScore> {
    if max_delay == 0 {
        return Err(DriftError::arg("max_delay must be positive"));
    }
    if !(beta > 0.0) {
        return Err(DriftError::arg("beta must be positive"));
    }
    let mut delays = Vec::new();
    for (i, j) in match_closest(detected, truth) {
        if truth[i].abs_diff(detected[j]) <= max_delay {
            delays.push(detected[j] as i64 - truth[i] as i64);
        }
    }
    let tp = delays.len();
    let fp = detected.len() - tp;
    let p = truth.len();
    let score = if p == 0 && detected.is_empty() {
        1.0
    } else {
        tp as f64 / (p as f64 + beta * fp as f64)
    };
    Ok(BetaScore {
        score,
        tp,
        fp,
        p,
        delays,
    })
}

/// Distance from every true change point to its closest detection.
pub fn closest_distances(detected: &[usize], truth: &[usize]) -> Vec<Option<usize>> {
    truth
        .iter()
        .map(|&t| detected.iter().map(|&d| d.abs_diff(t)).min())
        .collect()
}

/// Translates detections by `shift`; detections that would become negative are dropped.
pub fn apply_alignment_shift(detected: &[usize], shift: i64) -> Vec<usize> {
    detected
        .iter()
        .filter_map(|&d| usize::try_from(d as i64 + shift).ok())
        .collect()
}

/// The shift in `-max_shift..=max_shift` with the best mean β-score over the
/// given `(detections, truth)` runs; ties prefer the smallest magnitude, then
/// the negative shift.
pub fn fit_alignment_shift(
    runs: &[(Vec<usize>, Vec<usize>)],
    max_delay: usize,
    beta: f64,
    max_shift: usize,
) -> Result<i64> {
    let mut best = (f64::NEG_INFINITY, 0i64);
    let m = max_shift as i64;
    let candidates = std::iter::once(0).chain((1..=m).flat_map(|s| [-s, s]));
    for shift in candidates {
        let mut total = 0.0;
        for (det, truth) in runs {
            total += beta_score(&apply_alignment_shift(det, shift), truth, max_delay, beta)?.score;
        }
        if total > best.0 {
            best = (total, shift);
        }
    }
    Ok(best.1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SddmMt,
    SddmRbf,
    Mmdddm,
    #[serde(rename = "kswin")]
    KsWin,
    /// Reports the true change points shifted by a fixed lag; checks the harness.
    Oracle,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::SddmMt,
        Method::SddmRbf,
        Method::Mmdddm,
        Method::KsWin,
        Method::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::SddmMt => "sddm-mt",
            Method::SddmRbf => "sddm-rbf",
            Method::Mmdddm => "mmdddm",
            Method::KsWin => "kswin",
            Method::Oracle => "oracle",
        }
    }

    /// Table label.
    pub fn label(self) -> &'static str {
        match self {
            Method::SddmMt => "SDDM (MT)",
            Method::SddmRbf => "SDDM (RBF)",
            Method::Mmdddm => "MMDDDM",
            Method::KsWin => "KS-Win",
            Method::Oracle => "Oracle",
        }
    }

    /// Two-window baselines alert after the change; their detections are re-aligned.
    pub fn needs_alignment(self) -> bool {
        matches!(self, Method::Mmdddm | Method::KsWin)
    }
}

impl FromStr for Method {
    type Err = DriftError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                DriftError::config(format!("unknown method `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

/// A real dataset split into contiguous time windows that serve as concepts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvDataset {
    pub name: String,
    pub path: PathBuf,
    #[serde(default)]
    pub label_column: Option<String>,
    pub windows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub datasets: Vec<ConceptFamily>,
    pub csv_datasets: Vec<CsvDataset>,
    pub methods: Vec<Method>,
    pub patterns: Vec<Pattern>,
    /// B lengths for ABA/ABC; AB always splits the drift segment in half.
    pub b_lengths: Vec<usize>,
    pub n_runs: usize,
    pub seed: u64,
    pub beta: f64,
    pub ab_max_delay: usize,
    /// Held-out runs used to fit the baselines' alignment shift (0 disables it).
    pub alignment_runs: usize,
    pub oracle_lag: usize,
    pub sddm: SddmConfig,
    pub baseline: BaselineConfig,
    pub jobs: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            datasets: vec![ConceptFamily::Stagger, ConceptFamily::random_rbf(), ConceptFamily::hyperplane()],
            csv_datasets: Vec::new(),
            methods: vec![Method::SddmMt, Method::SddmRbf, Method::Mmdddm, Method::KsWin],
            patterns: Pattern::ALL.to_vec(),
            b_lengths: vec![25, 50],
            n_runs: 150,
            seed: 0,
            beta: 0.5,
            ab_max_delay: 25,
            alignment_runs: 50,
            oracle_lag: 0,
            sddm: SddmConfig::default(),
            baseline: BaselineConfig {
                stride: 10,
                n_permutations: 100,
                ..BaselineConfig::default()
            },
            jobs: 1,
        }
    }
}

/// One column of the results table: a pattern and, for ABA/ABC, a B length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Setting {
    pub pattern: Pattern,
    pub b_length: Option<usize>,
}

impl Setting {
    pub fn max_delay(&self, ab_max_delay: usize) -> usize {
        match self.b_length {
            None => ab_max_delay,
            Some(b) => b / 2,
        }
    }

    fn code(&self) -> u64 {
        let p = Pattern::ALL.iter().position(|&q| q == self.pattern).unwrap_or(0) as u64;
        p * 1000 + self.b_length.unwrap_or(0) as u64
    }

    pub fn header(&self, ab_max_delay: usize) -> String {
        match self.b_length {
            None => format!("{} --/{}", self.pattern, ab_max_delay),
            Some(b) => format!("{} {}/{}", self.pattern, b, b / 2),
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(DriftError::config("n_runs must be positive"));
        }
        if self.methods.is_empty() || self.patterns.is_empty() {
            return Err(DriftError::config("at least one method and pattern are required"));
        }
        if self.datasets.is_empty() && self.csv_datasets.is_empty() {
            return Err(DriftError::config("at least one dataset is required"));
        }
        if !(self.beta > 0.0) || self.ab_max_delay == 0 {
            return Err(DriftError::config("beta and ab_max_delay must be positive"));
        }
        if self.jobs == 0 {
            return Err(DriftError::config("jobs must be at least 1"));
        }
        for &b in &self.b_lengths {
            if !crate::streams::B_LENGTHS.contains(&b) || b < 2 {
                return Err(DriftError::config(format!("unsupported b_length {b}")));
            }
        }
        self.sddm.validate()?;
        self.baseline.validate()
    }

    pub fn settings(&self) -> Vec<Setting> {
        let mut out = Vec::new();
        for &pattern in &self.patterns {
            if pattern == Pattern::AB {
                out.push(Setting {
                    pattern,
                    b_length: None,
                });
            } else {
                out.extend(self.b_lengths.iter().map(|&b| Setting {
                    pattern,
                    b_length: Some(b),
                }));
            }
        }
        out
    }

    fn resolve_datasets(&self) -> Result<Vec<(String, ConceptFamily)>> {
        let mut out: Vec<(String, ConceptFamily)> =
            self.datasets.iter().map(|f| (f.name().to_string(), f.clone())).collect();
        for ds in &self.csv_datasets {
            let stream = ingest_csv(
                &ds.path,
                &CsvOptions {
                    label_column: ds.label_column.clone(),
                    resample: None,
                },
            )?;
            let pools = split_into_windows(&stream.samples, ds.windows)?;
            out.push((ds.name.clone(), ConceptFamily::Pools { pools }));
        }
        Ok(out)
    }
}

/// Builds and normalizes the stream of one benchmark run.
pub fn benchmark_stream(
    family: &ConceptFamily,
    setting: Setting,
    seed: u64,
) -> Result<(Vec<StreamSample>, Vec<usize>)> {
    let mut rng = rng_from(derive_seed(seed, 0xde17a));
    let delta = rng.random_range(0..=MAX_DELTA);
    let spec = StreamSpec {
        pattern: setting.pattern,
        b_length: setting.b_length.unwrap_or(50),
        delta,
        concepts: family.draw_concepts(setting.pattern.concept_count(), seed)?,
        seed,
    };
    let (samples, truth) = compose_stream(&spec)?;
    Ok((normalize_stream(&samples)?, truth.change_points))
}

/// Runs one method on a normalized stream and returns its detections.
pub fn run_method(
    method: Method,
    samples: &[StreamSample],
    truth: &[usize],
    config: &BenchmarkConfig,
    seed: u64,
) -> Result<Vec<usize>> {
    match method {
        Method::SddmMt | Method::SddmRbf => {
            let kernel = if method == Method::SddmMt {
                match &config.sddm.kernel {
                    k @ KernelConfig::MomentForest(_) => k.clone(),
                    _ => KernelConfig::default(),
                }
            } else {
                match &config.sddm.kernel {
                    k @ KernelConfig::Rbf { .. } => k.clone(),
                    _ => KernelConfig::rbf_median(),
                }
            };
            let cfg = SddmConfig {
                kernel,
                seed,
                ..config.sddm.clone()
            };
            Ok(sddm_stream(samples.iter().cloned(), &cfg)?.event_times())
        }
        Method::Mmdddm => mmdddm_detect(
            samples,
            &BaselineConfig {
                seed,
                ..config.baseline.clone()
            },
        ),
        Method::KsWin => kswin_detect(samples, &config.baseline),
        Method::Oracle => Ok(truth.iter().map(|t| t + config.oracle_lag).collect()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run: usize,
    pub detections: Vec<usize>,
    pub truth: Vec<usize>,
    pub score: BetaScore,
    pub failed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub method: Method,
    pub setting: Setting,
    pub max_delay: usize,
    pub shift: i64,
    pub runs: Vec<RunOutcome>,
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

impl CellResult {
    pub fn scores(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.score.score).collect()
    }

    pub fn mean(&self) -> f64 {
        let s = self.scores();
        s.iter().sum::<f64>() / s.len() as f64
    }

    /// Sample standard deviation (0 for a single run).
    pub fn std(&self) -> f64 {
        let s = self.scores();
        if s.len() < 2 {
            return 0.0;
        }
        let m = self.mean();
        (s.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (s.len() - 1) as f64).sqrt()
    }

    pub fn median_alarms(&self) -> f64 {
        let mut v: Vec<f64> = self.runs.iter().map(|r| r.detections.len() as f64).collect();
        median(&mut v).unwrap_or(0.0)
    }

    /// Median over all true change points of the distance to the closest
    /// (aligned) detection; `None` when no run detected anything.
    pub fn median_distance(&self) -> Option<f64> {
        let mut v: Vec<f64> = self
            .runs
            .iter()
            .flat_map(|r| closest_distances(&r.detections, &r.truth))
            .flatten()
            .map(|d| d as f64)
            .collect();
        median(&mut v)
    }

    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.failed).count()
    }
}

/// Benchmark results; one cell per (dataset, method, setting).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub ab_max_delay: usize,
    pub settings: Vec<Setting>,
    pub cells: Vec<CellResult>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    dataset: &'a str,
    method: &'a str,
    pattern: String,
    b_length: String,
    max_delay: usize,
    n_runs: usize,
    mean: String,
    std: String,
    median_alarms: String,
    median_distance: String,
    shift: i64,
    failures: usize,
}

impl BenchmarkTable {
    pub fn cell(&self, dataset: &str, method: Method, setting: Setting) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.method == method && c.setting == setting)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.cells {
            w.serialize(CsvRow {
                dataset: &c.dataset,
                method: c.method.name(),
                pattern: c.setting.pattern.to_string(),
                b_length: c.setting.b_length.map(|b| b.to_string()).unwrap_or_default(),
                max_delay: c.max_delay,
                n_runs: c.runs.len(),
                mean: format!("{:.6}", c.mean()),
                std: format!("{:.6}", c.std()),
                median_alarms: format!("{:.1}", c.median_alarms()),
                median_distance: c.median_distance().map(|d| format!("{d:.1}")).unwrap_or_default(),
                shift: c.shift,
                failures: c.failures(),
            })
            .map_err(|e| DriftError::Io(std::io::Error::other(e)))?;
        }
        let bytes = w.into_inner().map_err(|e| DriftError::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| DriftError::Io(std::io::Error::other(e)))
    }

    /// Mean ± std per dataset and method, one column per setting.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Dataset | Method |");
        for s in &self.settings {
            let _ = write!(out, " {} |", s.header(self.ab_max_delay));
        }
        out.push_str("\n|---|---|");
        out.push_str(&"---:|".repeat(self.settings.len()));
        out.push('\n');
        let mut rows: BTreeMap<(usize, Method), &str> = BTreeMap::new();
        for (i, c) in self.cells.iter().enumerate() {
            let first = self.cells.iter().position(|d| d.dataset == c.dataset).unwrap_or(i);
            rows.entry((first, c.method)).or_insert(&c.dataset);
        }
        for ((_, method), dataset) in rows {
            let _ = write!(out, "| {dataset} | {} |", method.label());
            for &s in &self.settings {
                match self.cell(dataset, method, s) {
                    Some(c) => {
                        let _ = write!(out, " {:.2} ± {:.2} |", c.mean(), c.std());
                    }
                    None => out.push_str(" |"),
                }
            }
            out.push('\n');
        }
        out
    }
}

const HELD_OUT_TAG: u64 = 1 << 40;

fn stream_seed(master: u64, dataset: usize, setting: Setting, run: u64) -> u64 {
    derive_seed(derive_seed(derive_seed(master, dataset as u64), setting.code()), run)
}

fn method_seed(run_seed: u64, method: Method) -> u64 {
    derive_seed(run_seed, 0x5eed_0000 + method as u64)
}

/// Runs every method on `n_runs` shared streams per dataset and setting.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkTable> {
    config.validate()?;
    let datasets = config.resolve_datasets()?;
    let settings = config.settings();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| DriftError::config(e.to_string()))?;

    let mut cells = Vec::new();
    for (d_idx, (name, family)) in datasets.iter().enumerate() {
        for &setting in &settings {
            let max_delay = setting.max_delay(config.ab_max_delay);
            info!("benchmark {name} {} ({} runs)", setting.header(config.ab_max_delay), config.n_runs);

            let per_run = |run: u64, methods: &[Method]| -> Result<(Vec<usize>, Vec<Option<Vec<usize>>>)> {
                let seed = stream_seed(config.seed, d_idx, setting, run);
                let (samples, truth) = benchmark_stream(family, setting, seed)?;
                let dets = methods
                    .iter()
                    .map(|&m| match run_method(m, &samples, &truth, config, method_seed(seed, m)) {
                        Ok(d) => Some(d),
                        Err(e) => {
                            warn!("{name} {} run {run}: {} failed: {e}", setting.header(config.ab_max_delay), m.name());
                            None
                        }
                    })
                    .collect();
                Ok((truth, dets))
            };

            let results: Vec<(Vec<usize>, Vec<Option<Vec<usize>>>)> = pool.install(|| {
                (0..config.n_runs as u64)
                    .into_par_iter()
                    .map(|run| per_run(run, &config.methods))
                    .collect::<Result<Vec<_>>>()
            })?;

            let aligned: Vec<Method> = config
                .methods
                .iter()
                .copied()
                .filter(|m| m.needs_alignment() && config.alignment_runs > 0)
                .collect();
            let held_out: Vec<(Vec<usize>, Vec<Option<Vec<usize>>>)> = if aligned.is_empty() {
                Vec::new()
            } else {
                pool.install(|| {
                    (0..config.alignment_runs as u64)
                        .into_par_iter()
                        .map(|run| per_run(HELD_OUT_TAG + run, &aligned))
                        .collect::<Result<Vec<_>>>()
                })?
            };

            for (m_idx, &method) in config.methods.iter().enumerate() {
                let shift = match aligned.iter().position(|&m| m == method) {
                    Some(a_idx) => {
                        let fit: Vec<(Vec<usize>, Vec<usize>)> = held_out
                            .iter()
                            .filter_map(|(t, d)| d[a_idx].clone().map(|d| (d, t.clone())))
                            .collect();
                        fit_alignment_shift(&fit, max_delay, config.beta, 2 * config.baseline.window)?
                    }
                    None => 0,
                };
                let runs = results
                    .iter()
                    .enumerate()
                    .map(|(run, (truth, dets))| {
                        let (detections, failed) = match &dets[m_idx] {
                            Some(d) => (apply_alignment_shift(d, shift), false),
                            None => (Vec::new(), true),
                        };
                        let mut score = beta_score(&detections, truth, max_delay, config.beta)?;
                        if failed {
                            score.score = 0.0;
                        }
                        Ok(RunOutcome {
                            run,
                            detections,
                            truth: truth.clone(),
                            score,
                            failed,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                cells.push(CellResult {
                    dataset: name.clone(),
                    method,
                    setting,
                    max_delay,
                    shift,
                    runs,
                });
            }
        }
    }
    Ok(BenchmarkTable {
        ab_max_delay: config.ab_max_delay,
        settings,
        cells,
    })
}
