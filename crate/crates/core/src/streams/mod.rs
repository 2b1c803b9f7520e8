//! Streams: samples, benchmark composition with ground truth, normalization
//! and file formats.
//!
//! A composed benchmark stream is 1600 samples long and made of three
//! segments: a warm-up `W` of `500 + delta` samples, a drift segment `D` of
//! 500 samples holding the concept sequence (`AB`, `ABA` or `ABC`), and a
//! cool-down `O` of `600 - delta` samples. `W` continues the first concept of
//! `D` and `O` continues the last one, so only the switches inside `D` are
//! change points.

mod csv_input;
mod generators;
mod jsonl;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::seed::derive_seed;

pub use csv_input::{ingest_csv, split_into_windows, CsvOptions, IngestedStream, WindowResample};
pub use generators::{
    generate_concept, stagger_label, ConceptFamily, ConceptKind, ConceptSource, STAGGER_DIM,
};
pub use jsonl::{read_jsonl, read_truth, write_jsonl, write_truth};

pub const STREAM_LENGTH: usize = 1600;
pub const WARMUP_BASE: usize = 500;
pub const DRIFT_SEGMENT: usize = 500;
pub const COOLDOWN_BASE: usize = 600;
pub const MAX_DELTA: usize = 100;
pub const B_LENGTHS: [usize; 4] = [25, 50, 75, 100];

/// One observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamSample {
    #[serde(rename = "t")]
    pub time: usize,
    #[serde(rename = "x")]
    pub features: Vec<f64>,
}

impl StreamSample {
    pub fn new(time: usize, features: Vec<f64>) -> Self {
        StreamSample { time, features }
    }
}

/// Wraps raw feature vectors as a stream with times `0..n`.
pub fn samples_from_features(features: Vec<Vec<f64>>) -> Vec<StreamSample> {
    features
        .into_iter()
        .enumerate()
        .map(|(t, x)| StreamSample::new(t, x))
        .collect()
}

/// Checks constant dimension and strictly increasing times.
pub fn validate_stream(samples: &[StreamSample]) -> Result<()> {
    let Some(first) = samples.first() else {
        return Ok(());
    };
    let dim = first.features.len();
    for (i, pair) in samples.windows(2).enumerate() {
        if pair[1].features.len() != dim {
            return Err(DriftError::arg(format!(
                "sample {} has dimension {} (expected {dim})",
                i + 1,
                pair[1].features.len()
            )));
        }
        if pair[1].time <= pair[0].time {
            return Err(DriftError::arg(format!(
                "times must increase strictly (sample {} has t={} after t={})",
                i + 1,
                pair[1].time,
                pair[0].time
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pattern {
    AB,
    ABA,
    ABC,
}

impl Pattern {
    pub const ALL: [Pattern; 3] = [Pattern::AB, Pattern::ABA, Pattern::ABC];

    /// Number of distinct concepts the pattern uses.
    pub fn concept_count(self) -> usize {
        match self {
            Pattern::AB | Pattern::ABA => 2,
            Pattern::ABC => 3,
        }
    }

    pub fn change_point_count(self) -> usize {
        match self {
            Pattern::AB => 1,
            Pattern::ABA | Pattern::ABC => 2,
        }
    }

    /// Concept index of each part of the drift segment.
    fn drift_sequence(self) -> &'static [usize] {
        match self {
            Pattern::AB => &[0, 1],
            Pattern::ABA => &[0, 1, 0],
            Pattern::ABC => &[0, 1, 2],
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Pattern::AB => "AB",
            Pattern::ABA => "ABA",
            Pattern::ABC => "ABC",
        };
        f.write_str(s)
    }
}

impl FromStr for Pattern {
    type Err = DriftError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "AB" => Ok(Pattern::AB),
            "ABA" => Ok(Pattern::ABA),
            "ABC" => Ok(Pattern::ABC),
            other => Err(DriftError::config(format!(
                "unknown pattern `{other}` (expected AB, ABA or ABC)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub pattern: Pattern,
    /// Length of concept B for ABA/ABC; ignored by AB, which splits D evenly.
    pub b_length: usize,
    pub delta: usize,
    pub concepts: Vec<ConceptKind>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub change_points: Vec<usize>,
    pub pattern: Pattern,
}

impl StreamSpec {
    pub fn validate(&self) -> Result<()> {
        if !B_LENGTHS.contains(&self.b_length) {
            return Err(DriftError::config(format!(
                "b_length must be one of {B_LENGTHS:?} (got {})",
                self.b_length
            )));
        }
        if self.delta > MAX_DELTA {
            return Err(DriftError::config(format!(
                "delta must lie in [0, {MAX_DELTA}] (got {})",
                self.delta
            )));
        }
        let need = self.pattern.concept_count();
        if self.concepts.len() != need {
            return Err(DriftError::config(format!(
                "pattern {} needs {need} concepts, got {}",
                self.pattern,
                self.concepts.len()
            )));
        }
        let dim = self.concepts[0].dimension();
        for c in &self.concepts {
            c.validate()?;
            if c.dimension() != dim {
                return Err(DriftError::config("concepts have different dimensions"));
            }
        }
        Ok(())
    }

    /// `(concept index, run length)` for each maximal constant run of the stream.
    pub fn layout(&self) -> Vec<(usize, usize)> {
        let parts: Vec<usize> = match self.pattern {
            Pattern::AB => vec![DRIFT_SEGMENT / 2, DRIFT_SEGMENT / 2],
            Pattern::ABA | Pattern::ABC => {
                let outer = DRIFT_SEGMENT - self.b_length;
                let first = outer / 2;
                vec![first, self.b_length, outer - first]
            }
        };
        let seq = self.pattern.drift_sequence();
        let mut runs: Vec<(usize, usize)> = seq.iter().copied().zip(parts).collect();
        runs[0].1 += WARMUP_BASE + self.delta;
        runs.last_mut().expect("non-empty").1 += COOLDOWN_BASE - self.delta;
        runs
    }

    pub fn ground_truth(&self) -> GroundTruth {
        let runs = self.layout();
        let mut acc = 0;
        let change_points = runs[..runs.len() - 1]
            .iter()
            .map(|(_, len)| {
                acc += len;
                acc
            })
            .collect();
        GroundTruth {
            change_points,
            pattern: self.pattern,
        }
    }
}

/// Builds the 1600-sample benchmark stream and its change points.
pub fn compose_stream(spec: &StreamSpec) -> Result<(Vec<StreamSample>, GroundTruth)> {
    spec.validate()?;
    let mut sources = spec
        .concepts
        .iter()
        .enumerate()
        .map(|(i, c)| ConceptSource::new(c.clone(), derive_seed(spec.seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut samples = Vec::with_capacity(STREAM_LENGTH);
    for (concept, len) in spec.layout() {
        for x in sources[concept].generate(len)? {
            samples.push(StreamSample::new(samples.len(), x));
        }
    }
    debug_assert_eq!(samples.len(), STREAM_LENGTH);
    Ok((samples, spec.ground_truth()))
}

/// Z-scores every feature over the whole stream (population variance).
/// Constant features become all zeros.
pub fn normalize_stream(samples: &[StreamSample]) -> Result<Vec<StreamSample>> {
    if samples.is_empty() {
        return Err(DriftError::arg("cannot normalize an empty stream"));
    }
    validate_stream(samples)?;
    let n = samples.len() as f64;
    let dim = samples[0].features.len();
    let mut mean = vec![0.0; dim];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(&s.features) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    // second pass removes the rounding error of the first mean
    let mut correction = vec![0.0; dim];
    for s in samples {
        for ((c, x), m) in correction.iter_mut().zip(&s.features).zip(&mean) {
            *c += x - m;
        }
    }
    for (m, c) in mean.iter_mut().zip(&correction) {
        *m += c / n;
    }
    let mut var = vec![0.0; dim];
    for s in samples {
        for ((v, x), m) in var.iter_mut().zip(&s.features).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .zip(&mean)
        .map(|(v, m)| {
            let sd = (v / n).sqrt();
            // relative cutoff, so that floating noise on a constant column is not blown up
            if sd > 1e-12 * m.abs().max(1.0) {
                1.0 / sd
            } else {
                0.0
            }
        })
        .collect();
    Ok(samples
        .iter()
        .map(|s| StreamSample {
            time: s.time,
            features: s
                .features
                .iter()
                .zip(&mean)
                .zip(&scale)
                .map(|((x, m), k)| (x - m) * k)
                .collect(),
        })
        .collect())
}
