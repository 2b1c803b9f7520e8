//! The spectral drift detector.
//!
//! One analysis of a window ("batch") builds the kernel matrix, takes the
//! smallest Laplacian eigenvectors, and segments them in time; the segment
//! boundaries are the detections. [`SddmDetector`] runs batches over a sliding
//! window of a stream and consolidates the per-batch detections with Ward
//! clustering and a cross-batch consensus vote.

mod postprocess;
mod stream;

pub use postprocess::{consensus_filter, dedup_ward, BatchSpan, ConsolidatedEvent, RawEvent};
pub use stream::{sddm_stream, BatchResult, SddmDetector};

use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::kernels::{compute_kernel_matrix, KernelConfig};
use crate::seed::derive_seed;
use crate::segmentation::{segment, CvConfig};
use crate::spectral::{spectral_embedding, LaplacianKind};
use crate::streams::StreamSample;

const KERNEL_SEED_TAG: u64 = 0x6b65726e;
const CV_SEED_TAG: u64 = 0x63760000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SddmConfig {
    pub kernel: KernelConfig,
    pub laplacian: LaplacianKind,
    pub n_eigen: usize,
    pub n_itr: usize,
    pub k_max: usize,
    pub split_ratio: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub batch_stride: usize,
    pub ward_threshold: f64,
    pub consensus_fraction: f64,
    pub seed: u64,
}

impl Default for SddmConfig {
    fn default() -> Self {
        SddmConfig {
            kernel: KernelConfig::default(),
            laplacian: LaplacianKind::SymmetricNormalized,
            n_eigen: 5,
            n_itr: 20,
            k_max: 5,
            split_ratio: 0.7,
            n_min: 100,
            n_max: 500,
            batch_stride: 50,
            ward_threshold: 20.0,
            consensus_fraction: 0.5,
            seed: 0,
        }
    }
}

impl SddmConfig {
    pub fn with_kernel(kernel: KernelConfig) -> Self {
        SddmConfig {
            kernel,
            ..SddmConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if self.n_eigen == 0 {
            return Err(DriftError::config("n_eigen must be at least 1"));
        }
        if self.k_max == 0 || self.k_max > self.n_eigen + 1 {
            return Err(DriftError::config(format!(
                "k_max must lie in 1..={} (n_eigen + 1)",
                self.n_eigen + 1
            )));
        }
        if self.n_min > self.n_max {
            return Err(DriftError::config("n_min must not exceed n_max"));
        }
        if self.batch_stride == 0 {
            return Err(DriftError::config("batch_stride must be at least 1"));
        }
        if !(self.ward_threshold >= 0.0) {
            return Err(DriftError::config("ward_threshold must be non-negative"));
        }
        if !(self.consensus_fraction > 0.0 && self.consensus_fraction <= 1.0) {
            return Err(DriftError::config("consensus_fraction must lie in (0, 1]"));
        }
        Ok(())
    }

    fn cv(&self) -> CvConfig {
        CvConfig {
            k_max: self.k_max,
            n_itr: self.n_itr,
            split_ratio: self.split_ratio,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflineResult {
    pub events: Vec<usize>,
    pub k: usize,
    pub cv_scores: Vec<f64>,
}

/// Analyses one window. `config.seed` drives the kernel and the CV splits.
pub fn sddm_offline(window: &[StreamSample], config: &SddmConfig) -> Result<OfflineResult> {
    config.validate()?;
    if window.len() < config.n_min.max(2) {
        return Err(DriftError::precondition(format!(
            "window has {} samples, n_min is {}",
            window.len(),
            config.n_min
        )));
    }
    let kernel = config.kernel.with_seed(derive_seed(config.seed, KERNEL_SEED_TAG));
    let k = compute_kernel_matrix(window, &kernel)?;
    let basis = spectral_embedding(&k, config.laplacian, config.n_eigen)?;
    let times: Vec<f64> = basis.window_times.iter().map(|&t| t as f64).collect();
    let seg = segment(&times, &basis.vectors, &config.cv(), derive_seed(config.seed, CV_SEED_TAG))?;
    Ok(OfflineResult {
        events: seg.change_points,
        k: seg.k,
        cv_scores: seg.cv_scores,
    })
}

/// A consolidated detection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriftEvent {
    #[serde(rename = "t")]
    pub time: usize,
    /// First batch that reported a member of this event's cluster.
    #[serde(rename = "batch")]
    pub batch_id: usize,
    /// Number of distinct batches that reported it.
    pub support: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub events: Vec<DriftEvent>,
    #[serde(rename = "raw")]
    pub raw_events: Vec<RawEvent>,
    /// Per-k CV scores of the last batch.
    pub cv_scores: Vec<f64>,
    pub batches: Vec<BatchSpan>,
}

impl DriftReport {
    pub fn event_times(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.time).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::{compose_stream, normalize_stream, ConceptKind, Pattern, StreamSpec};

    fn stagger_window(pattern: Pattern, seed: u64) -> Vec<StreamSample> {
        let concepts = match pattern {
            Pattern::AB => vec![ConceptKind::stagger(0), ConceptKind::stagger(1)],
            Pattern::ABA => vec![ConceptKind::stagger(0), ConceptKind::stagger(1)],
            Pattern::ABC => (0..3).map(ConceptKind::stagger).collect(),
        };
        let spec = StreamSpec {
            pattern,
            b_length: 100,
            delta: 0,
            concepts,
            seed,
        };
        let (s, _) = compose_stream(&spec).unwrap();
        normalize_stream(&s).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SddmConfig::default().validate().is_ok());
        let bad = [
            SddmConfig { n_min: 600, ..SddmConfig::default() },
            SddmConfig { k_max: 7, ..SddmConfig::default() },
            SddmConfig { batch_stride: 0, ..SddmConfig::default() },
            SddmConfig { consensus_fraction: 0.0, ..SddmConfig::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(DriftError::Config(_))));
        }
        let parsed: SddmConfig = toml::from_str("n_eigen = 4\n[kernel]\nkind = \"rbf\"\n").unwrap();
        assert_eq!(parsed.kernel, KernelConfig::rbf_median());
        assert_eq!(parsed.n_eigen, 4);
        assert!(toml::from_str::<SddmConfig>("n_eigens = 4\n").is_err());
    }

    #[test]
    fn small_window_is_rejected() {
        let w = stagger_window(Pattern::AB, 1);
        assert!(matches!(
            sddm_offline(&w[..99], &SddmConfig::default()),
            Err(DriftError::Precondition(_))
        ));
    }

    #[test]
    fn offline_finds_an_ab_switch() {
        let w = stagger_window(Pattern::AB, 3);
        let res = sddm_offline(&w[500..1000], &SddmConfig::default()).unwrap();
        assert_eq!(res.cv_scores.len(), 5);
        assert!(
            res.events.iter().any(|&t| t.abs_diff(750) <= 5),
            "{res:?}"
        );
    }

    #[test]
    fn offline_is_deterministic() {
        let w = stagger_window(Pattern::ABA, 5);
        let cfg = SddmConfig { seed: 11, ..SddmConfig::default() };
        assert_eq!(
            sddm_offline(&w[500..1000], &cfg).unwrap(),
            sddm_offline(&w[500..1000], &cfg).unwrap()
        );
    }
}
