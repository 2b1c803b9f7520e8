use std::collections::VecDeque;

use log::debug;
use serde::{Deserialize, Serialize};

use super::postprocess::{consensus_filter, dedup_ward, BatchSpan, RawEvent};
use super::{sddm_offline, DriftReport, SddmConfig};
use crate::error::{DriftError, Result};
use crate::streams::StreamSample;

/// Provisional output of one batch, available as soon as it ran.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub span: BatchSpan,
    pub events: Vec<usize>,
    pub k: usize,
    pub cv_scores: Vec<f64>,
    pub provisional: bool,
}

/// Sliding-window detector. Feed samples with [`push`](Self::push) and call
/// [`finish`](Self::finish) for the consolidated report.
#[derive(Debug)]
pub struct SddmDetector {
    config: SddmConfig,
    window: VecDeque<StreamSample>,
    arrivals: usize,
    batches: Vec<BatchSpan>,
    raw: Vec<RawEvent>,
    last_cv: Vec<f64>,
}

impl SddmDetector {
    pub fn new(config: SddmConfig) -> Result<Self> {
        config.validate()?;
        Ok(SddmDetector {
            window: VecDeque::with_capacity(config.n_max + 1),
            config,
            arrivals: 0,
            batches: Vec::new(),
            raw: Vec::new(),
            last_cv: Vec::new(),
        })
    }

    pub fn config(&self) -> &SddmConfig {
        &self.config
    }

    pub fn arrivals(&self) -> usize {
        self.arrivals
    }

    /// Adds a sample; returns the batch result when this arrival triggered one.
    pub fn push(&mut self, sample: StreamSample) -> Result<Option<BatchResult>> {
        if let Some(last) = self.window.back() {
            if sample.time <= last.time {
                return Err(DriftError::arg(format!(
                    "time {} does not increase past {}",
                    sample.time, last.time
                )));
            }
            if sample.features.len() != last.features.len() {
                return Err(DriftError::arg("sample dimension changed"));
            }
        }
        self.window.push_back(sample);
        if self.window.len() > self.config.n_max {
            self.window.pop_front();
        }
        self.arrivals += 1;
        if self.window.len() <= self.config.n_min || self.arrivals % self.config.batch_stride != 0 {
            return Ok(None);
        }

        let batch_id = self.batches.len();
        let window: Vec<StreamSample> = self.window.iter().cloned().collect();
        let cfg = SddmConfig {
            seed: self.config.seed.wrapping_add(batch_id as u64),
            ..self.config.clone()
        };
        let res = sddm_offline(&window, &cfg)?;
        let span = BatchSpan {
            batch_id,
            first_time: window[0].time,
            last_time: window[window.len() - 1].time,
        };
        debug!(
            "batch {batch_id} over [{}, {}]: k = {}, events {:?}",
            span.first_time, span.last_time, res.k, res.events
        );
        self.batches.push(span);
        self.raw
            .extend(res.events.iter().map(|&time| RawEvent { time, batch_id }));
        self.last_cv = res.cv_scores.clone();
        Ok(Some(BatchResult {
            span,
            events: res.events,
            k: res.k,
            cv_scores: res.cv_scores,
            provisional: true,
        }))
    }

    /// Consolidates everything seen so far.
    pub fn report(&self) -> DriftReport {
        let clusters = dedup_ward(&self.raw, self.config.ward_threshold);
        DriftReport {
            events: consensus_filter(&clusters, &self.batches, self.config.consensus_fraction),
            raw_events: self.raw.clone(),
            cv_scores: self.last_cv.clone(),
            batches: self.batches.clone(),
        }
    }

    pub fn finish(self) -> DriftReport {
        self.report()
    }
}

/// Runs the sliding-window detector over a whole stream.
pub fn sddm_stream(samples: impl IntoIterator<Item = StreamSample>, config: &SddmConfig) -> Result<DriftReport> {
    let mut det = SddmDetector::new(config.clone())?;
    for s in samples {
        det.push(s)?;
    }
    Ok(det.finish())
}
