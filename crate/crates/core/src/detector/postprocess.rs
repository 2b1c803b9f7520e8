use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::DriftEvent;

/// A detection as reported by a single batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEvent {
    #[serde(rename = "t")]
    pub time: usize,
    #[serde(rename = "batch")]
    pub batch_id: usize,
}

/// Arrival range `[first_time, last_time]` analysed by one batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSpan {
    #[serde(rename = "batch")]
    pub batch_id: usize,
    pub first_time: usize,
    pub last_time: usize,
}

impl BatchSpan {
    /// A batch could have reported a change at `t` if it saw samples on both sides.
    pub fn covers(&self, t: usize) -> bool {
        self.first_time < t && t <= self.last_time
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsolidatedEvent {
    pub time: usize,
    pub first_batch: usize,
    pub support: usize,
    pub members: Vec<RawEvent>,
}

impl ConsolidatedEvent {
    fn from_members(mut members: Vec<RawEvent>) -> Self {
        members.sort_by_key(|e| (e.time, e.batch_id));
        // modal time; a run is replaced only by a strictly longer one, so ties keep the earliest
        let mut best = (members[0].time, 0usize);
        let mut i = 0;
        while i < members.len() {
            let t = members[i].time;
            let run = members[i..].iter().take_while(|e| e.time == t).count();
            if run > best.1 {
                best = (t, run);
            }
            i += run;
        }
        let batches: BTreeSet<usize> = members.iter().map(|e| e.batch_id).collect();
        ConsolidatedEvent {
            time: best.0,
            first_batch: *batches.iter().next().expect("non-empty cluster"),
            support: batches.len(),
            members,
        }
    }
}

/// Ward linkage distance between two 1-d clusters given sizes and means.
fn ward_distance(na: usize, ma: f64, nb: usize, mb: f64) -> f64 {
    let (na, nb) = (na as f64, nb as f64);
    (2.0 * na * nb / (na + nb)).sqrt() * (ma - mb).abs()
}

/// Agglomerative Ward clustering of event times, merging while the closest
/// pair of clusters is within `threshold`. Each cluster is reported at its
/// modal time. Adjacent clusters whose reported times still fall within
/// `threshold` of each other are merged afterwards, so the output is
/// separated by more than `threshold`.
pub fn dedup_ward(raw: &[RawEvent], threshold: f64) -> Vec<ConsolidatedEvent> {
    let mut clusters: Vec<(Vec<RawEvent>, f64)> = {
        let mut sorted = raw.to_vec();
        sorted.sort_by_key(|e| (e.time, e.batch_id));
        sorted.into_iter().map(|e| (vec![e], e.time as f64)).collect()
    };
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let d = ward_distance(clusters[i].0.len(), clusters[i].1, clusters[j].0.len(), clusters[j].1);
                if best.is_none_or(|(b, _, _)| d < b) {
                    best = Some((d, i, j));
                }
            }
        }
        match best {
            Some((d, i, j)) if d <= threshold => {
                let (members, mean) = clusters.remove(j);
                let (ni, nj) = (clusters[i].0.len() as f64, members.len() as f64);
                clusters[i].1 = (ni * clusters[i].1 + nj * mean) / (ni + nj);
                clusters[i].0.extend(members);
            }
            _ => break,
        }
    }

    let mut events: Vec<ConsolidatedEvent> = clusters
        .into_iter()
        .map(|(m, _)| ConsolidatedEvent::from_members(m))
        .collect();
    events.sort_by_key(|e| e.time);
    loop {
        let close = events
            .windows(2)
            .position(|w| (w[1].time - w[0].time) as f64 <= threshold);
        let Some(i) = close else { break };
        let right = events.remove(i + 1);
        let mut members = std::mem::take(&mut events[i].members);
        members.extend(right.members);
        events[i] = ConsolidatedEvent::from_members(members);
        events.sort_by_key(|e| e.time);
    }
    events
}

/// Keeps events reported by at least `fraction` of the batches that covered them.
pub fn consensus_filter(events: &[ConsolidatedEvent], batches: &[BatchSpan], fraction: f64) -> Vec<DriftEvent> {
    events
        .iter()
        .filter(|e| {
            let covering = batches.iter().filter(|b| b.covers(e.time)).count();
            covering > 0 && e.support as f64 >= fraction * covering as f64
        })
        .map(|e| DriftEvent {
            time: e.time,
            batch_id: e.first_batch,
            support: e.support,
        })
        .collect()
}
