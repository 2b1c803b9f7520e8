//! Piecewise-constant segmentation of the time axis.
//!
//! A regression tree with time as its only covariate is grown best-first
//! under a leaf budget; its thresholds are the change points. The budget is
//! picked by cross-validated R².

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::linalg::Matrix;
use crate::seed::{derive_seed, rng_from};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeTree {
    /// Strictly increasing split thresholds, midpoints between distinct times.
    pub thresholds: Vec<f64>,
    /// Mean target of each leaf, in time order.
    pub leaf_means: Vec<Vec<f64>>,
}

impl TimeTree {
    pub fn n_leaves(&self) -> usize {
        self.leaf_means.len()
    }

    pub fn leaf_index(&self, t: f64) -> usize {
        self.thresholds.partition_point(|&h| h <= t)
    }

    pub fn predict(&self, t: f64) -> &[f64] {
        &self.leaf_means[self.leaf_index(t)]
    }
}

#[derive(Clone, Copy, Debug)]
struct Split {
    gain: f64,
    /// First row of the right part.
    pos: usize,
}

/// Column prefix sums of the targets, so any row range's sum is O(dim).
struct Prefix {
    dim: usize,
    /// `(n + 1) x dim`, row `i` holds the sum of rows `0..i`.
    sums: Vec<f64>,
}

impl Prefix {
    fn new(rows: &[&[f64]]) -> Self {
        let dim = rows.first().map_or(0, |r| r.len());
        let mut sums = vec![0.0; (rows.len() + 1) * dim];
        for (i, r) in rows.iter().enumerate() {
            for d in 0..dim {
                sums[(i + 1) * dim + d] = sums[i * dim + d] + r[d];
            }
        }
        Prefix { dim, sums }
    }

    fn range_sum(&self, lo: usize, hi: usize, d: usize) -> f64 {
        self.sums[hi * self.dim + d] - self.sums[lo * self.dim + d]
    }

    /// Largest variance reduction over splits of `lo..hi` between distinct times.
    fn best_split(&self, times: &[f64], lo: usize, hi: usize) -> Option<Split> {
        let n = (hi - lo) as f64;
        let mut best: Option<Split> = None;
        for pos in lo + 1..hi {
            if times[pos - 1] == times[pos] {
                continue;
            }
            let (nl, nr) = ((pos - lo) as f64, (hi - pos) as f64);
            let mut dist = 0.0;
            for d in 0..self.dim {
                let l = self.range_sum(lo, pos, d);
                let r = self.range_sum(pos, hi, d);
                let diff = l / nl - r / nr;
                dist += diff * diff;
            }
            let gain = nl * nr / n * dist;
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(Split { gain, pos });
            }
        }
        best
    }
}

/// Row positions where a best-first growth to `max_leaves` splits, in the
/// order the splits were made. Growth stops early when no split reduces the
/// squared error by more than round-off.
fn grow_sequence(times: &[f64], rows: &[&[f64]], max_leaves: usize) -> Vec<usize> {
    let n = rows.len();
    let prefix = Prefix::new(rows);
    let total_ss: f64 = rows.iter().flat_map(|r| r.iter()).map(|v| v * v).sum();
    let eps = 1e-12 * total_ss.max(f64::MIN_POSITIVE);

    // (lo, hi, cached best split)
    let mut leaves = vec![(0usize, n, prefix.best_split(times, 0, n))];
    let mut order = Vec::new();
    while leaves.len() < max_leaves {
        let pick = leaves
            .iter()
            .enumerate()
            .filter_map(|(i, (_, _, s))| s.map(|s| (i, s)))
            .fold(None::<(usize, Split)>, |best, (i, s)| match best {
                Some((_, b)) if b.gain >= s.gain => best,
                _ => Some((i, s)),
            });
        let Some((i, split)) = pick else { break };
        if split.gain <= eps {
            break;
        }
        let (lo, hi, _) = leaves[i];
        leaves[i] = (lo, split.pos, prefix.best_split(times, lo, split.pos));
        leaves.insert(i + 1, (split.pos, hi, prefix.best_split(times, split.pos, hi)));
        order.push(split.pos);
    }
    order
}

fn tree_from_splits(times: &[f64], rows: &[&[f64]], splits: &[usize]) -> TimeTree {
    let mut cuts = splits.to_vec();
    cuts.sort_unstable();
    let dim = rows.first().map_or(0, |r| r.len());
    let mut bounds = vec![0];
    bounds.extend(&cuts);
    bounds.push(rows.len());
    let leaf_means = bounds
        .windows(2)
        .map(|w| {
            let mut m = vec![0.0; dim];
            for r in &rows[w[0]..w[1]] {
                for d in 0..dim {
                    m[d] += r[d];
                }
            }
            let len = (w[1] - w[0]) as f64;
            m.iter_mut().for_each(|v| *v /= len);
            m
        })
        .collect();
    TimeTree {
        thresholds: cuts.iter().map(|&p| 0.5 * (times[p - 1] + times[p])).collect(),
        leaf_means,
    }
}

fn check_inputs(times: &[f64], targets: &Matrix) -> Result<()> {
    if times.len() != targets.nrows() {
        return Err(DriftError::arg(format!(
            "{} times for {} target rows",
            times.len(),
            targets.nrows()
        )));
    }
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(DriftError::arg("times must be sorted ascending"));
    }
    Ok(())
}

/// Greedy best-first regression tree on time with at most `max_leaves` leaves.
pub fn fit_time_tree(times: &[f64], targets: &Matrix, max_leaves: usize) -> Result<TimeTree> {
    check_inputs(times, targets)?;
    if max_leaves == 0 || max_leaves > times.len() {
        return Err(DriftError::arg(format!(
            "max_leaves must lie in 1..={} (got {max_leaves})",
            times.len()
        )));
    }
    let rows: Vec<&[f64]> = (0..targets.nrows()).map(|i| targets.row(i)).collect();
    let splits = grow_sequence(times, &rows, max_leaves);
    Ok(tree_from_splits(times, &rows, &splits))
}

/// Thresholds rounded up to the next integer arrival index.
pub fn extract_change_points(tree: &TimeTree) -> Vec<usize> {
    tree.thresholds.iter().map(|&h| h.ceil().max(0.0) as usize).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub k_max: usize,
    pub n_itr: usize,
    /// Fraction of points used for training in each split.
    pub split_ratio: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k_max: 5,
            n_itr: 20,
            split_ratio: 0.7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSelection {
    pub k: usize,
    /// Mean test R² for `k = 1..=k_max`.
    pub scores: Vec<f64>,
}

/// Mean over target dimensions of the test-set R². A dimension with no test
/// variance scores 1 when predicted exactly and 0 otherwise.
fn r2_score(actual: &[&[f64]], predicted: &[&[f64]]) -> f64 {
    let n = actual.len() as f64;
    let dim = actual[0].len();
    if dim == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    for d in 0..dim {
        let mean = actual.iter().map(|r| r[d]).sum::<f64>() / n;
        let sst: f64 = actual.iter().map(|r| (r[d] - mean).powi(2)).sum();
        let sse: f64 = actual
            .iter()
            .zip(predicted)
            .map(|(a, p)| (a[d] - p[d]).powi(2))
            .sum();
        total += if sst > 0.0 {
            1.0 - sse / sst
        } else if sse == 0.0 {
            1.0
        } else {
            0.0
        };
    }
    total / dim as f64
}

/// Picks the leaf budget with the best mean test R² over random train/test
/// splits; ties go to the smaller budget.
pub fn cv_select_leaves(times: &[f64], targets: &Matrix, config: &CvConfig, seed: u64) -> Result<CvSelection> {
    check_inputs(times, targets)?;
    let n = times.len();
    if n < 2 {
        return Err(DriftError::arg("cross-validation needs at least two points"));
    }
    if config.k_max == 0 || config.n_itr == 0 {
        return Err(DriftError::config("k_max and n_itr must be positive"));
    }
    if !(config.split_ratio > 0.0 && config.split_ratio < 1.0) {
        return Err(DriftError::config("split_ratio must lie in (0, 1)"));
    }
    let n_train = ((config.split_ratio * n as f64).round() as usize).clamp(1, n - 1);
    if n - n_train < config.k_max || n_train < config.k_max {
        return Err(DriftError::precondition(format!(
            "{n} points are too few for k_max = {} at split ratio {}",
            config.k_max, config.split_ratio
        )));
    }

    let rows: Vec<&[f64]> = (0..n).map(|i| targets.row(i)).collect();
    let mut sums = vec![0.0; config.k_max];
    let mut perm: Vec<usize> = (0..n).collect();
    for itr in 0..config.n_itr {
        perm.sort_unstable();
        perm.shuffle(&mut rng_from(derive_seed(seed, itr as u64)));
        let (train, test) = perm.split_at_mut(n_train);
        train.sort_unstable();
        let tr_times: Vec<f64> = train.iter().map(|&i| times[i]).collect();
        let tr_rows: Vec<&[f64]> = train.iter().map(|&i| rows[i]).collect();
        let te_rows: Vec<&[f64]> = test.iter().map(|&i| rows[i]).collect();

        let splits = grow_sequence(&tr_times, &tr_rows, config.k_max);
        for (k, sum) in sums.iter_mut().enumerate() {
            let used = k.min(splits.len());
            let tree = tree_from_splits(&tr_times, &tr_rows, &splits[..used]);
            let preds: Vec<&[f64]> = test.iter().map(|&i| tree.predict(times[i])).collect();
            *sum += r2_score(&te_rows, &preds);
        }
    }
    let scores: Vec<f64> = sums.iter().map(|s| s / config.n_itr as f64).collect();
    let mut k = 1;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[k - 1] {
            k = i + 1;
        }
    }
    Ok(CvSelection { k, scores })
}

/// Outcome of cross-validated segmentation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub change_points: Vec<usize>,
    pub k: usize,
    pub cv_scores: Vec<f64>,
}

/// Cross-validates the leaf budget, refits on all points and extracts the change points.
pub fn segment(times: &[f64], targets: &Matrix, config: &CvConfig, seed: u64) -> Result<Segmentation> {
    let sel = cv_select_leaves(times, targets, config, seed)?;
    let change_points = if sel.k > 1 {
        extract_change_points(&fit_time_tree(times, targets, sel.k)?)
    } else {
        Vec::new()
    };
    Ok(Segmentation {
        change_points,
        k: sel.k,
        cv_scores: sel.scores,
    })
}
