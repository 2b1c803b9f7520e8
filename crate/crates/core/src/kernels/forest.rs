//! Arrival-time forests.
//!
//! Each tree is a CART regression tree that predicts a sample's arrival time
//! from its features, grown on a bootstrap subsample of the window. Points
//! that share a leaf live in a region of feature space with similar arrival
//! behaviour, so the fraction of trees in which two points share a leaf is a
//! similarity tuned to the drift in the window. Every tree's co-membership
//! matrix is a block indicator Gram matrix, hence the averaged similarity is
//! positive semi-definite with unit diagonal.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::seed::{derive_seed, rng_from};
use crate::streams::StreamSample;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Bootstrap sample size as a fraction of the window (drawn with replacement).
    pub subsample_fraction: f64,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 32,
            max_depth: 4,
            subsample_fraction: 0.632,
            min_leaf: 5,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(DriftError::config("n_trees must be at least 1"));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(DriftError::config("subsample_fraction must lie in (0, 1]"));
        }
        if self.min_leaf == 0 {
            return Err(DriftError::config("min_leaf must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf {
        id: u32,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentTree {
    nodes: Vec<Node>,
    n_leaves: usize,
}

impl MomentTree {
    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    /// Feature and threshold of the root split, `None` for a single-leaf tree.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first()? {
            Node::Split {
                feature, threshold, ..
            } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        }
    }

    pub fn leaf_of(&self, x: &[f64]) -> u32 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { id } => return *id,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentForest {
    trees: Vec<MomentTree>,
    dim: usize,
}

struct Grower<'a> {
    xs: &'a [&'a [f64]],
    target: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
    n_leaves: u32,
}

impl Grower<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize) -> u32 {
        let at = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf { id: 0 });
        let split = if depth < self.max_depth && idx.len() >= 2 * self.min_leaf {
            self.best_split(idx)
        } else {
            None
        };
        match split {
            None => {
                self.nodes[at as usize] = Node::Leaf { id: self.n_leaves };
                self.n_leaves += 1;
            }
            Some((feature, threshold)) => {
                let xs = self.xs;
                let mid = partition_in_place(idx, |&i| xs[i][feature] <= threshold);
                let (lo, hi) = idx.split_at_mut(mid);
                let left = self.grow(lo, depth + 1);
                let right = self.grow(hi, depth + 1);
                self.nodes[at as usize] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
        }
        at
    }

    /// Variance-reduction split over all features; ties keep the earliest candidate.
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let n = idx.len();
        let dim = self.xs[idx[0]].len();
        let total: f64 = idx.iter().map(|&i| self.target[i]).sum();
        let mean = total / n as f64;
        let sse: f64 = idx.iter().map(|&i| (self.target[i] - mean).powi(2)).sum();
        if sse <= 0.0 {
            return None;
        }
        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
        for f in 0..dim {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.xs[i][f], self.target[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let mut left_sum = 0.0;
            for pos in 1..n {
                left_sum += pairs[pos - 1].1;
                if pos < self.min_leaf || n - pos < self.min_leaf {
                    continue;
                }
                if pairs[pos - 1].0 == pairs[pos].0 {
                    continue;
                }
                let (nl, nr) = (pos as f64, (n - pos) as f64);
                let diff = left_sum / nl - (total - left_sum) / nr;
                let gain = nl * nr / n as f64 * diff * diff;
                if best.is_none_or(|(g, _, _)| gain > g) {
                    let threshold = 0.5 * (pairs[pos - 1].0 + pairs[pos].0);
                    best = Some((gain, f, threshold));
                }
            }
        }
        match best {
            Some((gain, f, t)) if gain > 1e-12 * sse => Some((f, t)),
            _ => None,
        }
    }
}

fn partition_in_place(idx: &mut [usize], pred: impl Fn(&usize) -> bool) -> usize {
    let mut mid = 0;
    for i in 0..idx.len() {
        if pred(&idx[i]) {
            idx.swap(i, mid);
            mid += 1;
        }
    }
    mid
}

impl MomentForest {
    /// Fits the forest on a window, regressing arrival time on features.
    pub fn train(window: &[StreamSample], config: &ForestConfig) -> Result<MomentForest> {
        config.validate()?;
        if window.len() < 2 * config.min_leaf {
            return Err(DriftError::precondition(format!(
                "window of {} samples is smaller than 2 * min_leaf = {}",
                window.len(),
                2 * config.min_leaf
            )));
        }
        let dim = window[0].features.len();
        if window.iter().any(|s| s.features.len() != dim) {
            return Err(DriftError::arg("window has mixed dimensions"));
        }
        let xs: Vec<&[f64]> = window.iter().map(|s| s.features.as_slice()).collect();
        let target: Vec<f64> = window.iter().map(|s| s.time as f64).collect();
        let n = window.len();
        let draws = ((config.subsample_fraction * n as f64).round() as usize).max(1);

        let trees = (0..config.n_trees)
            .map(|t| {
                let mut rng = rng_from(derive_seed(config.seed, t as u64));
                let mut idx: Vec<usize> = (0..draws).map(|_| rng.random_range(0..n)).collect();
                let mut grower = Grower {
                    xs: &xs,
                    target: &target,
                    max_depth: config.max_depth,
                    min_leaf: config.min_leaf,
                    nodes: Vec::new(),
                    n_leaves: 0,
                };
                grower.grow(&mut idx, 0);
                MomentTree {
                    n_leaves: grower.n_leaves as usize,
                    nodes: grower.nodes,
                }
            })
            .collect();
        Ok(MomentForest { trees, dim })
    }

    pub fn trees(&self) -> &[MomentTree] {
        &self.trees
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Leaf id of `x` in every tree.
    pub fn leaf_ids(&self, x: &[f64]) -> Result<Vec<u32>> {
        self.check_dim(x)?;
        Ok(self.trees.iter().map(|t| t.leaf_of(x)).collect())
    }

    /// Fraction of trees in which `x` and `y` fall into the same leaf.
    pub fn similarity(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        let same = self
            .trees
            .iter()
            .filter(|t| t.leaf_of(x) == t.leaf_of(y))
            .count();
        Ok(same as f64 / self.trees.len() as f64)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(DriftError::arg(format!(
                "vector has dimension {}, forest was trained on {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

/// Trains a forest on the window (see [`MomentForest::train`]).
pub fn train_moment_forest(window: &[StreamSample], config: &ForestConfig) -> Result<MomentForest> {
    MomentForest::train(window, config)
}

/// See [`MomentForest::similarity`].
pub fn forest_similarity(forest: &MomentForest, x: &[f64], y: &[f64]) -> Result<f64> {
    forest.similarity(x, y)
}
