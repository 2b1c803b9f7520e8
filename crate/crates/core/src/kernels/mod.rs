//! Kernels over stream windows: Gaussian RBF, the arrival-time forest
//! similarity, kernel matrices, and the empirical MMD².

mod forest;

pub use forest::{forest_similarity, train_moment_forest, ForestConfig, MomentForest, MomentTree};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::linalg::Matrix;
use crate::seed::rng_from;
use crate::streams::StreamSample;

/// Points used for the median heuristic; larger windows are strided down.
const MEDIAN_HEURISTIC_MAX_POINTS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelConfig {
    /// `exp(-gamma ‖x - y‖²)`; `gamma = None` picks the median heuristic per window.
    Rbf {
        #[serde(default)]
        gamma: Option<f64>,
    },
    MomentForest(ForestConfig),
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig::MomentForest(ForestConfig::default())
    }
}

impl KernelConfig {
    pub fn rbf_median() -> Self {
        KernelConfig::Rbf { gamma: None }
    }

    pub fn rbf(gamma: f64) -> Self {
        KernelConfig::Rbf { gamma: Some(gamma) }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelConfig::Rbf { gamma: Some(g) } if !(g.is_finite() && *g > 0.0) => {
                Err(DriftError::config(format!("gamma must be positive (got {g})")))
            }
            KernelConfig::Rbf { .. } => Ok(()),
            KernelConfig::MomentForest(f) => f.validate(),
        }
    }

    /// Same kernel with its seed replaced (no-op for RBF).
    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            KernelConfig::MomentForest(f) => KernelConfig::MomentForest(ForestConfig {
                seed,
                ..f.clone()
            }),
            other => other.clone(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            KernelConfig::Rbf { .. } => "rbf",
            KernelConfig::MomentForest(_) => "mt",
        }
    }
}

pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(DriftError::arg(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok((-gamma * squared_distance(x, y)).exp())
}

pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `1 / median` of the pairwise squared distances. Zero distances are skipped
/// when the median would otherwise vanish; with no usable pair the result is 1.
pub fn median_heuristic_gamma(points: &[&[f64]]) -> f64 {
    let step = points.len().div_ceil(MEDIAN_HEURISTIC_MAX_POINTS).max(1);
    let pts: Vec<&[f64]> = points.iter().step_by(step).copied().collect();
    let mut d2 = Vec::with_capacity(pts.len() * pts.len().saturating_sub(1) / 2);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d2.push(squared_distance(pts[i], pts[j]));
        }
    }
    let mut median = median_of(&mut d2);
    if median <= 0.0 {
        d2.retain(|&d| d > 0.0);
        median = median_of(&mut d2);
    }
    if median > 0.0 && median.is_finite() {
        1.0 / median
    } else {
        1.0
    }
}

fn median_of(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len();
    let (_, hi, _) = v.select_nth_unstable_by(n / 2, f64::total_cmp);
    let hi = *hi;
    if n % 2 == 1 {
        hi
    } else {
        let lo = v[..n / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// A kernel whose data-dependent parts (bandwidth, forest) are already fixed.
#[derive(Clone, Debug)]
pub enum FittedKernel {
    Rbf { gamma: f64 },
    Forest(MomentForest),
}

impl FittedKernel {
    pub fn fit(window: &[StreamSample], config: &KernelConfig) -> Result<FittedKernel> {
        config.validate()?;
        match config {
            KernelConfig::Rbf { gamma: Some(g) } => Ok(FittedKernel::Rbf { gamma: *g }),
            KernelConfig::Rbf { gamma: None } => {
                let pts: Vec<&[f64]> = window.iter().map(|s| s.features.as_slice()).collect();
                Ok(FittedKernel::Rbf {
                    gamma: median_heuristic_gamma(&pts),
                })
            }
            KernelConfig::MomentForest(f) => Ok(FittedKernel::Forest(MomentForest::train(window, f)?)),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            FittedKernel::Rbf { gamma } => rbf_kernel(x, y, *gamma),
            FittedKernel::Forest(f) => f.similarity(x, y),
        }
    }

    /// Gram matrix over `points`; symmetric by construction with unit diagonal.
    pub fn gram(&self, points: &[&[f64]]) -> Result<Matrix> {
        let n = points.len();
        if let Some(p) = points.iter().find(|p| p.len() != points[0].len()) {
            return Err(DriftError::arg(format!(
                "dimension mismatch: {} vs {}",
                p.len(),
                points[0].len()
            )));
        }
        let mut m = Matrix::identity(n);
        match self {
            FittedKernel::Rbf { gamma } => {
                for i in 0..n {
                    for j in i + 1..n {
                        let v = (-gamma * squared_distance(points[i], points[j])).exp();
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
            }
            FittedKernel::Forest(f) => {
                let leaves = points
                    .iter()
                    .map(|p| f.leaf_ids(p))
                    .collect::<Result<Vec<_>>>()?;
                let t = f.trees().len() as f64;
                for i in 0..n {
                    for j in i + 1..n {
                        let same = leaves[i].iter().zip(&leaves[j]).filter(|(a, b)| a == b).count();
                        let v = same as f64 / t;
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
            }
        }
        Ok(m)
    }

    /// Mean kernel value between two point sets.
    pub fn mean_cross(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(DriftError::arg("empty point set"));
        }
        let mut s = 0.0;
        for x in a {
            for y in b {
                s += self.eval(x, y)?;
            }
        }
        Ok(s / (a.len() * b.len()) as f64)
    }
}

/// Kernel matrix over a window together with the window's arrival indices.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    values: Matrix,
    times: Vec<usize>,
}

impl KernelMatrix {
    /// Wraps a square matrix; the caller is responsible for symmetry.
    pub fn new(values: Matrix, times: Vec<usize>) -> Result<Self> {
        if !values.is_square() || values.nrows() != times.len() {
            return Err(DriftError::arg(format!(
                "kernel matrix is {}x{} for {} times",
                values.nrows(),
                values.ncols(),
                times.len()
            )));
        }
        Ok(KernelMatrix { values, times })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn window_times(&self) -> &[usize] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn into_matrix(self) -> Matrix {
        self.values
    }
}

pub fn compute_kernel_matrix(window: &[StreamSample], config: &KernelConfig) -> Result<KernelMatrix> {
    if window.is_empty() {
        return Err(DriftError::arg("kernel matrix of an empty window"));
    }
    let kernel = FittedKernel::fit(window, config)?;
    let pts: Vec<&[f64]> = window.iter().map(|s| s.features.as_slice()).collect();
    let values = kernel.gram(&pts)?;
    KernelMatrix::new(values, window.iter().map(|s| s.time).collect())
}

fn block_sum(k: &Matrix, a: &[usize], b: &[usize]) -> f64 {
    a.iter().map(|&i| b.iter().map(|&j| k[(i, j)]).sum::<f64>()).sum()
}

/// Biased (V-statistic) MMD² between two index sets of a kernel matrix,
/// clipped at zero.
pub fn empirical_mmd2(k: &KernelMatrix, idx_a: &[usize], idx_b: &[usize]) -> Result<f64> {
    if idx_a.is_empty() || idx_b.is_empty() {
        return Err(DriftError::arg("empty index set"));
    }
    let n = k.len();
    if let Some(&i) = idx_a.iter().chain(idx_b).find(|&&i| i >= n) {
        return Err(DriftError::arg(format!("index {i} outside a window of {n}")));
    }
    Ok(mmd2_unchecked(k.values(), idx_a, idx_b))
}

pub(crate) fn mmd2_unchecked(k: &Matrix, a: &[usize], b: &[usize]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let v = block_sum(k, a, a) / (na * na) - 2.0 * block_sum(k, a, b) / (na * nb)
        + block_sum(k, b, b) / (nb * nb);
    v.max(0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PermutationTest {
    pub statistic: f64,
    pub null: Vec<f64>,
    /// `(1 + #{null ≥ statistic}) / (1 + permutations)`.
    pub p_value: f64,
}

impl PermutationTest {
    /// Empirical `q`-quantile of the null (nearest rank).
    pub fn null_quantile(&self, q: f64) -> f64 {
        let mut v = self.null.clone();
        v.sort_by(f64::total_cmp);
        let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
        v[rank - 1]
    }
}

/// Two-sample permutation test on the MMD² of two index sets.
pub fn mmd2_permutation_test(
    k: &KernelMatrix,
    idx_a: &[usize],
    idx_b: &[usize],
    n_permutations: usize,
    seed: u64,
) -> Result<PermutationTest> {
    let statistic = empirical_mmd2(k, idx_a, idx_b)?;
    if n_permutations == 0 {
        return Err(DriftError::arg("at least one permutation is required"));
    }
    let mut pool: Vec<usize> = idx_a.iter().chain(idx_b).copied().collect();
    let mut rng = rng_from(seed);
    let null: Vec<f64> = (0..n_permutations)
        .map(|_| {
            pool.shuffle(&mut rng);
            let (a, b) = pool.split_at(idx_a.len());
            mmd2_unchecked(k.values(), a, b)
        })
        .collect();
    let exceed = null.iter().filter(|&&v| v >= statistic).count();
    Ok(PermutationTest {
        statistic,
        p_value: (1 + exceed) as f64 / (1 + n_permutations) as f64,
        null,
    })
}
