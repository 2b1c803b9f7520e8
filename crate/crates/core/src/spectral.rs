//! Graph Laplacians of kernel matrices, their smallest eigenvectors, and the
//! block structure of kernels over piecewise-constant streams.

use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::kernels::{FittedKernel, KernelConfig, KernelMatrix};
use crate::linalg::{smallest_eigenpairs, symmetric_eigen, Matrix};
use crate::streams::StreamSample;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianKind {
    /// `I - D^{-1/2} K D^{-1/2}`
    #[default]
    SymmetricNormalized,
    /// `D - K`
    Unnormalized,
    /// `I - D^{-1} K`; eigenvectors are obtained from the symmetric form.
    RandomWalk,
}

fn inverse_sqrt_degrees(k: &Matrix) -> Result<Vec<f64>> {
    (0..k.nrows())
        .map(|i| {
            let d: f64 = k.row(i).iter().sum();
            if d > 0.0 && d.is_finite() {
                Ok(1.0 / d.sqrt())
            } else {
                Err(DriftError::Numerical(format!(
                    "row {i} of the kernel matrix sums to {d}"
                )))
            }
        })
        .collect()
}

pub fn normalized_laplacian(k: &KernelMatrix) -> Result<Matrix> {
    let m = k.values();
    let dinv = inverse_sqrt_degrees(m)?;
    let n = m.nrows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = f64::from(u8::from(i == j)) - dinv[i] * m[(i, j)] * dinv[j];
            l[(i, j)] = v;
            l[(j, i)] = v;
        }
    }
    Ok(l)
}

/// The Laplacian of the requested kind. `RandomWalk` is not symmetric.
pub fn laplacian(k: &KernelMatrix, kind: LaplacianKind) -> Result<Matrix> {
    let m = k.values();
    let n = m.nrows();
    match kind {
        LaplacianKind::SymmetricNormalized => normalized_laplacian(k),
        LaplacianKind::Unnormalized => {
            let mut l = Matrix::from_fn(n, n, |i, j| -m[(i, j)]);
            for i in 0..n {
                l[(i, i)] += m.row(i).iter().sum::<f64>();
            }
            Ok(l)
        }
        LaplacianKind::RandomWalk => {
            let dinv = inverse_sqrt_degrees(m)?;
            Ok(Matrix::from_fn(n, n, |i, j| {
                f64::from(u8::from(i == j)) - dinv[i] * dinv[i] * m[(i, j)]
            }))
        }
    }
}

/// The `k` eigenvectors of a Laplacian with the smallest eigenvalues.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenBasis {
    /// `n x k`; column `j` belongs to `eigenvalues[j]`.
    pub vectors: Matrix,
    pub eigenvalues: Vec<f64>,
    pub window_times: Vec<usize>,
}

impl EigenBasis {
    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Row `i` is the embedding of the sample that arrived at `window_times[i]`.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.vectors.row(i))
    }

    /// `time,v0,v1,...` with one line per window sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for j in 0..self.k() {
            out.push_str(&format!(",v{j}"));
        }
        out.push('\n');
        for (t, row) in self.window_times.iter().zip(self.rows()) {
            out.push_str(&t.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Flips `v` so that its first entry that is not round-off is positive.
fn orient(v: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-10 * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Smallest-eigenvalue eigenpairs of a symmetric Laplacian, ascending, with
/// each vector oriented so its first nonzero entry is positive.
pub fn smallest_eigenvectors(l: &Matrix, k: usize, window_times: &[usize]) -> Result<EigenBasis> {
    let n = l.nrows();
    if k == 0 || k > n {
        return Err(DriftError::arg(format!(
            "need 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    if window_times.len() != n {
        return Err(DriftError::arg("window_times length differs from the matrix"));
    }
    let eig = smallest_eigenpairs(l, k)?;
    let mut vectors = Matrix::zeros(n, k);
    for (j, mut v) in eig.vectors.into_iter().enumerate() {
        orient(&mut v);
        for (i, x) in v.into_iter().enumerate() {
            vectors[(i, j)] = x;
        }
    }
    Ok(EigenBasis {
        vectors,
        eigenvalues: eig.values,
        window_times: window_times.to_vec(),
    })
}

/// Laplacian eigenvectors of a kernel matrix for any [`LaplacianKind`]. For
/// the random-walk form the vectors `D^{-1/2} v` are rescaled to unit length,
/// so they are not orthonormal.
pub fn spectral_embedding(k: &KernelMatrix, kind: LaplacianKind, n_eigen: usize) -> Result<EigenBasis> {
    let n_eigen = n_eigen.min(k.len());
    match kind {
        LaplacianKind::SymmetricNormalized | LaplacianKind::Unnormalized => {
            let l = laplacian(k, kind)?;
            smallest_eigenvectors(&l, n_eigen, k.window_times())
        }
        LaplacianKind::RandomWalk => {
            let dinv = inverse_sqrt_degrees(k.values())?;
            let mut basis = smallest_eigenvectors(&normalized_laplacian(k)?, n_eigen, k.window_times())?;
            for j in 0..basis.k() {
                let mut col: Vec<f64> = (0..basis.len()).map(|i| basis.vectors[(i, j)] * dinv[i]).collect();
                let norm = crate::linalg::norm2(&col);
                col.iter_mut().for_each(|x| *x /= norm);
                orient(&mut col);
                for (i, x) in col.into_iter().enumerate() {
                    basis.vectors[(i, j)] = x;
                }
            }
            Ok(basis)
        }
    }
}

/// Kernel over a stream whose concept is constant on consecutive blocks:
/// `K[t][s] = reduced[b(t)][b(s)]`, with block `i` holding `block_sizes[i]`
/// time steps.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockAutoCorrelation {
    pub reduced: Matrix,
    pub block_sizes: Vec<usize>,
}

impl BlockAutoCorrelation {
    pub fn from_reduced(reduced: Matrix, block_sizes: Vec<usize>) -> Result<Self> {
        if !reduced.is_square() || reduced.nrows() != block_sizes.len() || block_sizes.is_empty() {
            return Err(DriftError::arg("reduced matrix must be m x m for m blocks"));
        }
        if block_sizes.contains(&0) {
            return Err(DriftError::arg("empty block"));
        }
        Ok(BlockAutoCorrelation {
            reduced,
            block_sizes,
        })
    }

    pub fn n_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn grid_len(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// Block index of every grid position.
    pub fn assignment(&self) -> Vec<usize> {
        self.block_sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &n)| std::iter::repeat_n(b, n))
            .collect()
    }

    /// The piecewise-constant kernel on the full grid.
    pub fn expand(&self) -> Matrix {
        let a = self.assignment();
        let n = a.len();
        Matrix::from_fn(n, n, |t, s| self.reduced[(a[t], a[s])])
    }

    /// `N^{1/2} reduced N^{1/2}` with `N = diag(block_sizes)`.
    pub fn weighted_reduced(&self) -> Matrix {
        let m = self.n_blocks();
        let s: Vec<f64> = self.block_sizes.iter().map(|&n| (n as f64).sqrt()).collect();
        Matrix::from_fn(m, m, |i, j| s[i] * self.reduced[(i, j)] * s[j])
    }

    /// Compares the spectrum and eigenvectors of the expanded matrix with the
    /// size-weighted reduced matrix.
    pub fn check_spectrum(&self) -> Result<BlockSpectrumCheck> {
        let full = symmetric_eigen(&self.expand())?;
        let small = symmetric_eigen(&self.weighted_reduced())?;
        let n = self.grid_len();

        let mut predicted = small.values.clone();
        predicted.resize(n, 0.0);
        predicted.sort_by(f64::total_cmp);
        let eigenvalue_gap = predicted
            .iter()
            .zip(&full.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);

        // Vectors of eigenvalues clearly away from zero lie in the range of the
        // block indicator matrix and must be constant on every block.
        let scale = full.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let assignment = self.assignment();
        let mut block_deviation = 0.0f64;
        let mut checked = 0;
        for (lambda, v) in full.values.iter().zip(&full.vectors) {
            if lambda.abs() <= 1e-6 * scale {
                continue;
            }
            checked += 1;
            let mut sums = vec![0.0; self.n_blocks()];
            for (x, &b) in v.iter().zip(&assignment) {
                sums[b] += x;
            }
            for (x, &b) in v.iter().zip(&assignment) {
                let mean = sums[b] / self.block_sizes[b] as f64;
                block_deviation = block_deviation.max((x - mean).abs());
            }
        }
        Ok(BlockSpectrumCheck {
            eigenvalue_gap,
            block_deviation,
            nonzero_eigenpairs: checked,
            reduced_eigenvalues: small.values,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSpectrumCheck {
    /// Largest gap between the expanded spectrum and the reduced spectrum padded with zeros.
    pub eigenvalue_gap: f64,
    /// Largest within-block deviation of an eigenvector with nonzero eigenvalue.
    pub block_deviation: f64,
    pub nonzero_eigenpairs: usize,
    pub reduced_eigenvalues: Vec<f64>,
}

impl BlockSpectrumCheck {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.eigenvalue_gap <= tolerance && self.block_deviation <= tolerance
    }
}

/// Estimates the reduced kernel from concept pools: entry `(i, j)` is the mean
/// kernel value between pools `i` and `j`. Block `i` spans
/// `[change_points[i-1], change_points[i])` on the grid `0..grid_len`.
pub fn block_auto_correlation(
    change_points: &[usize],
    pools: &[Vec<Vec<f64>>],
    kernel: &KernelConfig,
    grid_len: usize,
) -> Result<BlockAutoCorrelation> {
    if pools.is_empty() {
        return Err(DriftError::arg("at least one concept pool is required"));
    }
    if pools.iter().any(Vec::is_empty) {
        return Err(DriftError::arg("empty concept pool"));
    }
    if pools.len() != change_points.len() + 1 {
        return Err(DriftError::arg(format!(
            "{} change points need {} pools, got {}",
            change_points.len(),
            change_points.len() + 1,
            pools.len()
        )));
    }
    let mut bounds = vec![0];
    bounds.extend_from_slice(change_points);
    bounds.push(grid_len);
    if bounds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DriftError::arg(
            "change points must be increasing and inside (0, grid_len)",
        ));
    }
    let block_sizes = bounds.windows(2).map(|w| w[1] - w[0]).collect();

    let pooled: Vec<StreamSample> = pools
        .iter()
        .flatten()
        .enumerate()
        .map(|(t, x)| StreamSample::new(t, x.clone()))
        .collect();
    let fitted = FittedKernel::fit(&pooled, kernel)?;
    let m = pools.len();
    let mut reduced = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = fitted.mean_cross(&pools[i], &pools[j])?;
            reduced[(i, j)] = v;
            reduced[(j, i)] = v;
        }
    }
    BlockAutoCorrelation::from_reduced(reduced, block_sizes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, norm2, symmetric_eigenvalues};
    use crate::seed::rng_from;
    use rand::Rng;

    fn km(m: Matrix) -> KernelMatrix {
        let n = m.nrows();
        KernelMatrix::new(m, (0..n).collect()).unwrap()
    }

    fn random_psd(n: usize, seed: u64) -> Matrix {
        let mut rng = rng_from(seed);
        let a = Matrix::from_fn(n, n, |_, _| rng.random::<f64>());
        a.matmul(&a.transpose()).unwrap()
    }

    #[test]
    fn identity_kernel_gives_zero_laplacian() {
        let l = normalized_laplacian(&km(Matrix::identity(3))).unwrap();
        assert!(l.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn all_ones_kernel() {
        let l = normalized_laplacian(&km(Matrix::from_fn(4, 4, |_, _| 1.0))).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 0.75 } else { -0.25 };
                assert!((l[(i, j)] - expect).abs() < 1e-15);
            }
        }
        let ev = symmetric_eigenvalues(&l).unwrap();
        for (v, e) in ev.iter().zip([0.0, 1.0, 1.0, 1.0]) {
            assert!((v - e).abs() < 1e-12);
        }
        let basis = smallest_eigenvectors(&l, 1, &[0, 1, 2, 3]).unwrap();
        assert!(basis.eigenvalues[0].abs() < 1e-12);
        for i in 0..4 {
            assert!((basis.vectors[(i, 0)] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_of_random_psd_is_symmetric() {
        let l = normalized_laplacian(&km(random_psd(40, 1))).unwrap();
        assert!(l.max_asymmetry() < 1e-12);
    }

    #[test]
    fn nonpositive_degree_is_a_numerical_error() {
        let m = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            normalized_laplacian(&km(m)),
            Err(DriftError::Numerical(_))
        ));
    }

    #[test]
    fn degenerate_zero_laplacian_basis_is_orthonormal() {
        let basis = smallest_eigenvectors(&Matrix::zeros(5, 5), 2, &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(basis.eigenvalues, vec![0.0, 0.0]);
        let c0 = basis.vectors.column(0);
        let c1 = basis.vectors.column(1);
        assert!((norm2(&c0) - 1.0).abs() < 1e-8 && (norm2(&c1) - 1.0).abs() < 1e-8);
        assert!(dot(&c0, &c1).abs() < 1e-8);
        assert!(smallest_eigenvectors(&Matrix::zeros(5, 5), 6, &[0, 1, 2, 3, 4]).is_err());
    }

    #[test]
    fn eigenpair_invariants_on_a_kernel_laplacian() {
        let l = normalized_laplacian(&km(random_psd(60, 7))).unwrap();
        let times: Vec<usize> = (100..160).collect();
        let basis = smallest_eigenvectors(&l, 5, &times).unwrap();
        let fro = l.frobenius_norm();
        for j in 0..5 {
            let v = basis.vectors.column(j);
            let lv = l.mul_vec(&v);
            let res: f64 = lv
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - basis.eigenvalues[j] * b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res <= 1e-8 * fro);
            assert!((-1e-12..=2.0 + 1e-12).contains(&basis.eigenvalues[j]));
            let first = v.iter().find(|x| x.abs() > 1e-10).unwrap();
            assert!(*first > 0.0);
            for i in 0..j {
                assert!(dot(&v, &basis.vectors.column(i)).abs() < 1e-8);
            }
        }
        assert!(basis.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        // all-positive kernel: a single zero eigenvalue
        assert!(basis.eigenvalues[0].abs() < 1e-8);
        assert!(basis.eigenvalues[1] > 1e-8);
        assert!(basis.to_csv().starts_with("t,v0,v1,v2,v3,v4\n100,"));
    }

    #[test]
    fn block_kernel_eigenvectors_are_blockwise_constant() {
        let reduced = Matrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let block = BlockAutoCorrelation::from_reduced(reduced, vec![3, 5]).unwrap();
        let k = km(block.expand());
        let l = normalized_laplacian(&k).unwrap();
        let basis = smallest_eigenvectors(&l, 2, k.window_times()).unwrap();
        for j in 0..2 {
            let v = basis.vectors.column(j);
            for blk in [&v[..3], &v[3..]] {
                assert!(blk.iter().all(|x| (x - blk[0]).abs() < 1e-8));
            }
        }
    }

    #[test]
    fn block_spectrum_coincides_with_weighted_reduced() {
        let mut rng = rng_from(3);
        for m in 1..=4 {
            let a = Matrix::from_fn(m, m, |_, _| rng.random::<f64>());
            let mut reduced = a.matmul(&a.transpose()).unwrap();
            for i in 0..m {
                reduced[(i, i)] += 0.1;
            }
            let sizes = (0..m).map(|_| rng.random_range(3..=50)).collect();
            let check = BlockAutoCorrelation::from_reduced(reduced, sizes)
                .unwrap()
                .check_spectrum()
                .unwrap();
            assert!(check.passes(1e-8), "{check:?}");
            assert_eq!(check.nonzero_eigenpairs, m);
        }
    }

    #[test]
    fn single_concept_expands_to_constant() {
        let pool = vec![vec![0.0], vec![1.0]];
        let block = block_auto_correlation(&[], &[pool], &KernelConfig::rbf(1.0), 6).unwrap();
        assert_eq!(block.n_blocks(), 1);
        let v = block.reduced[(0, 0)];
        assert!(block.expand().as_slice().iter().all(|&x| x == v));
        // mean over {0,1}²: (1 + e^{-1} + e^{-1} + 1) / 4
        assert!((v - (2.0 + 2.0 * (-1.0f64).exp()) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn discrete_concepts_match_hand_computation() {
        // pools enumerate their finite supports with multiplicity
        let a = vec![vec![0.0], vec![0.0], vec![1.0]];
        let b = vec![vec![1.0], vec![2.0]];
        let gamma = 0.5;
        let k = |x: f64, y: f64| (-gamma * (x - y) * (x - y)).exp();
        let aa = (4.0 * k(0.0, 0.0) + 4.0 * k(0.0, 1.0) + k(1.0, 1.0)) / 9.0;
        let ab = (2.0 * k(0.0, 1.0) + 2.0 * k(0.0, 2.0) + k(1.0, 1.0) + k(1.0, 2.0)) / 6.0;
        let bb = (2.0 * k(1.0, 1.0) + 2.0 * k(1.0, 2.0)) / 4.0;
        let block =
            block_auto_correlation(&[10], &[a, b], &KernelConfig::rbf(gamma), 30).unwrap();
        assert_eq!(block.block_sizes, vec![10, 20]);
        assert!((block.reduced[(0, 0)] - aa).abs() < 1e-12);
        assert!((block.reduced[(0, 1)] - ab).abs() < 1e-12);
        assert!((block.reduced[(1, 1)] - bb).abs() < 1e-12);
        assert!(block.check_spectrum().unwrap().passes(1e-8));
    }

    #[test]
    fn block_inputs_are_validated() {
        let cfg = KernelConfig::rbf(1.0);
        assert!(block_auto_correlation(&[], &[], &cfg, 5).is_err());
        assert!(block_auto_correlation(&[2], &[vec![vec![0.0]], vec![]], &cfg, 5).is_err());
        assert!(block_auto_correlation(&[7], &[vec![vec![0.0]], vec![vec![1.0]]], &cfg, 5).is_err());
    }
}
