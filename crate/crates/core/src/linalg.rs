//! Dense row-major matrices and a symmetric eigensolver.
//!
//! The solver reduces a symmetric matrix to tridiagonal form with Householder
//! reflections, finds eigenvalues with implicit-shift QL, and then either
//! accumulates all eigenvectors ([`symmetric_eigen`]) or recovers only the
//! requested ones by inverse iteration on the tridiagonal matrix followed by
//! back-transformation ([`smallest_eigenpairs`]). The second route avoids the
//! O(n³) vector accumulation when only a handful of eigenvectors is needed.

use std::ops::{Index, IndexMut};

use crate::error::{DriftError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(DriftError::arg("ragged rows"));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(DriftError::arg(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest `|A_ij - A_ji|`; zero for exactly symmetric matrices.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(DriftError::arg("matmul dimension mismatch"));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Eigenpairs sorted by ascending eigenvalue. `vectors[i]` belongs to `values[i]`.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Householder reduction `A = Q T Qᵀ`, with `Q` kept in factored form.
struct Tridiagonal {
    diag: Vec<f64>,
    /// `off[i] = T[i][i+1]`; the last entry is zero padding.
    off: Vec<f64>,
    reflectors: Vec<(Vec<f64>, f64)>,
}

impl Tridiagonal {
    fn reduce(a: &Matrix) -> Tridiagonal {
        let n = a.nrows();
        let mut a = a.clone();
        let mut off = vec![0.0; n];
        let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
        let mut p = vec![0.0; n];

        for k in 0..n.saturating_sub(2) {
            let m = n - k - 1;
            let mut v: Vec<f64> = (k + 1..n).map(|i| a[(i, k)]).collect();
            let xnorm = norm2(&v);
            if xnorm < f64::MIN_POSITIVE {
                off[k] = 0.0;
                reflectors.push((v, 0.0));
                continue;
            }
            // work with the column scaled to unit norm so that tau cannot overflow
            for x in v.iter_mut() {
                *x /= xnorm;
            }
            let sign = if v[0] > 0.0 { -1.0 } else { 1.0 };
            v[0] -= sign;
            let tau = 2.0 / dot(&v, &v);
            off[k] = sign * xnorm;

            // p = tau * B v over the trailing block B = A[k+1.., k+1..]
            for (r, pr) in p.iter_mut().take(m).enumerate() {
                let row = &a.row(k + 1 + r)[k + 1..];
                *pr = tau * dot(row, &v);
            }
            let kappa = 0.5 * tau * dot(&p[..m], &v);
            for (pr, vr) in p.iter_mut().take(m).zip(&v) {
                *pr -= kappa * vr;
            }
            for r in 0..m {
                let (vr, wr) = (v[r], p[r]);
                let row = &mut a.row_mut(k + 1 + r)[k + 1..];
                for ((x, vc), wc) in row.iter_mut().zip(&v).zip(&p[..m]) {
                    *x -= vr * wc + wr * vc;
                }
            }
            reflectors.push((v, tau));
        }
        if n >= 2 {
            off[n - 2] = a[(n - 1, n - 2)];
        }
        let diag = (0..n).map(|i| a[(i, i)]).collect();
        Tridiagonal {
            diag,
            off,
            reflectors,
        }
    }

    /// `y <- Q y`.
    fn apply_q(&self, y: &mut [f64]) {
        for (k, (v, tau)) in self.reflectors.iter().enumerate().rev() {
            if *tau == 0.0 {
                continue;
            }
            let tail = &mut y[k + 1..];
            let s = tau * dot(v, tail);
            for (t, vi) in tail.iter_mut().zip(v) {
                *t -= s * vi;
            }
        }
    }

    fn norm(&self) -> f64 {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
                self.diag[i].abs() + self.off[i].abs() + left
            })
            .fold(0.0, f64::max)
    }
}

fn signed(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Implicit-shift QL on a tridiagonal matrix. When `zt` is given, its rows are
/// rotated along, so that row `i` ends up as the eigenvector of `d[i]`.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], mut zt: Option<&mut Matrix>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    // absolute floor so that clusters of (near) zero eigenvalues still deflate
    let anorm = (0..n)
        .map(|i| d[i].abs() + e[i].abs() + if i > 0 { e[i - 1].abs() } else { 0.0 })
        .fold(0.0, f64::max);
    let floor = f64::EPSILON * anorm;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd || e[m].abs() <= floor {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(DriftError::Numerical(
                    "tridiagonal QL failed to converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + signed(r, g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = zt.as_deref_mut() {
                    rotate_rows(z, i, s, c);
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

fn rotate_rows(z: &mut Matrix, i: usize, s: f64, c: f64) {
    let cols = z.ncols();
    let (head, tail) = z.data.split_at_mut((i + 1) * cols);
    let zi = &mut head[i * cols..];
    let zi1 = &mut tail[..cols];
    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
        let f = *b;
        *b = s * *a + c * f;
        *a = c * *a - s * f;
    }
}

fn check_symmetric_input(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(DriftError::arg("eigensolver needs a square matrix"));
    }
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(DriftError::Numerical("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix (only the lower triangle is
/// read during the reduction, so mild asymmetry is tolerated).
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    check_symmetric_input(a)?;
    let n = a.nrows();
    let tri = Tridiagonal::reduce(a);
    let mut zt = Matrix::identity(n);
    for i in 0..n {
        tri.apply_q(zt.row_mut(i));
    }
    let mut d = tri.diag.clone();
    let mut e = tri.off.clone();
    tridiagonal_ql(&mut d, &mut e, Some(&mut zt))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    Ok(SymmetricEigen {
        values: order.iter().map(|&i| d[i]).collect(),
        vectors: order.iter().map(|&i| zt.row(i).to_vec()).collect(),
    })
}

/// Eigenvalues only, ascending.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    check_symmetric_input(a)?;
    let tri = Tridiagonal::reduce(a);
    let mut d = tri.diag.clone();
    let mut e = tri.off.clone();
    tridiagonal_ql(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// The `k` eigenpairs with the smallest eigenvalues, ascending.
pub fn smallest_eigenpairs(a: &Matrix, k: usize) -> Result<SymmetricEigen> {
    check_symmetric_input(a)?;
    let n = a.nrows();
    if k > n {
        return Err(DriftError::arg(format!(
            "requested {k} eigenpairs of a {n}x{n} matrix"
        )));
    }
    let tri = Tridiagonal::reduce(a);
    let mut d = tri.diag.clone();
    let mut e = tri.off.clone();
    tridiagonal_ql(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    let wanted = &d[..k];

    let ys = tridiagonal_inverse_iteration(&tri, wanted);
    let vectors = ys
        .into_iter()
        .map(|mut y| {
            tri.apply_q(&mut y);
            y
        })
        .collect();
    Ok(SymmetricEigen {
        values: wanted.to_vec(),
        vectors,
    })
}

/// Eigenvectors of the tridiagonal matrix for sorted eigenvalues, by inverse
/// iteration with re-orthogonalization inside clusters of close eigenvalues.
fn tridiagonal_inverse_iteration(tri: &Tridiagonal, values: &[f64]) -> Vec<Vec<f64>> {
    let n = tri.diag.len();
    let tnorm = tri.norm();
    let scale = if tnorm > 0.0 { tnorm } else { 1.0 };
    let cluster_tol = 1e-3 * scale;
    let perturb = 10.0 * f64::EPSILON * scale;

    let mut out: Vec<Vec<f64>> = Vec::with_capacity(values.len());
    let mut cluster_start = 0;
    let mut prev_shift = f64::NEG_INFINITY;
    for (j, &lambda) in values.iter().enumerate() {
        if j > 0 && lambda - values[j - 1] > cluster_tol {
            cluster_start = j;
        }
        let mut shift = lambda;
        if j > cluster_start && shift - prev_shift < perturb {
            shift = prev_shift + perturb;
        }
        prev_shift = shift;

        let lu = TridiagonalLu::factor(tri, shift, f64::EPSILON * scale);
        let mut y = start_vector(n, j as u64);
        for _ in 0..4 {
            lu.solve(&mut y);
            for prev in &out[cluster_start..j] {
                let proj = dot(prev, &y);
                for (yi, pi) in y.iter_mut().zip(prev) {
                    *yi -= proj * pi;
                }
            }
            let nrm = norm2(&y);
            if nrm == 0.0 || !nrm.is_finite() {
                y = start_vector(n, j as u64 + 1000);
                continue;
            }
            y.iter_mut().for_each(|v| *v /= nrm);
        }
        out.push(y);
    }
    out
}

fn start_vector(n: usize, salt: u64) -> Vec<f64> {
    let mut state = crate::seed::derive_seed(0x5EED, salt);
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

/// LU factorization with partial pivoting of `T - shift·I`.
struct TridiagonalLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(tri: &Tridiagonal, shift: f64, tiny: f64) -> Self {
        let n = tri.diag.len();
        let mut d: Vec<f64> = tri.diag.iter().map(|v| v - shift).collect();
        let mut dl: Vec<f64> = tri.off[..n.saturating_sub(1)].to_vec();
        let mut du = dl.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i].abs() < tiny {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if n > 0 && d[n - 1].abs() < tiny {
            d[n - 1] = tiny;
        }
        TridiagonalLu {
            dl,
            d,
            du,
            du2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        for i in (0..n).rev() {
            let mut v = b[i];
            if i + 1 < n {
                v -= self.du[i] * b[i + 1];
            }
            if i + 2 < n {
                v -= self.du2[i] * b[i + 2];
            }
            b[i] = v / self.d[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = crate::seed::rng_from(seed);
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.random_range(-1.0..1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    fn residual(a: &Matrix, value: f64, v: &[f64]) -> f64 {
        let av = a.mul_vec(v);
        av.iter()
            .zip(v)
            .map(|(x, y)| (x - value * y).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn full_decomposition_is_orthonormal_with_small_residuals() {
        for (n, seed) in [(1, 1), (2, 2), (3, 3), (17, 4), (60, 5)] {
            let a = random_symmetric(n, seed);
            let eig = symmetric_eigen(&a).unwrap();
            let fro = a.frobenius_norm();
            for i in 0..n {
                assert!(residual(&a, eig.values[i], &eig.vectors[i]) < 1e-12 * fro.max(1.0));
                for j in 0..n {
                    let g = dot(&eig.vectors[i], &eig.vectors[j]);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((g - want).abs() < 1e-12, "n={n} gram[{i}][{j}]={g}");
                }
            }
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn partial_route_matches_full_route() {
        let a = random_symmetric(80, 9);
        let full = symmetric_eigen(&a).unwrap();
        let part = smallest_eigenpairs(&a, 6).unwrap();
        for i in 0..6 {
            assert!((full.values[i] - part.values[i]).abs() < 1e-12);
            let overlap = dot(&full.vectors[i], &part.vectors[i]).abs();
            assert!((overlap - 1.0).abs() < 1e-10);
            assert!(residual(&a, part.values[i], &part.vectors[i]) < 1e-11);
        }
    }

    #[test]
    fn degenerate_spectra_still_give_orthonormal_vectors() {
        let zero = Matrix::zeros(5, 5);
        let eig = smallest_eigenpairs(&zero, 3).unwrap();
        assert!(eig.values.iter().all(|v| v.abs() < 1e-300));
        for i in 0..3 {
            for j in 0..3 {
                let g = dot(&eig.vectors[i], &eig.vectors[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-12);
            }
        }

        // identity plus a rank-one bump: eigenvalue 1 with multiplicity n-1
        let n = 30;
        let a = Matrix::from_fn(n, n, |i, j| if i == j { 2.0 } else { 1.0 });
        let eig = smallest_eigenpairs(&a, 5).unwrap();
        for i in 0..5 {
            assert!((eig.values[i] - 1.0).abs() < 1e-12);
            assert!(residual(&a, 1.0, &eig.vectors[i]) < 1e-11);
            for j in 0..i {
                assert!(dot(&eig.vectors[i], &eig.vectors[j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn low_rank_block_matrices_converge() {
        // rank 3 with 136 rows: the reduction meets columns of pure rounding noise
        let blocks = [49usize, 47, 40];
        let g = [[0.9, 0.2, -0.3], [0.2, 1.1, 0.4], [-0.3, 0.4, 0.7]];
        let owner: Vec<usize> = blocks.iter().enumerate().flat_map(|(b, &n)| vec![b; n]).collect();
        let a = Matrix::from_fn(owner.len(), owner.len(), |i, j| g[owner[i]][owner[j]]);
        let eig = symmetric_eigen(&a).unwrap();
        assert!(eig.values.iter().all(|v| v.is_finite()));
        let nonzero = eig.values.iter().filter(|v| v.abs() > 1e-8).count();
        assert_eq!(nonzero, 3);
        for (l, v) in eig.values.iter().zip(&eig.vectors) {
            let av = a.mul_vec(v);
            let res: f64 = av.iter().zip(v).map(|(x, y)| (x - l * y).powi(2)).sum::<f64>().sqrt();
            assert!(res < 1e-10);
        }
    }

    #[test]
    fn k_larger_than_n_is_rejected() {
        let a = Matrix::identity(3);
        assert!(smallest_eigenpairs(&a, 4).is_err());
    }

    #[test]
    fn non_square_is_rejected() {
        assert!(symmetric_eigen(&Matrix::zeros(2, 3)).is_err());
    }
}
