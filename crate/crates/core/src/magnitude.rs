//! Drift magnitude between adjacent windows and its predicted shape.
//!
//! A weighting scheme assigns a weight `w_d` to the `d`-th of the last `m`
//! samples; the squared magnitude at position `t` (after `t` samples) is the
//! RKHS norm `‖Σ_d w_d φ(x_{t-m+d})‖²`. For an abrupt change at `t0` between
//! concepts whose mean embeddings are `a` apart, the expected magnitude is
//! `a·|W(t - t0)|` with `W` the tail sum of the weights. For two sliding
//! windows of length `l` that is a hat rising from `t0` to `a` at `t0 + l`
//! and back to zero at `t0 + 2l`.

use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::kernels::{mmd2_unchecked, FittedKernel, KernelConfig};
use crate::linalg::{dot, symmetric_eigen, Matrix};
use crate::seed::{derive_seed, rng_from};
use crate::streams::StreamSample;

/// Permutations used to estimate the within-concept noise floor.
pub const NOISE_PERMUTATIONS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightingScheme {
    /// Mean of the last `l` samples minus the mean of the `l` before them.
    TwoSlidingWindows { l: usize },
    /// Arbitrary weights, oldest sample first.
    Custom { weights: Vec<f64> },
}

impl WeightingScheme {
    pub fn two_windows(l: usize) -> Self {
        WeightingScheme::TwoSlidingWindows { l }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WeightingScheme::TwoSlidingWindows { l } if *l == 0 => Err(DriftError::arg("window length must be positive")),
            WeightingScheme::Custom { weights } if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) => {
                Err(DriftError::arg("weights must be non-empty and finite"))
            }
            _ => Ok(()),
        }
    }

    /// Number of trailing samples the scheme looks at.
    pub fn span(&self) -> usize {
        match self {
            WeightingScheme::TwoSlidingWindows { l } => 2 * l,
            WeightingScheme::Custom { weights } => weights.len(),
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        match self {
            WeightingScheme::TwoSlidingWindows { l } => {
                let v = 1.0 / *l as f64;
                (0..2 * l).map(|d| if d < *l { -v } else { v }).collect()
            }
            WeightingScheme::Custom { weights } => weights.clone(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.weights().iter().sum()
    }

    /// `W(u)`: total weight on samples at or after a change `u` positions ago.
    pub fn antiderivative(&self, u: i64) -> f64 {
        let m = self.span() as i64;
        if u <= 0 {
            return 0.0;
        }
        match self {
            WeightingScheme::TwoSlidingWindows { l } => {
                let l = *l as i64;
                (u.min(l) - (u - l).clamp(0, l)) as f64 / l as f64
            }
            WeightingScheme::Custom { weights } => weights[(m - u).max(0) as usize..].iter().sum(),
        }
    }
}

/// Kernel values `k(x_i, x_j)` for `0 <= j - i < width`.
struct KernelBand {
    width: usize,
    values: Vec<f64>,
}

impl KernelBand {
    fn new(kernel: &FittedKernel, points: &[&[f64]], width: usize) -> Result<Self> {
        let n = points.len();
        let mut values = vec![0.0; n * width];
        for i in 0..n {
            for d in 0..width.min(n - i) {
                values[i * width + d] = kernel.eval(points[i], points[i + d])?;
            }
        }
        Ok(KernelBand { width, values })
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        debug_assert!(b - a < self.width);
        self.values[a * self.width + b - a]
    }

    /// `Σ_{i,j ∈ [s, s+len)} k(x_i, x_j)` for every start `s`, slid one sample at a time.
    fn window_sums(&self, n: usize, len: usize) -> Vec<f64> {
        if len > n {
            return Vec::new();
        }
        let row = |i: usize, s: usize| -> f64 { (s..s + len).map(|j| self.get(i, j)).sum() };
        let mut sums = Vec::with_capacity(n - len + 1);
        let mut cur: f64 = (0..len).map(|i| row(i, 0)).sum();
        sums.push(cur);
        for s in 1..=n - len {
            // drop sample s-1, then add sample s+len-1
            cur -= 2.0 * row(s - 1, s - 1) - self.get(s - 1, s - 1);
            cur += 2.0 * row(s + len - 1, s) - self.get(s + len - 1, s + len - 1);
            sums.push(cur);
        }
        sums
    }
}

/// Squared magnitudes `σ²(t)` for `t = span..=n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeProfile {
    /// Number of samples seen; the statistic uses samples `[t - span, t)`.
    pub positions: Vec<usize>,
    pub squared: Vec<f64>,
}

impl MagnitudeProfile {
    /// `sqrt(max(σ² - floor, 0))` per position.
    pub fn magnitudes(&self, floor: f64) -> Vec<f64> {
        self.squared.iter().map(|s| (s - floor).max(0.0).sqrt()).collect()
    }
}

fn points(stream: &[StreamSample]) -> Vec<&[f64]> {
    stream.iter().map(|s| s.features.as_slice()).collect()
}

fn profile_with(kernel: &FittedKernel, pts: &[&[f64]], scheme: &WeightingScheme) -> Result<MagnitudeProfile> {
    scheme.validate()?;
    let n = pts.len();
    let m = scheme.span();
    if n < m {
        return Err(DriftError::arg(format!("stream of {n} samples is shorter than the span {m}")));
    }
    let band = KernelBand::new(kernel, pts, m)?;
    let positions: Vec<usize> = (m..=n).collect();
    let squared = match scheme {
        WeightingScheme::TwoSlidingWindows { l } => {
            let l = *l;
            let single = band.window_sums(n, l);
            let double = band.window_sums(n, 2 * l);
            let l2 = (l * l) as f64;
            positions
                .iter()
                .map(|&t| {
                    let (a, b, ab) = (single[t - 2 * l], single[t - l], double[t - 2 * l]);
                    let cross = 0.5 * (ab - a - b);
                    ((a + b - 2.0 * cross) / l2).max(0.0)
                })
                .collect()
        }
        WeightingScheme::Custom { weights } => positions
            .iter()
            .map(|&t| {
                let s = t - m;
                let mut q = 0.0;
                for (d, wd) in weights.iter().enumerate() {
                    for (e, we) in weights.iter().enumerate() {
                        q += wd * we * band.get(s + d, s + e);
                    }
                }
                q.max(0.0)
            })
            .collect(),
    };
    Ok(MagnitudeProfile { positions, squared })
}

/// Squared magnitude at every position, with the kernel fitted on the whole stream.
pub fn magnitude_profile(
    stream: &[StreamSample],
    scheme: &WeightingScheme,
    kernel: &KernelConfig,
) -> Result<MagnitudeProfile> {
    let fitted = FittedKernel::fit(stream, kernel)?;
    profile_with(&fitted, &points(stream), scheme)
}

/// MMD between samples `[t-2l, t-l)` and `[t-l, t)`, square-rooted. The kernel
/// is fitted on the whole stream.
pub fn drift_magnitude(stream: &[StreamSample], l: usize, kernel: &KernelConfig, t: usize) -> Result<f64> {
    if l == 0 {
        return Err(DriftError::arg("window length must be positive"));
    }
    if t < 2 * l || t > stream.len() {
        return Err(DriftError::arg(format!(
            "position {t} needs 2l = {} samples of history within {} samples",
            2 * l,
            stream.len()
        )));
    }
    let fitted = FittedKernel::fit(stream, kernel)?;
    let window = points(&stream[t - 2 * l..t]);
    let g = fitted.gram(&window)?;
    let a: Vec<usize> = (0..l).collect();
    let b: Vec<usize> = (l..2 * l).collect();
    Ok(mmd2_unchecked(&g, &a, &b).sqrt())
}

/// Mean two-window statistic over random splits of `2l` samples drawn from
/// inside single segments. Segments shorter than `2l` are skipped.
fn noise_floor(
    kernel: &FittedKernel,
    pts: &[&[f64]],
    segments: &[(usize, usize)],
    l: usize,
    n_perm: usize,
    seed: u64,
) -> Result<f64> {
    let usable: Vec<&(usize, usize)> = segments.iter().filter(|(a, b)| b - a >= 2 * l).collect();
    if usable.is_empty() || n_perm == 0 {
        return Ok(0.0);
    }
    let mut rng = rng_from(derive_seed(seed, 0xf100));
    let a: Vec<usize> = (0..l).collect();
    let b: Vec<usize> = (l..2 * l).collect();
    let mut total = 0.0;
    for p in 0..n_perm {
        let &(start, end) = usable[p % usable.len()];
        let idx = sample(&mut rng, end - start, 2 * l);
        let chosen: Vec<&[f64]> = idx.iter().map(|i| pts[start + i]).collect();
        total += mmd2_unchecked(&kernel.gram(&chosen)?, &a, &b);
    }
    Ok(total / n_perm as f64)
}

/// `n` samples from `N(0, I)` followed by `n` from `N(shift·1, I)`; the change is at position `n`.
pub fn gaussian_shift_stream(n: usize, dim: usize, shift: f64, seed: u64) -> Vec<StreamSample> {
    let mut rng = rng_from(seed);
    (0..2 * n)
        .map(|i| {
            let mean = if i < n { 0.0 } else { shift };
            let x = (0..dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mean + z
                })
                .collect();
            StreamSample::new(i, x)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapePrediction {
    pub change_points: Vec<usize>,
    /// Kernel mean distance between the concepts on either side of each change point.
    pub amplitudes: Vec<f64>,
    pub l: usize,
}

impl ShapePrediction {
    /// Predicted magnitude after `t` samples.
    pub fn at(&self, t: usize) -> f64 {
        let scheme = WeightingScheme::two_windows(self.l);
        self.change_points
            .iter()
            .zip(&self.amplitudes)
            .map(|(&c, &a)| a * scheme.antiderivative(t as i64 - c as i64).abs())
            .sum()
    }

    pub fn profile(&self, positions: &[usize]) -> Vec<f64> {
        positions.iter().map(|&t| self.at(t)).collect()
    }
}

fn check_separation(change_points: &[usize], l: usize) -> Result<()> {
    if l == 0 {
        return Err(DriftError::arg("window length must be positive"));
    }
    if let Some(w) = change_points.windows(2).find(|w| w[1] <= w[0] + 2 * l) {
        return Err(DriftError::precondition(format!(
            "change points {} and {} are not more than 2l = {} apart",
            w[0],
            w[1],
            2 * l
        )));
    }
    Ok(())
}

fn amplitudes(kernel: &FittedKernel, pools: &[Vec<Vec<f64>>]) -> Result<Vec<f64>> {
    let self_means = pools
        .iter()
        .map(|p| kernel.mean_cross(p, p))
        .collect::<Result<Vec<_>>>()?;
    pools
        .windows(2)
        .zip(self_means.windows(2))
        .map(|(p, s)| {
            let cross = kernel.mean_cross(&p[0], &p[1])?;
            Ok((s[0] + s[1] - 2.0 * cross).max(0.0).sqrt())
        })
        .collect()
}

/// Predicted two-window profile; `pools[j]` holds samples of the concept
/// active after `change_points[j-1]`.
pub fn predict_shape(
    change_points: &[usize],
    pools: &[Vec<Vec<f64>>],
    kernel: &KernelConfig,
    l: usize,
) -> Result<ShapePrediction> {
    check_separation(change_points, l)?;
    if pools.len() != change_points.len() + 1 || pools.iter().any(Vec::is_empty) {
        return Err(DriftError::arg(format!(
            "{} change points need {} non-empty pools",
            change_points.len(),
            change_points.len() + 1
        )));
    }
    let amplitudes = if change_points.is_empty() {
        Vec::new()
    } else {
        let pooled: Vec<StreamSample> = pools
            .iter()
            .flatten()
            .enumerate()
            .map(|(t, x)| StreamSample::new(t, x.clone()))
            .collect();
        self::amplitudes(&FittedKernel::fit(&pooled, kernel)?, pools)?
    };
    Ok(ShapePrediction {
        change_points: change_points.to_vec(),
        amplitudes,
        l,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub l: usize,
    pub noise_floor: f64,
    pub sup_deviation: f64,
    pub peak_amplitude: f64,
    /// `sup_deviation / peak_amplitude`, or the plain deviation when nothing is predicted.
    pub relative_deviation: f64,
    /// Position of the empirical maximum inside each change point's support.
    pub empirical_peaks: Vec<usize>,
    pub predicted_peaks: Vec<usize>,
    pub positions: Vec<usize>,
    pub empirical: Vec<f64>,
    pub predicted: Vec<f64>,
}

impl ShapeReport {
    pub fn peak_errors(&self) -> Vec<usize> {
        self.empirical_peaks
            .iter()
            .zip(&self.predicted_peaks)
            .map(|(a, b)| a.abs_diff(*b))
            .collect()
    }
}

/// Compares the empirical two-window profile of a stream with its prediction.
///
/// `change_points` are sample positions. Concept pools for the amplitudes are
/// the stream segments between change points, and the noise floor is
/// estimated from [`NOISE_PERMUTATIONS`] random splits inside those segments
/// and subtracted from the squared profile.
pub fn verify_shape(
    stream: &[StreamSample],
    change_points: &[usize],
    kernel: &KernelConfig,
    l: usize,
    seed: u64,
) -> Result<ShapeReport> {
    check_separation(change_points, l)?;
    let n = stream.len();
    if change_points.iter().any(|&c| c == 0 || c >= n) {
        return Err(DriftError::arg("change points must lie inside the stream"));
    }
    let fitted = FittedKernel::fit(stream, &kernel.with_seed(seed))?;
    let pts = points(stream);

    let mut bounds = vec![0];
    bounds.extend_from_slice(change_points);
    bounds.push(n);
    let segments: Vec<(usize, usize)> = bounds.windows(2).map(|w| (w[0], w[1])).collect();
    let pools: Vec<Vec<Vec<f64>>> = segments
        .iter()
        .map(|&(a, b)| stream[a..b].iter().map(|s| s.features.clone()).collect())
        .collect();

    let profile = profile_with(&fitted, &pts, &WeightingScheme::two_windows(l))?;
    let floor = noise_floor(&fitted, &pts, &segments, l, NOISE_PERMUTATIONS, seed)?;
    let empirical = profile.magnitudes(floor);
    let prediction = ShapePrediction {
        change_points: change_points.to_vec(),
        amplitudes: amplitudes(&fitted, &pools)?,
        l,
    };
    let predicted = prediction.profile(&profile.positions);

    let sup_deviation = empirical
        .iter()
        .zip(&predicted)
        .map(|(e, p)| (e - p).abs())
        .fold(0.0, f64::max);
    let peak_amplitude = predicted.iter().copied().fold(0.0, f64::max);
    let relative_deviation = if peak_amplitude > 0.0 {
        sup_deviation / peak_amplitude
    } else {
        sup_deviation
    };

    let first = profile.positions[0];
    let mut empirical_peaks = Vec::new();
    let mut predicted_peaks = Vec::new();
    for &c in change_points {
        let lo = c.max(first);
        let hi = (c + 2 * l).min(n);
        if lo > hi {
            continue;
        }
        let mut best = lo;
        for t in lo..=hi {
            if empirical[t - first] > empirical[best - first] {
                best = t;
            }
        }
        empirical_peaks.push(best);
        predicted_peaks.push(c + l);
    }

    Ok(ShapeReport {
        l,
        noise_floor: floor,
        sup_deviation,
        peak_amplitude,
        relative_deviation,
        empirical_peaks,
        predicted_peaks,
        positions: profile.positions,
        empirical,
        predicted,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedIdentity {
    /// `wᵀKw`.
    pub lhs: f64,
    /// `Σ λᵢ (vᵢᵀw)²` over the eigenpairs of `K`.
    pub rhs: f64,
    pub gap: f64,
}

/// Evaluates the quadratic form `wᵀKw` directly and through the eigen-expansion of `K`.
pub fn check_weighted_identity(k: &Matrix, w: &[f64]) -> Result<WeightedIdentity> {
    if !k.is_square() || k.nrows() != w.len() {
        return Err(DriftError::arg(format!(
            "weight vector of length {} does not match a {}x{} matrix",
            w.len(),
            k.nrows(),
            k.ncols()
        )));
    }
    let lhs = k.quadratic_form(w);
    let eig = symmetric_eigen(k)?;
    let rhs = eig
        .values
        .iter()
        .zip(&eig.vectors)
        .map(|(l, v)| l * dot(v, w).powi(2))
        .sum();
    Ok(WeightedIdentity {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{compute_kernel_matrix, empirical_mmd2};
    use crate::streams::samples_from_features;
    use rand::Rng;

    fn gaussian_stream(sizes: &[(usize, f64)], dim: usize, seed: u64) -> Vec<StreamSample> {
        let mut rng = rng_from(seed);
        let mut out = Vec::new();
        for &(n, mean) in sizes {
            for _ in 0..n {
                out.push(
                    (0..dim)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            mean + z
                        })
                        .collect::<Vec<f64>>(),
                );
            }
        }
        samples_from_features(out)
    }

    #[test]
    fn two_window_antiderivative_is_a_hat() {
        let s = WeightingScheme::two_windows(10);
        let tail = WeightingScheme::Custom { weights: s.weights() };
        assert!(s.total_mass().abs() < 1e-12);
        for u in -5i64..30 {
            let hat = if u <= 0 || u >= 20 {
                0.0
            } else if u <= 10 {
                u as f64 / 10.0
            } else {
                (20 - u) as f64 / 10.0
            };
            assert_eq!(s.antiderivative(u), hat, "u = {u}");
            assert!((tail.antiderivative(u) - hat).abs() < 1e-12, "u = {u}");
        }
    }

    #[test]
    fn fast_profile_matches_direct_quadratic_forms() {
        let stream = gaussian_stream(&[(60, 0.0), (60, 1.5)], 3, 2);
        let kernel = KernelConfig::rbf(0.2);
        let fast = magnitude_profile(&stream, &WeightingScheme::two_windows(15), &kernel).unwrap();
        let custom = WeightingScheme::Custom {
            weights: WeightingScheme::two_windows(15).weights(),
        };
        let slow = magnitude_profile(&stream, &custom, &kernel).unwrap();
        assert_eq!(fast.positions, slow.positions);
        assert_eq!(fast.positions[0], 30);
        for (a, b) in fast.squared.iter().zip(&slow.squared) {
            assert!((a - b).abs() < 1e-10);
        }
        // and with the window MMD computed from the kernel matrix
        for &t in &[30, 64, 120] {
            let k = compute_kernel_matrix(&stream[t - 30..t], &kernel).unwrap();
            let a: Vec<usize> = (0..15).collect();
            let b: Vec<usize> = (15..30).collect();
            let direct = empirical_mmd2(&k, &a, &b).unwrap();
            assert!((fast.squared[t - 30] - direct).abs() < 1e-10);
            let m = drift_magnitude(&stream, 15, &kernel, t).unwrap();
            assert!((m - direct.sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn window_mmd_is_the_weighted_quadratic_form() {
        let stream = gaussian_stream(&[(20, 0.0), (30, 2.0)], 2, 4);
        let k = compute_kernel_matrix(&stream, &KernelConfig::rbf(0.5)).unwrap();
        let a: Vec<usize> = (0..20).collect();
        let b: Vec<usize> = (20..50).collect();
        let w: Vec<f64> = (0..50).map(|i| if i < 20 { -1.0 / 20.0 } else { 1.0 / 30.0 }).collect();
        let mmd = empirical_mmd2(&k, &a, &b).unwrap();
        assert!((k.values().quadratic_form(&w) - mmd).abs() < 1e-12);
    }

    #[test]
    fn insufficient_history() {
        let stream = gaussian_stream(&[(50, 0.0)], 2, 1);
        assert!(drift_magnitude(&stream, 10, &KernelConfig::rbf(1.0), 19).is_err());
        assert!(drift_magnitude(&stream, 10, &KernelConfig::rbf(1.0), 20).is_ok());
        assert!(drift_magnitude(&stream, 0, &KernelConfig::rbf(1.0), 20).is_err());
    }

    #[test]
    fn predictions() {
        let pools = vec![vec![vec![0.0]; 5], vec![vec![1.0]; 5], vec![vec![0.0]; 5]];
        let k = KernelConfig::rbf(1.0);
        let none = predict_shape(&[], &pools[..1], &k, 10).unwrap();
        assert!(none.profile(&(0..100).collect::<Vec<_>>()).iter().all(|&v| v == 0.0));

        let one = predict_shape(&[50], &pools[..2], &k, 10).unwrap();
        let a = (2.0 - 2.0 * (-1.0f64).exp()).sqrt();
        assert!((one.amplitudes[0] - a).abs() < 1e-12);
        assert!((one.at(60) - a).abs() < 1e-12);
        assert_eq!(one.at(50), 0.0);
        assert_eq!(one.at(70), 0.0);
        assert!((one.at(55) - a / 2.0).abs() < 1e-12);

        let two = predict_shape(&[50, 80], &pools, &k, 10).unwrap();
        for t in 0..200 {
            let v = two.at(t);
            let inside = (50..=70).contains(&t) || (80..=100).contains(&t);
            assert!(inside || v == 0.0, "t = {t}");
            assert!(!(v > 0.0 && (50..=70).contains(&t) && (80..=100).contains(&t)));
        }
        assert!(matches!(
            predict_shape(&[50, 70], &pools, &k, 10),
            Err(DriftError::Precondition(_))
        ));
    }

    #[test]
    fn shape_follows_the_hat() {
        let stream = gaussian_stream(&[(600, 0.0), (600, 3.0)], 2, 9);
        let r = verify_shape(&stream, &[600], &KernelConfig::rbf_median(), 60, 1).unwrap();
        assert!(r.relative_deviation < 0.3, "{}", r.relative_deviation);
        assert!(r.noise_floor > 0.0);
        assert!(r.peak_errors()[0] <= 10, "{:?}", r.empirical_peaks);
        // left and right half masses of the bump agree
        let c = 660 - r.positions[0];
        let left: f64 = r.empirical[c - 60..c].iter().sum();
        let right: f64 = r.empirical[c + 1..=c + 60].iter().sum();
        assert!((left - right).abs() < 0.1 * (left + right), "{left} vs {right}");
    }

    #[test]
    fn zero_drift_reports_the_floor() {
        let stream = gaussian_stream(&[(400, 0.0)], 2, 3);
        let r = verify_shape(&stream, &[], &KernelConfig::rbf_median(), 50, 1).unwrap();
        assert_eq!(r.peak_amplitude, 0.0);
        assert_eq!(r.relative_deviation, r.sup_deviation);
        assert!(r.empirical_peaks.is_empty());
    }

    #[test]
    fn close_change_points_are_rejected() {
        let stream = gaussian_stream(&[(100, 0.0), (50, 2.0), (100, 0.0)], 2, 3);
        assert!(matches!(
            verify_shape(&stream, &[100, 150], &KernelConfig::rbf_median(), 30, 1),
            Err(DriftError::Precondition(_))
        ));
    }

    #[test]
    fn stationary_profile_stays_under_the_permutation_quantile() {
        let stream = gaussian_stream(&[(3000, 0.0)], 2, 21);
        let l = 25;
        let kernel = KernelConfig::rbf_median();
        let fitted = FittedKernel::fit(&stream, &kernel).unwrap();
        let pts = points(&stream);
        let profile = profile_with(&fitted, &pts, &WeightingScheme::two_windows(l)).unwrap();
        let mut rng = rng_from(5);
        let a: Vec<usize> = (0..l).collect();
        let b: Vec<usize> = (l..2 * l).collect();
        let mut null: Vec<f64> = (0..400)
            .map(|_| {
                let idx = sample(&mut rng, pts.len(), 2 * l);
                let chosen: Vec<&[f64]> = idx.iter().map(|i| pts[i]).collect();
                mmd2_unchecked(&fitted.gram(&chosen).unwrap(), &a, &b)
            })
            .collect();
        null.sort_by(f64::total_cmp);
        let q95 = null[(0.95 * null.len() as f64) as usize];
        let vals: Vec<f64> = profile.squared.iter().step_by(2 * l).copied().collect();
        let below = vals.iter().filter(|&&v| v <= q95).count() as f64 / vals.len() as f64;
        let se = (0.05f64 * 0.95 / vals.len() as f64).sqrt();
        assert!(below >= 0.95 - 2.0 * se, "{below}");
    }

    #[test]
    fn weighted_identity() {
        let mut rng = rng_from(8);
        let n = 40;
        let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let k = a.matmul(&a.transpose()).unwrap();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = check_weighted_identity(&k, &w).unwrap();
        assert!(r.gap <= 1e-10 * k.frobenius_norm() * dot(&w, &w));

        let zero = check_weighted_identity(&k, &vec![0.0; n]).unwrap();
        assert_eq!((zero.lhs, zero.gap), (0.0, 0.0));
        assert!(zero.rhs.abs() < 1e-300);

        let eig = symmetric_eigen(&k).unwrap();
        let r = check_weighted_identity(&k, &eig.vectors[7]).unwrap();
        assert!((r.lhs - eig.values[7]).abs() < 1e-9 && (r.rhs - eig.values[7]).abs() < 1e-9);

        assert!(check_weighted_identity(&k, &w[..5]).is_err());
    }
}
