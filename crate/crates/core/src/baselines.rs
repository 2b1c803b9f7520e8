//! Two-window baseline detectors: a feature-wise Kolmogorov–Smirnov test
//! (KS-Win) and a kernel two-sample test on the MMD (MMDDDM).
//!
//! Both compare the windows `[t - 2l, t - l)` and `[t - l, t)` at every
//! `stride`-th position `t`, alert at `t`, and then stay silent for a
//! refractory span.

use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::kernels::{mmd2_permutation_test, FittedKernel, KernelConfig, KernelMatrix};
use crate::linalg::Matrix;
use crate::seed::derive_seed;
use crate::streams::StreamSample;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Length `l` of each of the two compared windows.
    pub window: usize,
    pub alpha: f64,
    pub n_permutations: usize,
    /// Divide `alpha` by the number of features in KS-Win.
    pub bonferroni: bool,
    pub kernel: KernelConfig,
    pub stride: usize,
    /// Samples to skip after an alert; `None` means `2 * window`.
    pub refractory: Option<usize>,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            window: 100,
            alpha: 0.01,
            n_permutations: 200,
            bonferroni: true,
            kernel: KernelConfig::rbf_median(),
            stride: 1,
            refractory: None,
            seed: 0,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 10 {
            return Err(DriftError::config("window must be at least 10"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(DriftError::config("alpha must lie in (0, 1]"));
        }
        if self.stride == 0 || self.n_permutations == 0 {
            return Err(DriftError::config("stride and n_permutations must be positive"));
        }
        self.kernel.validate()
    }

    pub fn refractory_span(&self) -> usize {
        self.refractory.unwrap_or(2 * self.window)
    }
}

/// Sup-distance between the empirical CDFs of two samples.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(DriftError::arg("KS statistic of an empty sample"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Kolmogorov distribution tail `Q(λ) = 2 Σ (-1)^{k-1} exp(-2 k² λ²)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 2.0;
    let mut prev = 0.0f64;
    for k in 1..=100 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() <= 1e-3 * prev || term.abs() <= 1e-8 * sum {
            return sum.clamp(0.0, 1.0);
        }
        sign = -sign;
        prev = term.abs();
    }
    1.0
}

/// Asymptotic two-sample KS p-value with the usual small-sample correction.
pub fn ks_p_value(d: f64, n: usize, m: usize) -> f64 {
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    kolmogorov_q((en + 0.12 + 0.11 / en) * d)
}

fn check_stream(stream: &[StreamSample]) -> Result<usize> {
    let dim = stream.first().map_or(0, |s| s.features.len());
    if stream.iter().any(|s| s.features.len() != dim) {
        return Err(DriftError::arg("stream has mixed dimensions"));
    }
    Ok(dim)
}

/// Positions tested by a two-window detector, with the refractory rule applied
/// through `alert`.
fn scan(
    len: usize,
    config: &BaselineConfig,
    mut alert: impl FnMut(usize) -> Result<bool>,
) -> Result<Vec<usize>> {
    let l = config.window;
    let mut events = Vec::new();
    let mut next_allowed = 0;
    let mut t = 2 * l;
    while t <= len {
        if t >= next_allowed && alert(t)? {
            events.push(t);
            next_allowed = t + config.refractory_span().max(1);
        }
        t += config.stride;
    }
    Ok(events)
}

/// Feature-wise KS test between adjacent windows; returns alert positions.
pub fn kswin_detect(stream: &[StreamSample], config: &BaselineConfig) -> Result<Vec<usize>> {
    config.validate()?;
    let dim = check_stream(stream)?;
    let l = config.window;
    if stream.len() < 2 * l || dim == 0 {
        return Ok(Vec::new());
    }
    let level = if config.bonferroni {
        config.alpha / dim as f64
    } else {
        config.alpha
    };
    let positions = scan(stream.len(), config, |t| {
        for f in 0..dim {
            let a: Vec<f64> = stream[t - 2 * l..t - l].iter().map(|s| s.features[f]).collect();
            let b: Vec<f64> = stream[t - l..t].iter().map(|s| s.features[f]).collect();
            if ks_p_value(ks_statistic(&a, &b)?, l, l) < level {
                return Ok(true);
            }
        }
        Ok(false)
    })?;
    Ok(positions.into_iter().map(|t| stream[t - 1].time + 1).collect())
}

/// Permutation MMD test between adjacent windows; returns alert positions.
/// The kernel (bandwidth or forest) is fitted once on the first `2l` samples.
pub fn mmdddm_detect(stream: &[StreamSample], config: &BaselineConfig) -> Result<Vec<usize>> {
    config.validate()?;
    check_stream(stream)?;
    let l = config.window;
    if stream.len() < 2 * l {
        return Ok(Vec::new());
    }
    let kernel = FittedKernel::fit(&stream[..2 * l], &config.kernel.with_seed(config.seed))?;
    let a: Vec<usize> = (0..l).collect();
    let b: Vec<usize> = (l..2 * l).collect();
    let positions = scan(stream.len(), config, |t| {
        let pts: Vec<&[f64]> = stream[t - 2 * l..t].iter().map(|s| s.features.as_slice()).collect();
        let gram: Matrix = kernel.gram(&pts)?;
        let km = KernelMatrix::new(gram, (t - 2 * l..t).collect())?;
        let test = mmd2_permutation_test(&km, &a, &b, config.n_permutations, derive_seed(config.seed, t as u64))?;
        Ok(test.p_value <= config.alpha)
    })?;
    Ok(positions.into_iter().map(|t| stream[t - 1].time + 1).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use crate::streams::samples_from_features;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_stream(n: usize, dim: usize, shift_at: Option<usize>, seed: u64) -> Vec<StreamSample> {
        let mut rng = rng_from(seed);
        samples_from_features(
            (0..n)
                .map(|i| {
                    let mu = if shift_at.is_some_and(|c| i >= c) { 3.0 } else { 0.0 };
                    (0..dim)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            mu + z
                        })
                        .collect()
                })
                .collect(),
        )
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_statistic(&[3.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0, 4.0], &[3.0, 4.0, 5.0, 6.0]).unwrap(), 0.5);
        assert!(ks_statistic(&[], &[1.0]).is_err());
    }

    #[test]
    fn ks_p_value_reference_points() {
        // Q(1.36) ≈ 0.049 and Q(1.63) ≈ 0.0098 are the classic 5% and 1% points
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_q(1.628) - 0.01).abs() < 5e-4);
        // scipy.stats.kstwobign.sf(0.8)
        assert!((kolmogorov_q(0.8) - 0.544_142_411_574_198_1).abs() < 1e-7);
        assert_eq!(ks_p_value(0.0, 10, 10), 1.0);
    }

    proptest! {
        #[test]
        fn ks_is_symmetric_and_monotone_invariant(
            a in proptest::collection::vec(-50.0f64..50.0, 1..40),
            b in proptest::collection::vec(-50.0f64..50.0, 1..40),
        ) {
            let d = ks_statistic(&a, &b).unwrap();
            prop_assert_eq!(d, ks_statistic(&b, &a).unwrap());
            let f = |v: &Vec<f64>| v.iter().map(|x| (x / 10.0).exp() * 3.0 - 1.0).collect::<Vec<_>>();
            prop_assert!((d - ks_statistic(&f(&a), &f(&b)).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }

    #[test]
    fn short_stream_gives_no_alerts() {
        let s = normal_stream(150, 2, None, 1);
        let cfg = BaselineConfig::default();
        assert!(kswin_detect(&s, &cfg).unwrap().is_empty());
        assert!(mmdddm_detect(&s, &cfg).unwrap().is_empty());
    }

    #[test]
    fn kswin_false_alarm_rate_is_calibrated() {
        // disjoint window pairs, so the positions are independent tests
        let cfg = BaselineConfig {
            window: 50,
            refractory: Some(0),
            stride: 100,
            ..BaselineConfig::default()
        };
        let positions = 4000;
        let mut rng = rng_from(9);
        let rows: Vec<Vec<f64>> = (0..100 * positions)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let alerts = kswin_detect(&samples_from_features(rows), &cfg).unwrap();
        let rate = alerts.len() as f64 / positions as f64;
        // nominal level plus two binomial standard errors
        let bound = 0.01 + 2.0 * (0.01f64 * 0.99 / positions as f64).sqrt();
        assert!(rate <= bound, "rate {rate}");
    }

    #[test]
    fn kswin_detects_a_mean_shift_within_l() {
        let mut hits = 0;
        for seed in 0..20 {
            let s = normal_stream(800, 2, Some(400), seed);
            let alerts = kswin_detect(&s, &BaselineConfig::default()).unwrap();
            if alerts.iter().any(|&t| t > 400 && t <= 500) {
                hits += 1;
            }
        }
        assert!(hits >= 19, "{hits}/20");
    }

    #[test]
    fn mmdddm_alpha_one_alerts_everywhere() {
        let s = normal_stream(60, 1, None, 2);
        let cfg = BaselineConfig {
            window: 10,
            alpha: 1.0,
            n_permutations: 5,
            refractory: Some(0),
            ..BaselineConfig::default()
        };
        assert_eq!(mmdddm_detect(&s, &cfg).unwrap(), (20..=60).collect::<Vec<_>>());
    }

    #[test]
    fn mmdddm_detects_a_strong_shift_and_is_deterministic() {
        let cfg = BaselineConfig {
            window: 50,
            stride: 5,
            n_permutations: 100,
            seed: 4,
            ..BaselineConfig::default()
        };
        let mut hits = 0;
        for seed in 0..20 {
            let s = normal_stream(500, 2, Some(250), seed);
            let alerts = mmdddm_detect(&s, &cfg).unwrap();
            if alerts.iter().any(|&t| t > 250 && t <= 300) {
                hits += 1;
            }
            if seed == 0 {
                assert_eq!(alerts, mmdddm_detect(&s, &cfg).unwrap());
            }
        }
        assert!(hits >= 19, "{hits}/20");
    }

    #[test]
    fn mmdddm_false_alarm_rate_is_near_alpha() {
        // stride 2l makes the tested window pairs disjoint, so positions are independent
        let cfg = BaselineConfig {
            window: 20,
            alpha: 0.05,
            n_permutations: 200,
            refractory: Some(0),
            stride: 40,
            ..BaselineConfig::default()
        };
        let positions = 400;
        let s = normal_stream(40 * positions, 1, None, 31);
        let rate = mmdddm_detect(&s, &cfg).unwrap().len() as f64 / positions as f64;
        let se = (0.05f64 * 0.95 / positions as f64).sqrt();
        assert!((rate - 0.05).abs() <= 2.0 * se, "rate {rate}");
    }

    #[test]
    fn refractory_span_is_respected() {
        let s = normal_stream(600, 1, Some(300), 5);
        let cfg = BaselineConfig {
            window: 20,
            alpha: 0.5,
            ..BaselineConfig::default()
        };
        for alerts in [kswin_detect(&s, &cfg).unwrap(), mmdddm_detect(&s, &BaselineConfig { n_permutations: 20, ..cfg.clone() }).unwrap()] {
            assert!(alerts.windows(2).all(|w| w[1] - w[0] >= 40));
        }
    }
}
