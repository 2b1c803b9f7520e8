//! Cross-validated regression tree on the time axis.
//!
//! The targets are a noisy three-level step signal; the leaf budget is chosen
//! by test R² over random splits and the tree thresholds become change points.

use driftlab::linalg::Matrix;
use driftlab::segmentation::{segment, CvConfig};
use driftlab::seed::rng_from;
use rand_distr::{Distribution, Normal};

fn main() -> driftlab::Result<()> {
    let mut rng = rng_from(5);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let level = |t: usize| match t {
        0..=149 => 0.0,
        150..=239 => 1.0,
        _ => -0.5,
    };
    let times: Vec<f64> = (0..400).map(|t| t as f64).collect();
    let targets = Matrix::from_fn(400, 2, |t, d| level(t) * (d + 1) as f64 + noise.sample(&mut rng));

    let seg = segment(&times, &targets, &CvConfig::default(), 5)?;
    println!("cv scores by leaf count: {:?}", seg.cv_scores);
    println!("k = {}, change points {:?}", seg.k, seg.change_points);
    Ok(())
}
