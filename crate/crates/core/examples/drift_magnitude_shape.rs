//! Two-window drift magnitude around a single mean shift, against its
//! predicted triangular profile.

use driftlab::kernels::KernelConfig;
use driftlab::magnitude::{gaussian_shift_stream, verify_shape};

fn main() -> driftlab::Result<()> {
    let (n, l) = (2000, 200);
    let stream = gaussian_shift_stream(n, 2, 3.0, 42);
    let report = verify_shape(&stream, &[n], &KernelConfig::rbf_median(), l, 42)?;

    println!("noise floor {:.5}", report.noise_floor);
    println!(
        "sup deviation {:.4} of peak {:.4} ({:.1}%)",
        report.sup_deviation,
        report.peak_amplitude,
        100.0 * report.relative_deviation
    );
    println!("peak at {:?}, predicted {:?}", report.empirical_peaks, report.predicted_peaks);

    // coarse profile around the change
    let near = |t: usize| t + 2 * l >= n && t <= n + 3 * l;
    for (i, &t) in report.positions.iter().enumerate().filter(|(_, &t)| near(t)).step_by(25) {
        let bar = "#".repeat((40.0 * report.empirical[i] / report.peak_amplitude).round().max(0.0) as usize);
        println!("{t:>5} {:.4} {:.4} {bar}", report.empirical[i], report.predicted[i]);
    }
    Ok(())
}
