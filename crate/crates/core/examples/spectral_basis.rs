//! Smallest Laplacian eigenvectors of a piecewise-constant window look like
//! step functions of arrival time.

use driftlab::kernels::{compute_kernel_matrix, KernelConfig};
use driftlab::magnitude::gaussian_shift_stream;
use driftlab::spectral::{spectral_embedding, LaplacianKind};
use driftlab::streams::samples_from_features;

fn main() -> driftlab::Result<()> {
    let a = gaussian_shift_stream(100, 2, 0.0, 3);
    // second half is shifted by 4 in each coordinate
    let b = gaussian_shift_stream(100, 2, 4.0, 4);
    // A for 120 samples, B for 80, back to A for 100
    let x = a[..120]
        .iter()
        .chain(&b[120..200])
        .chain(&a[100..200])
        .map(|s| s.features.clone())
        .collect();
    let window = samples_from_features(x);

    let k = compute_kernel_matrix(&window, &KernelConfig::rbf_median())?;
    let basis = spectral_embedding(&k, LaplacianKind::SymmetricNormalized, 3)?;
    println!("eigenvalues {:?}", basis.eigenvalues);

    for (j, range) in [(0, 120), (120, 200), (200, 300)].into_iter().enumerate() {
        let means: Vec<String> = (0..basis.k())
            .map(|c| {
                let m = (range.0..range.1).map(|i| basis.vectors[(i, c)]).sum::<f64>() / (range.1 - range.0) as f64;
                format!("{m:+.4}")
            })
            .collect();
        println!("segment {j} [{}, {}): {}", range.0, range.1, means.join(" "));
    }
    Ok(())
}
