//! RBF and arrival-time forest kernels on the same two-concept window.

use driftlab::kernels::{compute_kernel_matrix, empirical_mmd2, KernelConfig, KernelMatrix};
use driftlab::magnitude::gaussian_shift_stream;

fn block_means(k: &KernelMatrix, split: usize) -> (f64, f64, f64) {
    let n = k.len();
    let mean = |r: std::ops::Range<usize>, c: std::ops::Range<usize>| {
        let cells = (r.len() * c.len()) as f64;
        r.flat_map(|i| c.clone().map(move |j| (i, j))).map(|(i, j)| k.get(i, j)).sum::<f64>() / cells
    };
    (mean(0..split, 0..split), mean(split..n, split..n), mean(0..split, split..n))
}

fn main() -> driftlab::Result<()> {
    // 150 samples around the origin, then 150 shifted by 2 in each coordinate
    let window = gaussian_shift_stream(150, 3, 2.0, 11);
    let (a, b): (Vec<usize>, Vec<usize>) = ((0..150).collect(), (150..300).collect());

    for config in [KernelConfig::rbf_median(), KernelConfig::default().with_seed(11)] {
        let k = compute_kernel_matrix(&window, &config)?;
        let (aa, bb, ab) = block_means(&k, 150);
        println!("{:>4}: mean AA {aa:.3}  BB {bb:.3}  AB {ab:.3}", config.label());
        println!("      MMD² between the halves {:.4}", empirical_mmd2(&k, &a, &b)?);
    }
    Ok(())
}
