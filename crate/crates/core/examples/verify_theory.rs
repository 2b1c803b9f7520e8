//! Numerical checks behind the method: the weighted quadratic-form identity
//! and the spectrum of block-constant kernels.

use driftlab::linalg::Matrix;
use driftlab::magnitude::check_weighted_identity;
use driftlab::seed::rng_from;
use driftlab::spectral::BlockAutoCorrelation;
use rand::Rng;

fn main() -> driftlab::Result<()> {
    let mut rng = rng_from(9);

    let a = Matrix::from_fn(40, 6, |_, _| rng.random_range(-1.0..1.0));
    let k = a.matmul(&a.transpose())?;
    let w: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
    let id = check_weighted_identity(&k, &w)?;
    println!("wᵀKw = {:.12}, spectral form = {:.12}, gap {:.1e}", id.lhs, id.rhs, id.gap);

    let reduced = Matrix::from_rows(&[vec![1.0, 0.3, 0.1], vec![0.3, 0.8, 0.2], vec![0.1, 0.2, 0.9]])?;
    let block = BlockAutoCorrelation::from_reduced(reduced, vec![20, 7, 33])?;
    let check = block.check_spectrum()?;
    println!(
        "{}x{} block kernel: eigenvalue gap {:.1e}, eigenvector block deviation {:.1e}",
        block.grid_len(),
        block.grid_len(),
        check.eigenvalue_gap,
        check.block_deviation
    );
    Ok(())
}
