//! Spectral change-point detection for data streams.
//!
//! The toolkit finds abrupt distribution changes ("concept drift") by looking
//! at the spectrum of a kernel matrix built over a window of the stream: when
//! the stream switches between a few constant distributions, the kernel matrix
//! is block-structured along time, so the leading eigenvectors of its
//! normalized Laplacian are (noisy) step functions of arrival time. A
//! leaf-budgeted regression tree on the time axis recovers the steps, and
//! cross-validation picks the number of leaves.
//!
//! Modules, bottom-up:
//!
//! * [`streams`]: concept generators (STAGGER, RandomRBF, rotating hyperplane,
//!   resampled pools), the warm-up / drift / cool-down stream composition with
//!   ground truth, CSV ingestion, normalization and JSON-lines export.
//! * [`kernels`]: RBF and arrival-time forest kernels, kernel matrices and the
//!   empirical MMD².
//! * [`spectral`]: graph Laplacians, smallest eigenvectors and the block
//!   auto-correlation structure of piecewise-constant kernels.
//! * [`segmentation`]: best-first regression trees on time and cross-validated
//!   leaf selection.
//! * [`detector`]: the offline and streaming detector with Ward de-duplication
//!   and cross-batch consensus.
//! * [`magnitude`]: sliding-window drift magnitude, its predicted triangular
//!   shape, and finite-sample identity checks.
//! * [`baselines`]: KS-Win and MMD sliding-window detectors.
//! * [`eval`]: β-score, alignment shifts and the benchmark harness.
//! * [`cli`]: the `driftlab` command-line front end.
//!
//! Runnable walkthroughs for each capability live in the crate's `examples/`
//! directory (`cargo run --release --example <name>`).

pub mod baselines;
pub mod cli;
pub mod detector;
pub mod error;
pub mod eval;
pub mod kernels;
pub mod linalg;
pub mod magnitude;
pub mod seed;
pub mod segmentation;
pub mod spectral;
pub mod streams;

pub use error::{DriftError, Result};
