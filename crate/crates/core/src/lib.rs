//! Entropy-regularized 2-Wasserstein distances and 2-Sinkhorn divergences
//! between Gaussian processes, estimated from `n` finite-dimensional marginals.
//!
//! A Gaussian process `f ~ GP(m, K)` on the unit cube is compared through its
//! restriction to `n` index points drawn from the uniform base measure. The
//! covariance part reduces to spectra of scaled Gram matrices
//! `(1/n) K(x_i, x_j)`, the mean part to a Monte Carlo average.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`kernels`] | kernels, mean functions, sup-bounds, Gram matrices |
//! | [`sampling`] | seeded index samples and regular grids |
//! | [`specmath`] | symmetric eigendecomposition, PSD square roots, the `F` functional |
//! | [`divergence`] | closed-form Gaussian divergences and their marginal estimators |
//! | [`bounds`] | expected-error and concentration bounds |
//! | [`oracle`] | discrete log-domain Sinkhorn-Knopp solver used for validation |
//! | [`experiments`] | convergence and dimension-scan experiments, CSV/SVG output |
//!
//! ```
//! use gp_sinkhorn::{divergence, kernels::Kernel, sampling};
//!
//! let rbf = Kernel::rbf(1.0, 1.0, 1).unwrap();
//! let lin = Kernel::linear(1).unwrap();
//! let sample = sampling::sample_uniform(200, 1, 7).unwrap();
//! let reg = divergence::RegParam::new(1.0).unwrap();
//! let s = divergence::estimate_sinkhorn(&rbf, &lin, &sample, reg).unwrap();
//! assert!(s > 0.0);
//! ```

pub mod bounds;
pub mod divergence;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod oracle;
pub mod sampling;
pub mod specmath;

pub use error::{Error, Result};
