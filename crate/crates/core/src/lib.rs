//! Fast-mixing Markov chains on region graphs, ergodic region sequencing,
//! and a point-cloud anomaly detector built on halfspace Mahalanobis tests.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: dense kernels (LU, Cholesky, spectral norm, nonsymmetric
//!   eigenvalues, chi-squared tail, Gaussian sampling).
//! - [`detector`]: covariance propagation, halfspace projections,
//!   chi-squared likelihoods and the recursive two-hypothesis belief update.
//! - [`graph`]: directed region graphs, irreducibility/aperiodicity checks,
//!   entropy-derived target weights.
//! - [`chain`]: Metropolis–Hastings and three spectral-norm chain designs,
//!   Wielandt deflation and SLEM.
//! - [`sequencer`]: Monte Carlo rollouts scored by total-variation distance.
//! - [`sim`]: the inspection simulation comparing traversal policies.
//! - [`cli`]: the `ergomix` command-line front end.

pub mod chain;
pub mod cli;
pub mod detector;
pub mod graph;
pub mod linalg;
pub mod rng;
pub mod sequencer;
pub mod sim;
pub mod tol;

pub use chain::{ChainError, ChainSolution, Method, SolverSettings};
pub use detector::{DetectorConfig, ObservedPoint, Pose2, ReferencePoint};
pub use graph::{GraphError, RegionGraph, TargetDistribution};
pub use linalg::{LinalgError, Matrix};
pub use sequencer::Sequence;
