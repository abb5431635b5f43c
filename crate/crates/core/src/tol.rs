//! Numerical tolerances and iteration caps shared across the crate.
//!
//! Every threshold that appears in a post-condition lives here so that
//! callers (and tests) agree on a single value.

/// Required residual of [`crate::linalg::solve_linear`], relative to `1 + ‖b‖∞`.
pub const SOLVE_RESIDUAL: f64 = 1e-9;
/// Pivots below `PIVOT_EPS · n · max|A|` are treated as zero.
pub const PIVOT_EPS: f64 = 1e-14;

/// Relative accuracy target of the spectral norm.
pub const SPECTRAL_NORM_REL_TOL: f64 = 1e-8;
/// Power iteration stops once successive Rayleigh quotients agree to this.
pub const POWER_ITERATION_STALL: f64 = 1e-14;
/// Default iteration cap for the power iteration.
pub const SPECTRAL_NORM_MAX_ITER: usize = 10_000;

/// Francis QR sweeps allowed per eigenvalue before giving up.
pub const QR_SWEEPS_PER_EIGENVALUE: usize = 60;

/// Cholesky pivots below this value mean the matrix is not PSD.
pub const NOT_PSD_PIVOT: f64 = -1e-10;
/// Ridge added to observation covariances before inversion.
pub const COV_REGULARIZATION: f64 = 1e-9;
/// Symmetry tolerance for covariance inputs.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Beliefs are kept inside `[BELIEF_CLAMP, 1 - BELIEF_CLAMP]`.
pub const BELIEF_CLAMP: f64 = 1e-12;
/// Allowed error on `‖normal‖ = 1`.
pub const UNIT_NORMAL_TOL: f64 = 1e-9;

/// Probability vectors must sum to one within this.
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-9;
/// Entropies at or below this are treated as zero.
pub const ZERO_ENTROPY: f64 = 1e-12;
/// Minimum target weight handed to the chain optimizer.
pub const WEIGHT_FLOOR: f64 = 1e-6;

/// Column sums of a transition matrix must be one within this.
pub const COLUMN_SUM_TOL: f64 = 1e-8;
/// Negative entries down to `-NEGATIVE_ENTRY_CLAMP` are clamped to zero.
pub const NEGATIVE_ENTRY_CLAMP: f64 = 1e-10;
/// `‖Pw − w‖∞` allowed on a returned chain.
pub const STATIONARITY_TOL: f64 = 1e-7;
/// `‖Pw − w‖∞` allowed on input to deflation.
pub const DEFLATE_STATIONARITY_TOL: f64 = 1e-6;
/// Slack on the upper end of the SLEM range.
pub const SLEM_SLACK: f64 = 1e-8;
