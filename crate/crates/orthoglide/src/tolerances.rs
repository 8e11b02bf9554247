//! Default numeric tolerances.
//!
//! All lengths are millimetres. The values below are compile-time defaults;
//! routines that depend on one take it from here so that every threshold in
//! the crate is defined (and documented) in a single place.

/// Positional agreement for pose-valued identities (kinematic round trips,
/// leg reconstruction) and, in mm^2, for the leg constraint residuals.
/// Double precision at the ~310 mm machine scale leaves ~1e-11 of rounding
/// headroom, so 1e-9 is comfortably above noise while far below anything
/// mechanically meaningful.
pub const POSE_TOLERANCE_MM: f64 = 1e-9;

/// Entrywise agreement for exact matrix identities (e.g. the zero-posture
/// Jacobian), which are reproduced to machine precision.
pub const MATRIX_IDENTITY_TOLERANCE: f64 = 1e-12;

/// Minimum |p_i - (rho_i + offset_i)| accepted by the parameter Jacobian
/// before the configuration is declared singular.
pub const SINGULAR_DENOMINATOR_EPSILON_MM: f64 = 1e-6;

/// Minimum |rho_i + offset_i| accepted by the parametric direct-kinematics
/// form, which divides by the shifted joint values.
pub const DEGENERATE_JOINT_EPSILON_MM: f64 = 1e-6;

/// Relative singular-value cutoff for the identification solve: the masked
/// design matrix is treated as rank deficient when
/// sigma_min < RANK_RATIO_THRESHOLD * sigma_max.
pub const RANK_RATIO_THRESHOLD: f64 = 1e-10;

/// Default central-difference step for the numerical parameter Jacobian.
/// Balances O(h^2) truncation against roundoff amplification (~eps * L / h)
/// for mm-scale coordinates.
pub const FINITE_DIFFERENCE_STEP_MM: f64 = 1e-4;

/// Parameter deviations larger than this fraction of the nominal leg length
/// are rejected as nonsense input.
pub const DEVIATION_MAGNITUDE_FACTOR: f64 = 0.1;

/// Gauge readings larger than this are rejected at file ingestion; the
/// indicators used by the measurement protocol cannot travel that far.
pub const MEASUREMENT_SANITY_BOUND_MM: f64 = 10.0;
