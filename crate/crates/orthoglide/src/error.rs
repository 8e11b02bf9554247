//! Error types shared across the crate.

use thiserror::Error;

use crate::geometry::Axis;

/// Failure modes of the kinematic, calibration and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The target position lies outside the reach of one leg (negative
    /// radicand in the inverse-kinematics square root).
    #[error("target unreachable by the {leg} leg (radicand {radicand:.6} mm^2)")]
    Unreachable { leg: Axis, radicand: f64 },

    /// The three leg spheres do not intersect for the given joint triple.
    #[error("joint triple not realizable (discriminant {discriminant:.6})")]
    InconsistentJoints { discriminant: f64 },

    /// A shifted joint value is too close to zero for the parametric
    /// direct-kinematics form.
    #[error("degenerate {leg} joint: shifted value {shifted_value:.9} mm is below the epsilon")]
    DegenerateJoint { leg: Axis, shifted_value: f64 },

    /// The supplied pose/joint pair violates a leg constraint equation.
    #[error("pose and joints are inconsistent (residual {residual:.3e} mm^2 exceeds {tolerance:.3e})")]
    InconsistentPose { residual: f64, tolerance: f64 },

    /// A sensitivity denominator vanished: the leg is perpendicular to its
    /// drive axis and the parameter Jacobian is undefined.
    #[error("singular configuration at the {leg} leg (|p - rho| = {denominator:.3e} mm)")]
    SingularConfiguration { leg: Axis, denominator: f64 },

    /// The TCP sits on the plane through the three joint centres, where the
    /// two assembly modes coincide and the leg-direction matrix is singular.
    #[error("degenerate pose: TCP on the joint-centres plane")]
    DegeneratePose,

    /// The masked design matrix has (numerically) dependent columns.
    #[error("masked design matrix is rank deficient (sigma_min/sigma_max = {singular_value_ratio:.3e})")]
    RankDeficient { singular_value_ratio: f64 },

    /// The fixed gauge station does not intersect the leg segment in the
    /// commanded posture.
    #[error("gauge station off the {leg} leg segment (mu = {mu:.6})")]
    GaugeOffLeg { leg: Axis, mu: f64 },

    /// A value failed input validation.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
