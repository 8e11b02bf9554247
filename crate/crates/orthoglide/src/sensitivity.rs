//! First-order sensitivity of the TCP position to the six geometric
//! parameters.
//!
//! Differentiating the leg constraints with the commanded joints held fixed
//! gives `M * dp/d(offsets) = diag(p_i - q_i)` and `M * dp/d(lengths) =
//! diag(L_i)`, where `q_i` are the shifted joint values and `M` stacks the
//! leg direction rows `(p - q_i e_i)^T`. The 3x6 parameter Jacobian is the
//! pair of solved blocks in column order (offset_x..z, length_x..z).
//!
//! At the test postures (all joints nominal, or one axis driven to a travel
//! limit) the Jacobian collapses to closed forms used by the calibration
//! equations; those are provided separately so the calibration chain does
//! not depend on the general-pose path.

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{
    Axis, ConfigurationIndices, JointCoordinates, MachineGeometry, ParameterDeviation, TcpPosition,
};
use crate::kinematics::{direct_kinematics, inverse_kinematics};
use crate::tolerances::SINGULAR_DENOMINATOR_EPSILON_MM;

/// 3x6 sensitivity matrix `[dp/d(offsets) | dp/d(lengths)]`, dimensionless.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParameterJacobian(SMatrix<f64, 3, 6>);

impl ParameterJacobian {
    pub fn from_blocks(offsets: Matrix3<f64>, lengths: Matrix3<f64>) -> Self {
        let mut m = SMatrix::<f64, 3, 6>::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&offsets);
        m.fixed_view_mut::<3, 3>(0, 3).copy_from(&lengths);
        ParameterJacobian(m)
    }

    pub fn matrix(&self) -> &SMatrix<f64, 3, 6> {
        &self.0
    }

    /// Sensitivity block with respect to the joint offsets.
    pub fn joint_offset_block(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    /// Sensitivity block with respect to the leg lengths.
    pub fn leg_length_block(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 3).into_owned()
    }

    /// First-order TCP displacement caused by a parameter deviation.
    pub fn apply(&self, dev: ParameterDeviation) -> Vector3<f64> {
        self.0 * dev.as_vector()
    }
}

/// One of the seven test postures: the isotropic "mechanical zero", or one
/// axis driven to its maximum/minimum travel limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PostureId {
    Zero,
    Max(Axis),
    Min(Axis),
}

impl PostureId {
    pub const ALL: [PostureId; 7] = [
        PostureId::Zero,
        PostureId::Max(Axis::X),
        PostureId::Max(Axis::Y),
        PostureId::Max(Axis::Z),
        PostureId::Min(Axis::X),
        PostureId::Min(Axis::Y),
        PostureId::Min(Axis::Z),
    ];

    /// Axis whose joint sits at a travel limit, if any.
    pub fn driven_axis(self) -> Option<Axis> {
        match self {
            PostureId::Zero => None,
            PostureId::Max(a) | PostureId::Min(a) => Some(a),
        }
    }

    /// Signed joint travel at this posture: `joint_max`, `joint_min` or 0.
    pub fn travel_limit(self, geometry: &MachineGeometry) -> f64 {
        match self {
            PostureId::Zero => 0.0,
            PostureId::Max(_) => geometry.joint_max,
            PostureId::Min(_) => geometry.joint_min,
        }
    }

    /// Tilt angle of the two passive legs: asin(travel / L). Zero at the
    /// mechanical-zero posture, negative at the minimum postures.
    pub fn travel_angle(self, geometry: &MachineGeometry) -> f64 {
        (self.travel_limit(geometry) / geometry.nominal_leg_length).asin()
    }
}

impl std::fmt::Display for PostureId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PostureId::Zero => write!(f, "Zero"),
            PostureId::Max(a) => write!(f, "{}Max", a.to_string().to_uppercase()),
            PostureId::Min(a) => write!(f, "{}Min", a.to_string().to_uppercase()),
        }
    }
}

impl std::str::FromStr for PostureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<PostureId> {
        match s.to_ascii_lowercase().as_str() {
            "zero" => Ok(PostureId::Zero),
            "xmax" => Ok(PostureId::Max(Axis::X)),
            "ymax" => Ok(PostureId::Max(Axis::Y)),
            "zmax" => Ok(PostureId::Max(Axis::Z)),
            "xmin" => Ok(PostureId::Min(Axis::X)),
            "ymin" => Ok(PostureId::Min(Axis::Y)),
            "zmin" => Ok(PostureId::Min(Axis::Z)),
            other => Err(Error::invalid(
                "posture",
                format!("expected zero|xmax|ymax|zmax|xmin|ymin|zmin, got {other:?}"),
            )),
        }
    }
}

/// Parameter Jacobian at a general consistent pose/joint pair.
///
/// Fails with [`Error::SingularConfiguration`] when some `|p_i - q_i|` falls
/// below `SINGULAR_DENOMINATOR_EPSILON_MM` (leg perpendicular to its drive
/// axis) and with [`Error::DegeneratePose`] if the leg-direction matrix is
/// otherwise not invertible.
pub fn parameter_jacobian(
    p: TcpPosition,
    rho: JointCoordinates,
    dev: ParameterDeviation,
    geometry: &MachineGeometry,
) -> Result<ParameterJacobian> {
    let shifted = rho.0 + dev.joint_offsets;
    let mut axial = Vector3::zeros();
    for axis in Axis::ALL {
        let i = axis.index();
        let denominator = p.0[i] - shifted[i];
        if denominator.abs() < SINGULAR_DENOMINATOR_EPSILON_MM {
            return Err(Error::SingularConfiguration { leg: axis, denominator });
        }
        axial[i] = denominator;
    }

    let directions = Matrix3::new(
        axial.x, p.0.y, p.0.z, //
        p.0.x, axial.y, p.0.z, //
        p.0.x, p.0.y, axial.z,
    );
    let inverse = directions.try_inverse().ok_or(Error::DegeneratePose)?;

    let mut lengths = Vector3::zeros();
    for axis in Axis::ALL {
        lengths[axis.index()] = dev.leg_length(axis, geometry);
    }
    let offsets_block = inverse * Matrix3::from_diagonal(&axial);
    let lengths_block = inverse * Matrix3::from_diagonal(&lengths);
    Ok(ParameterJacobian::from_blocks(offsets_block, lengths_block))
}

/// Closed-form parameter Jacobian at a test posture, linearised at nominal
/// geometry.
///
/// At the mechanical zero it is `[I | -I]`. With axis d at a travel limit
/// and tilt angle alpha, the offset block gains `tan(alpha)` in column d of
/// the two passive rows, and the length block is `-1/cos(alpha)` on the
/// passive diagonal, `-1` on the driven one and `-tan(alpha)` in the passive
/// rows of column d.
pub fn posture_jacobian(id: PostureId, geometry: &MachineGeometry) -> ParameterJacobian {
    let alpha = id.travel_angle(geometry);
    let tan = alpha.tan();
    let sec = 1.0 / alpha.cos();

    let mut offsets = Matrix3::identity();
    let mut lengths = Matrix3::from_diagonal_element(-sec);
    if let Some(driven) = id.driven_axis() {
        let d = driven.index();
        lengths[(d, d)] = -1.0;
        for axis in Axis::ALL {
            if axis != driven {
                offsets[(axis.index(), d)] = tan;
                lengths[(axis.index(), d)] = -tan;
            }
        }
    }
    ParameterJacobian::from_blocks(offsets, lengths)
}

/// First-order TCP displacement at a test posture caused by a parameter
/// deviation: the same linear map as [`posture_jacobian`], applied.
pub fn displacement_at_posture(
    id: PostureId,
    dev: ParameterDeviation,
    geometry: &MachineGeometry,
) -> Vector3<f64> {
    posture_jacobian(id, geometry).apply(dev)
}

/// Central-difference approximation of the parameter Jacobian, the
/// verification oracle for [`parameter_jacobian`].
///
/// The joint commands are held fixed at `inverse_kinematics(p, dev)` while
/// each parameter is perturbed by ±`step`; kinematics errors propagate.
pub fn finite_difference_jacobian(
    p: TcpPosition,
    dev: ParameterDeviation,
    geometry: &MachineGeometry,
    step: f64,
) -> Result<ParameterJacobian> {
    let rho = inverse_kinematics(p, dev, geometry, ConfigurationIndices::POSITIVE)?;
    let base = dev.as_vector();
    let mut jacobian = SMatrix::<f64, 3, 6>::zeros();
    for col in 0..6 {
        let mut plus = base;
        let mut minus = base;
        plus[col] += step;
        minus[col] -= step;
        let p_plus = direct_kinematics(rho, ParameterDeviation::from_vector(plus), geometry)?;
        let p_minus = direct_kinematics(rho, ParameterDeviation::from_vector(minus), geometry)?;
        jacobian.set_column(col, &((p_plus.0 - p_minus.0) / (2.0 * step)));
    }
    Ok(ParameterJacobian(jacobian))
}
