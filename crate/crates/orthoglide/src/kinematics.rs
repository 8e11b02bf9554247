//! Closed-form inverse and direct kinematics of the simplified leg model.
//!
//! With the parallelograms replaced by equivalent bars, each leg is a PSS
//! chain: a prismatic joint on one Cartesian axis connected to the TCP by a
//! rigid bar of length `L_i = L + length_deviation_i`. Eliminating the
//! internal leg angles leaves one constraint per leg,
//!
//! ```text
//! (p_i - (rho_i + offset_i))^2 + p_j^2 + p_k^2 = L_i^2,
//! ```
//!
//! where (i, j, k) ranges over the cyclic axis triples. Everything in this
//! module is a pure function of these constraints.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{
    Axis, ConfigurationIndices, JointCoordinates, LegAngles, MachineGeometry, ParameterDeviation,
    TcpPosition,
};
use crate::tolerances::{DEGENERATE_JOINT_EPSILON_MM, POSE_TOLERANCE_MM};

/// Joint values reaching a TCP position: `rho_i = p_i + s_i * sqrt(L_i^2 -
/// p_j^2 - p_k^2) - offset_i`.
///
/// Fails with [`Error::Unreachable`] when a radicand is negative, i.e. the
/// transverse distance of the target from a drive axis exceeds that leg's
/// length.
pub fn inverse_kinematics(
    p: TcpPosition,
    dev: ParameterDeviation,
    geometry: &MachineGeometry,
    indices: ConfigurationIndices,
) -> Result<JointCoordinates> {
    let mut joints = Vector3::zeros();
    for axis in Axis::ALL {
        let (j, k) = axis.others();
        let leg_length = dev.leg_length(axis, geometry);
        let radicand = leg_length * leg_length - p[j] * p[j] - p[k] * p[k];
        if radicand < 0.0 {
            return Err(Error::Unreachable { leg: axis, radicand });
        }
        joints[axis.index()] =
            p[axis] + indices.sign(axis) * radicand.sqrt() - dev.joint_offset(axis);
    }
    Ok(JointCoordinates(joints))
}

/// TCP position realised by a joint triple.
///
/// Subtracting the leg constraints pairwise gives the parametric form
/// `p_i = q_i / 2 + (t - L_i^2 / 2) / q_i` in the shifted joint values
/// `q_i = rho_i + offset_i`, with the scalar `t = |p|^2 / 2` solving
/// `A t^2 + B t + C = 0`. The three leg spheres intersect in two points;
/// the machine's assembly mode is the one nearer the origin, i.e. the
/// smaller-magnitude root, evaluated in its cancellation-free form `C / q`
/// with `q = -(B + sign(B) sqrt(B^2 - 4AC)) / 2`.
pub fn direct_kinematics(
    rho: JointCoordinates,
    dev: ParameterDeviation,
    geometry: &MachineGeometry,
) -> Result<TcpPosition> {
    let shifted = rho.0 + dev.joint_offsets;
    for axis in Axis::ALL {
        let q = shifted[axis.index()];
        if q.abs() < DEGENERATE_JOINT_EPSILON_MM {
            return Err(Error::DegenerateJoint {
                leg: axis,
                shifted_value: q,
            });
        }
    }

    let q_sq = shifted.component_mul(&shifted);
    let mut leg_sq = Vector3::zeros();
    for axis in Axis::ALL {
        let l = dev.leg_length(axis, geometry);
        leg_sq[axis.index()] = l * l;
    }

    let mut quad_a = 0.0;
    let mut cross = 0.0; // sum of L_i^2 q_j^2 q_k^2
    let mut cross4 = 0.0; // sum of L_i^4 q_j^2 q_k^2
    for axis in Axis::ALL {
        let (j, k) = axis.others();
        let qjk = q_sq[j.index()] * q_sq[k.index()];
        quad_a += qjk;
        cross += leg_sq[axis.index()] * qjk;
        cross4 += leg_sq[axis.index()] * leg_sq[axis.index()] * qjk;
    }
    let q_prod = q_sq.x * q_sq.y * q_sq.z;
    let quad_b = q_prod - cross;
    let quad_c = q_prod * (q_sq.sum() / 4.0 - leg_sq.sum() / 2.0) + cross4 / 4.0;

    let discriminant = quad_b * quad_b - 4.0 * quad_a * quad_c;
    if discriminant < 0.0 {
        return Err(Error::InconsistentJoints { discriminant });
    }
    let shift = -0.5 * (quad_b + quad_b.signum() * discriminant.sqrt());
    let t = if shift == 0.0 { 0.0 } else { quad_c / shift };

    let mut p = Vector3::zeros();
    for axis in Axis::ALL {
        let i = axis.index();
        p[i] = shifted[i] / 2.0 + (t - leg_sq[i] / 2.0) / shifted[i];
    }
    Ok(TcpPosition(p))
}

/// Residuals of the three leg constraint equations, mm^2. Zero (to rounding)
/// for any consistent pose/joint pair.
pub fn constraint_residuals(
    p: TcpPosition,
    rho: JointCoordinates,
    dev: ParameterDeviation,
    geometry: &MachineGeometry,
) -> Vector3<f64> {
    let mut residuals = Vector3::zeros();
    for axis in Axis::ALL {
        let (j, k) = axis.others();
        let shifted = rho[axis] + dev.joint_offset(axis);
        let leg_length = dev.leg_length(axis, geometry);
        residuals[axis.index()] =
            (p[axis] - shifted).powi(2) + p[j] * p[j] + p[k] * p[k] - leg_length * leg_length;
    }
    residuals
}

/// Internal leg angles for a consistent pose/joint pair.
///
/// For leg i with cyclic neighbours (j, k):
/// `p_i = q_i + L_i cos(theta) cos(beta)`, `p_j = L_i sin(theta) cos(beta)`,
/// `p_k = -L_i sin(beta)`. The pair must satisfy the leg constraints within
/// `POSE_TOLERANCE_MM` (as mm^2), otherwise [`Error::InconsistentPose`].
pub fn leg_angles(
    p: TcpPosition,
    rho: JointCoordinates,
    dev: ParameterDeviation,
    geometry: &MachineGeometry,
) -> Result<LegAngles> {
    let residuals = constraint_residuals(p, rho, dev, geometry);
    let worst = residuals.amax();
    if worst > POSE_TOLERANCE_MM {
        return Err(Error::InconsistentPose {
            residual: worst,
            tolerance: POSE_TOLERANCE_MM,
        });
    }

    let mut azimuth = Vector3::zeros();
    let mut elevation = Vector3::zeros();
    for axis in Axis::ALL {
        let (j, k) = axis.others();
        let leg_length = dev.leg_length(axis, geometry);
        let shifted = rho[axis] + dev.joint_offset(axis);
        let sin_beta = (-p[k] / leg_length).clamp(-1.0, 1.0);
        let beta = sin_beta.asin();
        // cos(beta) >= 0 on the chosen branch, so it scales both atan2
        // arguments without changing the angle.
        let theta = p[j].atan2(p[axis] - shifted);
        let theta = if theta < 0.0 {
            theta + std::f64::consts::TAU
        } else {
            theta
        };
        azimuth[axis.index()] = theta;
        elevation[axis.index()] = beta;
    }
    Ok(LegAngles { azimuth, elevation })
}

/// Rebuild the TCP position from each leg's angles via the leg model
/// equations. All three results agree with the original position for angles
/// produced by [`leg_angles`]; used as the reconstruction check.
pub fn reconstruct_leg_positions(
    angles: &LegAngles,
    rho: JointCoordinates,
    dev: ParameterDeviation,
    geometry: &MachineGeometry,
) -> [Vector3<f64>; 3] {
    let mut out = [Vector3::zeros(); 3];
    for axis in Axis::ALL {
        let (j, k) = axis.others();
        let i = axis.index();
        let leg_length = dev.leg_length(axis, geometry);
        let shifted = rho[axis] + dev.joint_offset(axis);
        let (theta, beta) = (angles.azimuth[i], angles.elevation[i]);
        let mut p = Vector3::zeros();
        p[i] = shifted + theta.cos() * beta.cos() * leg_length;
        p[j.index()] = theta.sin() * beta.cos() * leg_length;
        p[k.index()] = -beta.sin() * leg_length;
        out[i] = p;
    }
    out
}

/// True iff every joint value lies inside the closed admissible range
/// `[L + joint_min, L + joint_max]`.
pub fn within_joint_limits(rho: JointCoordinates, geometry: &MachineGeometry) -> bool {
    let (lo, hi) = geometry.joint_range();
    Axis::ALL.iter().all(|&axis| (lo..=hi).contains(&rho[axis]))
}
