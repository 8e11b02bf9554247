//! Domain value types: machine constants, parameter deviations and poses.
//!
//! Units are millimetres and radians throughout. The Cartesian frame has its
//! origin at the intersection of the three prismatic joint axes, with x, y, z
//! directed along them; the constant tool offset is already eliminated by the
//! frame shift, so TCP positions live in the shifted frame.

use std::fmt;
use std::ops::Index;
use std::str::FromStr;

use nalgebra::{SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances::DEVIATION_MAGNITUDE_FACTOR;

/// Cartesian axis, doubling as the leg identifier: each leg is driven by the
/// prismatic joint on the axis of the same name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(index: usize) -> Axis {
        Axis::ALL[index]
    }

    /// The other two axes, in cyclic order: x -> (y, z), y -> (z, x),
    /// z -> (x, y). The leg model equations rely on this ordering.
    pub fn others(self) -> (Axis, Axis) {
        match self {
            Axis::X => (Axis::Y, Axis::Z),
            Axis::Y => (Axis::Z, Axis::X),
            Axis::Z => (Axis::X, Axis::Y),
        }
    }

    pub fn unit(self) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        v[self.index()] = 1.0;
        v
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        };
        f.write_str(s)
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Axis> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(Error::invalid("axis", format!("expected x, y or z, got {other:?}"))),
        }
    }
}

/// Nominal constants of the machine, in mm.
///
/// `joint_min`/`joint_max` are the prescribed travel limits of the prismatic
/// joints *relative to the nominal leg length*: admissible joint values are
/// `nominal_leg_length + joint_min ..= nominal_leg_length + joint_max`. The
/// relative reading is forced by the extreme-posture construction, which
/// needs asin(limit / L) to be well defined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MachineGeometry {
    /// Nominal equivalent-bar length L of every leg.
    pub nominal_leg_length: f64,
    /// Width d of the articulated parallelograms (carried for completeness;
    /// the equivalent-bar model does not use it).
    pub parallelogram_width: f64,
    /// Distance r from the leg attachment points to the TCP, eliminated from
    /// the model by the constant (r, r, r) frame shift.
    pub tool_offset: f64,
    /// Lower joint travel limit relative to L (negative).
    pub joint_min: f64,
    /// Upper joint travel limit relative to L (positive).
    pub joint_max: f64,
}

impl Default for MachineGeometry {
    /// Constants of the small-scale prototype.
    fn default() -> Self {
        MachineGeometry {
            nominal_leg_length: 310.25,
            parallelogram_width: 80.0,
            tool_offset: 31.0,
            joint_min: -100.0,
            joint_max: 60.0,
        }
    }
}

impl MachineGeometry {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.nominal_leg_length,
            self.parallelogram_width,
            self.tool_offset,
            self.joint_min,
            self.joint_max,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("geometry", "non-finite field"));
        }
        if self.nominal_leg_length <= 0.0 {
            return Err(Error::invalid("geometry", "nominal_leg_length must be positive"));
        }
        if self.parallelogram_width <= 0.0 {
            return Err(Error::invalid("geometry", "parallelogram_width must be positive"));
        }
        if self.tool_offset < 0.0 {
            return Err(Error::invalid("geometry", "tool_offset must be non-negative"));
        }
        if self.joint_min >= self.joint_max {
            return Err(Error::invalid("geometry", "joint_min must be below joint_max"));
        }
        if self.joint_min.abs() >= self.nominal_leg_length
            || self.joint_max.abs() >= self.nominal_leg_length
        {
            return Err(Error::invalid(
                "geometry",
                "joint travel limits must stay below the leg length in magnitude",
            ));
        }
        Ok(())
    }

    /// Admissible absolute joint range `[L + joint_min, L + joint_max]`.
    pub fn joint_range(&self) -> (f64, f64) {
        (
            self.nominal_leg_length + self.joint_min,
            self.nominal_leg_length + self.joint_max,
        )
    }

    /// Leg tilt angle asin(joint_max / L) at the maximum-displacement postures.
    pub fn max_travel_angle(&self) -> f64 {
        (self.joint_max / self.nominal_leg_length).asin()
    }

    /// Leg tilt angle asin(joint_min / L) (negative) at the minimum-displacement postures.
    pub fn min_travel_angle(&self) -> f64 {
        (self.joint_min / self.nominal_leg_length).asin()
    }
}

/// The six calibrated quantities: per-axis joint encoder offsets and per-leg
/// length deviations from the nominal value.
///
/// As a flat parameter vector the order is
/// (offset_x, offset_y, offset_z, length_x, length_y, length_z), matching the
/// columns of the calibration design matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterDeviation {
    /// Encoder offsets: true joint position = commanded value + offset.
    pub joint_offsets: Vector3<f64>,
    /// Leg length deviations: true leg length = L + deviation.
    pub leg_length_deviations: Vector3<f64>,
}

impl ParameterDeviation {
    pub fn new(joint_offsets: Vector3<f64>, leg_length_deviations: Vector3<f64>) -> Self {
        ParameterDeviation {
            joint_offsets,
            leg_length_deviations,
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn joint_offset(&self, axis: Axis) -> f64 {
        self.joint_offsets[axis.index()]
    }

    pub fn leg_length_deviation(&self, axis: Axis) -> f64 {
        self.leg_length_deviations[axis.index()]
    }

    /// True length of one leg under this deviation.
    pub fn leg_length(&self, axis: Axis, geometry: &MachineGeometry) -> f64 {
        geometry.nominal_leg_length + self.leg_length_deviations[axis.index()]
    }

    /// Flat (offsets | lengths) parameter vector.
    pub fn as_vector(&self) -> SVector<f64, 6> {
        SVector::<f64, 6>::from_iterator(
            self.joint_offsets
                .iter()
                .chain(self.leg_length_deviations.iter())
                .copied(),
        )
    }

    pub fn from_vector(v: SVector<f64, 6>) -> Self {
        ParameterDeviation {
            joint_offsets: Vector3::new(v[0], v[1], v[2]),
            leg_length_deviations: Vector3::new(v[3], v[4], v[5]),
        }
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.as_vector().amax()
    }

    /// Reject non-finite or absurdly large deviations (bound:
    /// `DEVIATION_MAGNITUDE_FACTOR` times the nominal leg length).
    pub fn validate(&self, geometry: &MachineGeometry) -> Result<()> {
        let v = self.as_vector();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("parameter deviation", "non-finite entry"));
        }
        let bound = DEVIATION_MAGNITUDE_FACTOR * geometry.nominal_leg_length;
        if v.amax() >= bound {
            return Err(Error::invalid(
                "parameter deviation",
                format!("entry magnitude {:.3} mm exceeds the {:.3} mm sanity bound", v.amax(), bound),
            ));
        }
        Ok(())
    }
}

/// TCP position p in the shifted Cartesian frame, mm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TcpPosition(pub Vector3<f64>);

impl TcpPosition {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        TcpPosition(Vector3::new(x, y, z))
    }

    pub fn origin() -> Self {
        TcpPosition(Vector3::zeros())
    }
}

impl Index<Axis> for TcpPosition {
    type Output = f64;

    fn index(&self, axis: Axis) -> &f64 {
        &self.0[axis.index()]
    }
}

impl From<Vector3<f64>> for TcpPosition {
    fn from(v: Vector3<f64>) -> Self {
        TcpPosition(v)
    }
}

/// Commanded prismatic joint values rho, mm.
///
/// Travel limits are checked by [`crate::kinematics::within_joint_limits`],
/// not at construction: the simulator probes out-of-limit joint triples on
/// purpose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointCoordinates(pub Vector3<f64>);

impl JointCoordinates {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        JointCoordinates(Vector3::new(x, y, z))
    }
}

impl Index<Axis> for JointCoordinates {
    type Output = f64;

    fn index(&self, axis: Axis) -> &f64 {
        &self.0[axis.index()]
    }
}

impl From<Vector3<f64>> for JointCoordinates {
    fn from(v: Vector3<f64>) -> Self {
        JointCoordinates(v)
    }
}

/// Sign selecting the assembly branch of one leg in the inverse kinematics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum BranchSign {
    #[default]
    Positive,
    Negative,
}

impl BranchSign {
    pub fn value(self) -> f64 {
        match self {
            BranchSign::Positive => 1.0,
            BranchSign::Negative => -1.0,
        }
    }
}

/// Per-leg assembly branch signs. The prototype assembly mode is all
/// positive, which is the default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfigurationIndices(pub [BranchSign; 3]);

impl ConfigurationIndices {
    pub const POSITIVE: ConfigurationIndices =
        ConfigurationIndices([BranchSign::Positive, BranchSign::Positive, BranchSign::Positive]);

    pub fn sign(&self, axis: Axis) -> f64 {
        self.0[axis.index()].value()
    }
}

/// Internal leg orientation angles, radians.
///
/// Branch convention: `elevation` (the out-of-plane tilt beta) lies in
/// [-pi/2, pi/2] and `azimuth` (the in-plane angle theta) in [0, 2*pi). When
/// a leg is parallel to its third axis (cos beta = 0) the azimuth is
/// reported as 0. The binding contract is that the leg model equations
/// reproduce the TCP position from these angles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegAngles {
    pub azimuth: Vector3<f64>,
    pub elevation: Vector3<f64>,
}
