//! The twelve-equation leg-parallelism identification system.
//!
//! Two dial gauges per leg read the transverse coordinates of the leg
//! centreline at a fixed station near mid-leg. The deviation of each reading
//! between an extreme posture (axis at its travel limit) and the
//! mechanical-zero posture is, to first order, a fixed linear combination of
//! the six geometric parameters. Stacking the two readings of all three legs
//! at both travel limits gives a 12x6 linear system solved here in the
//! least-squares sense via SVD (Moore-Penrose), optionally restricted to a
//! subset of the parameters.
//!
//! # Measurement order
//!
//! The canonical right-hand-side order is fixed; `d{a}_{b}{+|-}` denotes the
//! reading along axis `a` of leg `b` between posture `b`Max (`+`) or `b`Min
//! (`-`) and Zero:
//!
//! ```text
//! dx_y+, dy_x+, dx_y-, dy_x-,   (x/y plane group)
//! dy_z+, dz_y+, dy_z-, dz_y-,   (y/z plane group)
//! dx_z+, dz_x+, dx_z-, dz_x-    (x/z plane group)
//! ```
//!
//! File ingestion validates labels, not positions, and reorders into this
//! canonical order (the physical protocol produces measurements leg by leg).

use nalgebra::{DMatrix, DVector, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    Axis, ConfigurationIndices, JointCoordinates, MachineGeometry, ParameterDeviation, TcpPosition,
};
use crate::kinematics::inverse_kinematics;
use crate::tolerances::RANK_RATIO_THRESHOLD;

pub const MEASUREMENT_COUNT: usize = 12;
pub const PARAMETER_COUNT: usize = 6;

/// Which travel limit an extreme posture drives its axis to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TravelDirection {
    Max,
    Min,
}

impl TravelDirection {
    /// Signed joint travel: `joint_max` or `joint_min`.
    pub fn limit(self, geometry: &MachineGeometry) -> f64 {
        match self {
            TravelDirection::Max => geometry.joint_max,
            TravelDirection::Min => geometry.joint_min,
        }
    }

    /// Leg tilt angle asin(limit / L) at the corresponding posture.
    pub fn angle(self, geometry: &MachineGeometry) -> f64 {
        (self.limit(geometry) / geometry.nominal_leg_length).asin()
    }

    pub fn symbol(self) -> char {
        match self {
            TravelDirection::Max => '+',
            TravelDirection::Min => '-',
        }
    }
}

/// Identity of one gauge-difference observable: the reading along `axis` of
/// `leg`, taken between the leg's Max/Min posture and Zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasurementLabel {
    pub axis: Axis,
    pub leg: Axis,
    pub travel: TravelDirection,
}

impl MeasurementLabel {
    pub fn new(axis: Axis, leg: Axis, travel: TravelDirection) -> Result<Self> {
        if axis == leg {
            return Err(Error::invalid(
                "measurement label",
                format!("gauge axis must differ from the {leg} leg axis"),
            ));
        }
        Ok(MeasurementLabel { axis, leg, travel })
    }
}

impl std::fmt::Display for MeasurementLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "d{}_{}{}", self.axis, self.leg, self.travel.symbol())
    }
}

const fn label(axis: Axis, leg: Axis, travel: TravelDirection) -> MeasurementLabel {
    MeasurementLabel { axis, leg, travel }
}

/// The twelve observables in canonical order.
pub const CANONICAL_LABELS: [MeasurementLabel; MEASUREMENT_COUNT] = [
    label(Axis::X, Axis::Y, TravelDirection::Max),
    label(Axis::Y, Axis::X, TravelDirection::Max),
    label(Axis::X, Axis::Y, TravelDirection::Min),
    label(Axis::Y, Axis::X, TravelDirection::Min),
    label(Axis::Y, Axis::Z, TravelDirection::Max),
    label(Axis::Z, Axis::Y, TravelDirection::Max),
    label(Axis::Y, Axis::Z, TravelDirection::Min),
    label(Axis::Z, Axis::Y, TravelDirection::Min),
    label(Axis::X, Axis::Z, TravelDirection::Max),
    label(Axis::Z, Axis::X, TravelDirection::Max),
    label(Axis::X, Axis::Z, TravelDirection::Min),
    label(Axis::Z, Axis::X, TravelDirection::Min),
];

/// Position of a label in the canonical order.
pub fn canonical_index(target: MeasurementLabel) -> usize {
    CANONICAL_LABELS
        .iter()
        .position(|l| *l == target)
        .expect("every valid label appears in the canonical order")
}

/// The twelve gauge-reading differences, mm, in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementVector(SVector<f64, MEASUREMENT_COUNT>);

impl MeasurementVector {
    pub fn new(values: SVector<f64, MEASUREMENT_COUNT>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("measurement vector", "non-finite entry"));
        }
        Ok(MeasurementVector(values))
    }

    pub fn from_array(values: [f64; MEASUREMENT_COUNT]) -> Result<Self> {
        Self::new(SVector::from(values))
    }

    /// Build from labelled entries in any order. Each canonical label must
    /// appear exactly once.
    pub fn from_labeled(entries: &[(MeasurementLabel, f64)]) -> Result<Self> {
        if entries.len() != MEASUREMENT_COUNT {
            return Err(Error::invalid(
                "measurement set",
                format!("expected {MEASUREMENT_COUNT} entries, got {}", entries.len()),
            ));
        }
        let mut values = SVector::<f64, MEASUREMENT_COUNT>::zeros();
        let mut seen = [false; MEASUREMENT_COUNT];
        for (label, value) in entries {
            MeasurementLabel::new(label.axis, label.leg, label.travel)?;
            let idx = canonical_index(*label);
            if seen[idx] {
                return Err(Error::invalid(
                    "measurement set",
                    format!("duplicate entry for {label}"),
                ));
            }
            seen[idx] = true;
            values[idx] = *value;
        }
        // len == 12 and no duplicates ⇒ all present
        Self::new(values)
    }

    pub fn values(&self) -> &SVector<f64, MEASUREMENT_COUNT> {
        &self.0
    }

    pub fn get(&self, label: MeasurementLabel) -> f64 {
        self.0[canonical_index(label)]
    }

    pub fn iter_labeled(&self) -> impl Iterator<Item = (MeasurementLabel, f64)> + '_ {
        CANONICAL_LABELS.iter().map(move |l| (*l, self.get(*l)))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    pub fn rms(&self) -> f64 {
        (self.0.norm_squared() / MEASUREMENT_COUNT as f64).sqrt()
    }

    /// Sanity check against the configurable gauge-travel bound.
    pub fn validate_magnitude(&self, bound_mm: f64) -> Result<()> {
        if self.max_abs() >= bound_mm {
            return Err(Error::invalid(
                "measurement vector",
                format!("entry magnitude {:.3} mm exceeds the {bound_mm} mm sanity bound", self.max_abs()),
            ));
        }
        Ok(())
    }
}

/// Coefficients of one extreme posture's deviation equations for tilt angle
/// alpha: `a = sin`, `b = (1/2 + sin) tan`, `c = (1/2 + sin) / cos - 1/2`.
///
/// `a` carries the cross-coupling of the measured axis's own offset, `b` the
/// coupling through the driven axis, and `c` the measured leg length. All
/// three vanish at alpha = 0. Caller guarantees |alpha| < pi/2.
pub fn coefficient_triple(alpha: f64) -> (f64, f64, f64) {
    let (sin, cos) = (alpha.sin(), alpha.cos());
    let a = sin;
    let b = (0.5 + sin) * alpha.tan();
    let c = (0.5 + sin) / cos - 0.5;
    (a, b, c)
}

/// First-order gauge initial locations at the mechanical-zero posture: the
/// leg midpoints under the parameter deviation, indexed x, y, z.
///
/// Leg b's gauge sits at `(L - length_dev_b)/2 + offset_b` along its own
/// axis and at `(offset_a - length_dev_a)/2` along each transverse axis `a`.
pub fn gauge_initial_locations(
    dev: ParameterDeviation,
    geometry: &MachineGeometry,
) -> [Vector3<f64>; 3] {
    let l = geometry.nominal_leg_length;
    let mut out = [Vector3::zeros(); 3];
    for leg in Axis::ALL {
        let mut g = Vector3::zeros();
        for axis in Axis::ALL {
            let off = dev.joint_offset(axis);
            let dl = dev.leg_length_deviation(axis);
            g[axis.index()] = if axis == leg {
                (l - dl) / 2.0 + off
            } else {
                (off - dl) / 2.0
            };
        }
        out[leg.index()] = g;
    }
    out
}

/// The 12x6 design matrix mapping (offsets | lengths) to the canonical
/// measurement vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignMatrix(SMatrix<f64, MEASUREMENT_COUNT, PARAMETER_COUNT>);

impl DesignMatrix {
    pub fn matrix(&self) -> &SMatrix<f64, MEASUREMENT_COUNT, PARAMETER_COUNT> {
        &self.0
    }

    /// Forward map: predicted measurements for a parameter deviation.
    pub fn apply(&self, dev: ParameterDeviation) -> MeasurementVector {
        MeasurementVector(self.0 * dev.as_vector())
    }
}

/// Human-readable names of the six parameter columns.
pub const PARAMETER_NAMES: [&str; PARAMETER_COUNT] = [
    "joint_offset_x",
    "joint_offset_y",
    "joint_offset_z",
    "leg_length_x",
    "leg_length_y",
    "leg_length_z",
];

/// Assemble the design matrix. Each row `d{a}_{b}{±}` reads
///
/// ```text
/// b_t * offset_b + a_t * offset_a - b_t * length_b - c_t * length_a
/// ```
///
/// with `(a_t, b_t, c_t) = coefficient_triple(angle(±))`; the matrix depends
/// on the geometry only through the two tilt angles. Every row has exactly
/// four structural nonzeros (the third axis never enters).
pub fn build_design_matrix(geometry: &MachineGeometry) -> DesignMatrix {
    let mut m = SMatrix::<f64, MEASUREMENT_COUNT, PARAMETER_COUNT>::zeros();
    for (row, label) in CANONICAL_LABELS.iter().enumerate() {
        let (a, b, c) = coefficient_triple(label.travel.angle(geometry));
        let leg = label.leg.index();
        let axis = label.axis.index();
        m[(row, leg)] = b;
        m[(row, axis)] = a;
        m[(row, 3 + leg)] = -b;
        m[(row, 3 + axis)] = -c;
    }
    DesignMatrix(m)
}

/// Subset of the six parameter columns to identify; the complement stays
/// fixed at zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterMask {
    joint_offsets: [bool; 3],
    leg_lengths: [bool; 3],
}

impl ParameterMask {
    pub fn new(joint_offsets: [bool; 3], leg_lengths: [bool; 3]) -> Result<Self> {
        let mask = ParameterMask { joint_offsets, leg_lengths };
        if mask.selected_columns().is_empty() {
            return Err(Error::invalid("parameter mask", "no parameters selected"));
        }
        Ok(mask)
    }

    /// All six parameters.
    pub fn full() -> Self {
        ParameterMask { joint_offsets: [true; 3], leg_lengths: [true; 3] }
    }

    /// Joint offsets only; leg lengths held at nominal.
    pub fn joint_offsets_only() -> Self {
        ParameterMask { joint_offsets: [true; 3], leg_lengths: [false; 3] }
    }

    /// Leg lengths only; joint offsets held at zero.
    pub fn leg_lengths_only() -> Self {
        ParameterMask { joint_offsets: [false; 3], leg_lengths: [true; 3] }
    }

    /// Indices of the selected columns in (offsets | lengths) order.
    pub fn selected_columns(&self) -> Vec<usize> {
        let mut cols = Vec::with_capacity(PARAMETER_COUNT);
        for (i, on) in self.joint_offsets.iter().enumerate() {
            if *on {
                cols.push(i);
            }
        }
        for (i, on) in self.leg_lengths.iter().enumerate() {
            if *on {
                cols.push(3 + i);
            }
        }
        cols
    }

    pub fn includes(&self, column: usize) -> bool {
        if column < 3 {
            self.joint_offsets[column]
        } else {
            self.leg_lengths[column - 3]
        }
    }

    pub fn name(&self) -> &'static str {
        match (self.joint_offsets, self.leg_lengths) {
            ([true, true, true], [true, true, true]) => "full",
            ([true, true, true], [false, false, false]) => "joint-offsets",
            ([false, false, false], [true, true, true]) => "leg-lengths",
            _ => "custom",
        }
    }
}

/// Outcome of one identification solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub mask: ParameterMask,
    /// Identified deviation; parameters outside the mask are zero.
    pub deviation: ParameterDeviation,
    /// measurements - design * deviation, mm, canonical order.
    pub residual: SVector<f64, MEASUREMENT_COUNT>,
    /// sqrt(sum(residual^2) / 12), mm.
    pub residual_rms: f64,
    /// sigma_max / sigma_min of the masked design matrix.
    pub condition_number: f64,
}

/// Minimum-residual least-squares identification of the masked parameters
/// from a measurement vector, via the SVD pseudoinverse.
///
/// Fails with [`Error::RankDeficient`] when the masked design matrix's
/// smallest singular value drops below `RANK_RATIO_THRESHOLD` times the
/// largest. No row weighting is applied: all twelve equations count equally.
pub fn solve_identification(
    measurements: &MeasurementVector,
    mask: ParameterMask,
    geometry: &MachineGeometry,
) -> Result<CalibrationResult> {
    geometry.validate()?;
    let design = build_design_matrix(geometry);
    let columns = mask.selected_columns();
    if columns.is_empty() {
        return Err(Error::invalid("parameter mask", "no parameters selected"));
    }

    let masked = DMatrix::from_fn(MEASUREMENT_COUNT, columns.len(), |r, c| {
        design.matrix()[(r, columns[c])]
    });
    let svd = masked.svd(true, true);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    let ratio = if sigma_max > 0.0 { sigma_min / sigma_max } else { 0.0 };
    if ratio < RANK_RATIO_THRESHOLD {
        return Err(Error::RankDeficient { singular_value_ratio: ratio });
    }

    let rhs = DVector::from_row_slice(measurements.values().as_slice());
    let solution = svd
        .solve(&rhs, 0.0)
        .map_err(|_| Error::RankDeficient { singular_value_ratio: ratio })?;

    let mut full = SVector::<f64, PARAMETER_COUNT>::zeros();
    for (slot, column) in columns.iter().enumerate() {
        full[*column] = solution[slot];
    }
    let deviation = ParameterDeviation::from_vector(full);
    let residual = measurements.values() - design.matrix() * full;
    let residual_rms = (residual.norm_squared() / MEASUREMENT_COUNT as f64).sqrt();

    Ok(CalibrationResult {
        mask,
        deviation,
        residual,
        residual_rms,
        condition_number: sigma_max / sigma_min,
    })
}

/// Joint command compensating the identified deviation: inverse kinematics
/// under the identified parameters, so a machine whose true parameters equal
/// the identified ones reaches the target exactly.
pub fn compensate_joint_command(
    target: TcpPosition,
    result: &CalibrationResult,
    geometry: &MachineGeometry,
) -> Result<JointCoordinates> {
    inverse_kinematics(target, result.deviation, geometry, ConfigurationIndices::POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn geom() -> MachineGeometry {
        MachineGeometry::default()
    }

    #[test]
    fn triple_vanishes_at_zero_angle() {
        assert_eq!(coefficient_triple(0.0), (0.0, 0.0, 0.0));
    }

    #[test]
    fn triple_frozen_values() {
        // Independently evaluated at asin(60 / 310.25) and asin(-100 / 310.25).
        let (a1, b1, c1) = coefficient_triple(geom().max_travel_angle());
        assert_abs_diff_eq!(a1, 0.193_392_425_463_336, epsilon = 1e-14);
        assert_abs_diff_eq!(b1, 0.136_677_103_608_249, epsilon = 1e-14);
        assert_abs_diff_eq!(c1, 0.206_734_523_240_989, epsilon = 1e-14);

        let (a2, b2, c2) = coefficient_triple(geom().min_travel_angle());
        assert_abs_diff_eq!(a2, -0.322_320_709_105_560, epsilon = 1e-14);
        assert_abs_diff_eq!(b2, -0.060_498_487_228_761_2, epsilon = 1e-14);
        assert_abs_diff_eq!(c2, -0.312_303_443_372_768, epsilon = 1e-14);
        // sign structure at the negative angle: a < 0 and b < 0 because the
        // 1/2 + sin factor stays positive while tan flips sign
        assert!(a2 < 0.0 && b2 < 0.0 && c2 < 0.0);
    }

    #[test]
    fn gauge_locations_nominal_midpoints() {
        let g = geom();
        let locs = gauge_initial_locations(ParameterDeviation::zero(), &g);
        let half = g.nominal_leg_length / 2.0;
        assert_eq!(locs[0], Vector3::new(half, 0.0, 0.0));
        assert_eq!(locs[1], Vector3::new(0.0, half, 0.0));
        assert_eq!(locs[2], Vector3::new(0.0, 0.0, half));
    }

    #[test]
    fn gauge_locations_offset_and_length_terms() {
        let g = geom();
        let half = g.nominal_leg_length / 2.0;

        let dev = ParameterDeviation::new(Vector3::new(1.0, 0.0, 0.0), Vector3::zeros());
        let locs = gauge_initial_locations(dev, &g);
        assert_eq!(locs[0], Vector3::new(half + 1.0, 0.0, 0.0));
        assert_eq!(locs[1].x, 0.5);

        let dev = ParameterDeviation::new(Vector3::zeros(), Vector3::new(2.0, 0.0, 0.0));
        let locs = gauge_initial_locations(dev, &g);
        assert_eq!(locs[0].x, half - 1.0);
    }

    #[test]
    fn design_matrix_row_layout() {
        let g = geom();
        let m = build_design_matrix(&g);
        let (a1, b1, c1) = coefficient_triple(g.max_travel_angle());
        // second canonical row: dy_x+
        let row: Vec<f64> = (0..6).map(|c| m.matrix()[(1, c)]).collect();
        assert_eq!(row, vec![b1, a1, 0.0, -b1, -c1, 0.0]);
    }

    #[test]
    fn design_matrix_zero_pattern() {
        let m = build_design_matrix(&geom());
        let zeros = m.matrix().iter().filter(|v| **v == 0.0).count();
        assert_eq!(zeros, 24);
        assert_eq!(72 - zeros, 48);
        // plane groups: rows 0-3 touch only x/y columns, 4-7 only y/z, 8-11 only x/z
        for row in 0..4 {
            assert_eq!(m.matrix()[(row, 2)], 0.0);
            assert_eq!(m.matrix()[(row, 5)], 0.0);
        }
        for row in 4..8 {
            assert_eq!(m.matrix()[(row, 0)], 0.0);
            assert_eq!(m.matrix()[(row, 3)], 0.0);
        }
        for row in 8..12 {
            assert_eq!(m.matrix()[(row, 1)], 0.0);
            assert_eq!(m.matrix()[(row, 4)], 0.0);
        }
    }

    #[test]
    fn design_rows_re_derive_from_displacement_and_gauge_model() {
        // Re-derive each row from the posture displacement map plus the
        // first-order gauge model: reading = mu0 * dp_axis - g0_axis with
        // mu0 = 1/2 + sin(alpha).
        use crate::sensitivity::{displacement_at_posture, PostureId};
        let g = geom();
        let design = build_design_matrix(&g);
        for (row, label) in CANONICAL_LABELS.iter().enumerate() {
            let posture = match label.travel {
                TravelDirection::Max => PostureId::Max(label.leg),
                TravelDirection::Min => PostureId::Min(label.leg),
            };
            let mu0 = 0.5 + label.travel.angle(&g).sin();
            for col in 0..PARAMETER_COUNT {
                let mut unit = nalgebra::SVector::<f64, 6>::zeros();
                unit[col] = 1.0;
                let dev = ParameterDeviation::from_vector(unit);
                let dp = displacement_at_posture(posture, dev, &g);
                let g0 = gauge_initial_locations(dev, &g)[label.leg.index()];
                let derived = mu0 * dp[label.axis.index()] - g0[label.axis.index()];
                assert!(
                    (derived - design.matrix()[(row, col)]).abs() < 1e-12,
                    "row {row} col {col}"
                );
            }
        }
    }

    #[test]
    fn labels_validate_axis_leg_distinct() {
        assert!(MeasurementLabel::new(Axis::X, Axis::X, TravelDirection::Max).is_err());
    }

    #[test]
    fn from_labeled_rejects_duplicates_and_shortfall() {
        let mut entries: Vec<(MeasurementLabel, f64)> =
            CANONICAL_LABELS.iter().map(|l| (*l, 0.0)).collect();
        entries[3] = entries[2];
        assert!(MeasurementVector::from_labeled(&entries).is_err());
        assert!(MeasurementVector::from_labeled(&entries[..11]).is_err());
    }

    #[test]
    fn from_labeled_reorders() {
        let mut entries: Vec<(MeasurementLabel, f64)> = CANONICAL_LABELS
            .iter()
            .enumerate()
            .map(|(i, l)| (*l, i as f64))
            .collect();
        entries.reverse();
        let v = MeasurementVector::from_labeled(&entries).unwrap();
        for (i, l) in CANONICAL_LABELS.iter().enumerate() {
            assert_eq!(v.get(*l), i as f64);
        }
    }

    #[test]
    fn exact_recovery_on_consistent_system() {
        let g = geom();
        let design = build_design_matrix(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let dev = ParameterDeviation::new(
                Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0)),
                Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0)),
            );
            let m = design.apply(dev);
            let result = solve_identification(&m, ParameterMask::full(), &g).unwrap();
            assert!(
                (result.deviation.as_vector() - dev.as_vector()).amax() < 1e-9,
                "dev {:?}",
                dev
            );
            assert!(result.residual_rms < 1e-12);
        }
    }

    #[test]
    fn residual_is_orthogonal_complement() {
        // Adding a component orthogonal to the column span leaves the
        // solution unchanged and shows up verbatim as the residual.
        let g = geom();
        let design = build_design_matrix(&g);
        let dev = ParameterDeviation::new(
            Vector3::new(0.4, -0.7, 0.2),
            Vector3::new(0.1, 0.3, -0.5),
        );
        let consistent = design.apply(dev);
        let base = solve_identification(&consistent, ParameterMask::full(), &g).unwrap();

        // build an orthogonal vector numerically: project a probe out of the span
        let m = design.matrix();
        let probe = SVector::<f64, 12>::from_fn(|i, _| ((i * 7 + 3) % 5) as f64 - 2.0);
        let gram = (m.transpose() * m)
            .try_inverse()
            .expect("full design matrix has full column rank");
        let ortho = probe - m * (gram * (m.transpose() * probe));
        assert!((m.transpose() * ortho).amax() < 1e-12);

        let perturbed = MeasurementVector::new(consistent.values() + ortho).unwrap();
        let result = solve_identification(&perturbed, ParameterMask::full(), &g).unwrap();
        assert!((result.deviation.as_vector() - base.deviation.as_vector()).amax() < 1e-9);
        assert!((result.residual - ortho).amax() < 1e-9);
    }

    #[test]
    fn reduced_mask_residual_dominates_full() {
        let g = geom();
        let design = build_design_matrix(&g);
        let dev = ParameterDeviation::new(
            Vector3::new(0.8, -0.3, 0.5),
            Vector3::new(-0.4, 0.6, 0.2),
        );
        let m = design.apply(dev);
        let full = solve_identification(&m, ParameterMask::full(), &g).unwrap();
        let offsets = solve_identification(&m, ParameterMask::joint_offsets_only(), &g).unwrap();
        let lengths = solve_identification(&m, ParameterMask::leg_lengths_only(), &g).unwrap();
        assert!(offsets.residual_rms > full.residual_rms);
        assert!(lengths.residual_rms > full.residual_rms);
        // reduced-mask results leave the complement untouched
        assert_eq!(offsets.deviation.leg_length_deviations, Vector3::zeros());
        assert_eq!(lengths.deviation.joint_offsets, Vector3::zeros());
    }

    #[test]
    fn least_squares_optimality() {
        // No small perturbation of the returned solution may decrease the
        // residual sum of squares.
        let g = geom();
        let design = build_design_matrix(&g);
        let noisy = MeasurementVector::from_array([
            0.21, -0.14, 0.03, 0.38, -0.05, 0.11, -0.27, 0.09, 0.16, -0.31, 0.07, 0.24,
        ])
        .unwrap();
        let result = solve_identification(&noisy, ParameterMask::full(), &g).unwrap();
        let base_sq = result.residual.norm_squared();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let step = SVector::<f64, 6>::from_fn(|_, _| rng.random_range(-1e-3..1e-3));
            let candidate = result.deviation.as_vector() + step;
            let cand_res = noisy.values() - design.matrix() * candidate;
            assert!(cand_res.norm_squared() >= base_sq - 1e-15);
        }
    }

    #[test]
    fn solution_scales_with_measurements() {
        let g = geom();
        let m = MeasurementVector::from_array([
            0.1, 0.2, -0.1, 0.05, 0.3, -0.2, 0.15, -0.05, 0.12, 0.08, -0.18, 0.22,
        ])
        .unwrap();
        let base = solve_identification(&m, ParameterMask::full(), &g).unwrap();
        let scaled_m = MeasurementVector::new(m.values() * 3.0).unwrap();
        let scaled = solve_identification(&scaled_m, ParameterMask::full(), &g).unwrap();
        assert!(
            (scaled.deviation.as_vector() - base.deviation.as_vector() * 3.0).amax() < 1e-9
        );
        assert!((scaled.residual - base.residual * 3.0).amax() < 1e-9);
    }

    #[test]
    fn rank_deficiency_detected() {
        // Vanishing joint travel collapses the design matrix towards the
        // rank-3 offset-minus-length pattern.
        let g = MachineGeometry {
            joint_min: -2e-9,
            joint_max: 1e-9,
            ..MachineGeometry::default()
        };
        let m = MeasurementVector::from_array([0.0; 12]).unwrap();
        let err = solve_identification(&m, ParameterMask::full(), &g).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
    }

    #[test]
    fn condition_number_frozen_value() {
        let g = geom();
        let result = solve_identification(
            &MeasurementVector::from_array([0.0; 12]).unwrap(),
            ParameterMask::full(),
            &g,
        )
        .unwrap();
        // evaluated independently via an SVD of the printed matrix
        assert_abs_diff_eq!(result.condition_number, 61.873_484_834_852_54, epsilon = 1e-9);
    }

    #[test]
    fn compensation_matches_identified_model() {
        let g = geom();
        let dev = ParameterDeviation::new(
            Vector3::new(0.5, -0.2, 0.3),
            Vector3::new(0.1, 0.4, -0.3),
        );
        let m = build_design_matrix(&g).apply(dev);
        let result = solve_identification(&m, ParameterMask::full(), &g).unwrap();
        let target = TcpPosition::new(15.0, -20.0, 30.0);
        let compensated = compensate_joint_command(target, &result, &g).unwrap();
        // a machine whose true parameters equal the identified ones lands on target
        let reached = crate::kinematics::direct_kinematics(compensated, result.deviation, &g).unwrap();
        assert!((reached.0 - target.0).amax() < 1e-9);
    }

    #[test]
    fn offsets_only_compensation_shifts_joints() {
        let g = geom();
        let dev = ParameterDeviation::new(Vector3::new(0.3, -0.1, 0.2), Vector3::zeros());
        let m = build_design_matrix(&g).apply(dev);
        let result = solve_identification(&m, ParameterMask::joint_offsets_only(), &g).unwrap();
        let target = TcpPosition::origin();
        let nominal = inverse_kinematics(
            target,
            ParameterDeviation::zero(),
            &g,
            ConfigurationIndices::POSITIVE,
        )
        .unwrap();
        let compensated = compensate_joint_command(target, &result, &g).unwrap();
        assert!(
            ((compensated.0 - nominal.0) + result.deviation.joint_offsets).amax() < 1e-9
        );
    }

    #[test]
    fn identified_zero_equals_nominal_ik() {
        let g = geom();
        let m = MeasurementVector::from_array([0.0; 12]).unwrap();
        let result = solve_identification(&m, ParameterMask::full(), &g).unwrap();
        assert!(result.deviation.as_vector().amax() < 1e-12);
        let target = TcpPosition::new(10.0, 20.0, -30.0);
        let compensated = compensate_joint_command(target, &result, &g).unwrap();
        let nominal = inverse_kinematics(
            target,
            ParameterDeviation::zero(),
            &g,
            ConfigurationIndices::POSITIVE,
        )
        .unwrap();
        assert!((compensated.0 - nominal.0).amax() < 1e-9);
    }
}
