//! Synthetic gauge measurements for a machine with known parameter errors.
//!
//! The central asymmetry: postures are commanded through the *controller
//! model* (nominal geometry before calibration, identified geometry after
//! compensation), while the machine realises them with its *true*
//! parameters. Each leg carries two dial gauges zeroed at the
//! mechanical-zero posture; a gauge's measurement plane stays fixed in
//! space, so its reading at another posture is the transverse coordinate of
//! the leg centreline where the centreline crosses that plane. The twelve
//! max/min-vs-zero differences feed the identification system.
//!
//! The nonlinear path re-derives every reading from exact kinematics (true
//! TCP via direct kinematics, exact line/plane intersection); the linear
//! path is the design-matrix forward map. Their gap is second order in the
//! deviation magnitude.

use nalgebra::{SVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    build_design_matrix, canonical_index, solve_identification, CalibrationResult,
    MeasurementLabel, MeasurementVector, ParameterMask, TravelDirection, MEASUREMENT_COUNT,
    PARAMETER_COUNT,
};
use crate::error::{Error, Result};
use crate::geometry::{
    Axis, ConfigurationIndices, JointCoordinates, MachineGeometry, ParameterDeviation, TcpPosition,
};
use crate::kinematics::{direct_kinematics, inverse_kinematics};
use crate::sensitivity::PostureId;

/// Which measurement model generates the synthetic readings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimulationMode {
    /// Design-matrix forward map (first order in the deviations).
    Linear,
    /// Exact geometric re-derivation of every gauge reading.
    Nonlinear,
}

/// Additive reading noise: Gaussian with `std_dev`, then rounded to the
/// indicator resolution `quantization_step` (0 disables either stage).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    pub std_dev: f64,
    pub quantization_step: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    /// 10 um indicator resolution and a per-reading scatter consistent with
    /// the ~0.02 mm protocol repeatability.
    fn default() -> Self {
        NoiseModel {
            std_dev: 0.01,
            quantization_step: 0.01,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless(seed: u64) -> Self {
        NoiseModel {
            std_dev: 0.0,
            quantization_step: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.std_dev.is_finite() && self.std_dev >= 0.0) {
            return Err(Error::invalid("noise model", "std_dev must be finite and >= 0"));
        }
        if !(self.quantization_step.is_finite() && self.quantization_step >= 0.0) {
            return Err(Error::invalid(
                "noise model",
                "quantization_step must be finite and >= 0",
            ));
        }
        Ok(())
    }
}

/// Station of the per-leg motion sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StationKind {
    Zero,
    Max,
    Min,
}

/// Per-leg measurement schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentPlan {
    /// Full sequence repetitions per leg.
    pub repeats: u32,
    /// Motion sequence per leg; must start and end at the zero posture and
    /// visit both travel limits.
    pub sequence: Vec<StationKind>,
    pub mode: SimulationMode,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            repeats: 3,
            sequence: vec![
                StationKind::Zero,
                StationKind::Max,
                StationKind::Min,
                StationKind::Zero,
            ],
            mode: SimulationMode::Nonlinear,
        }
    }
}

impl ExperimentPlan {
    pub fn noiseless_linear() -> Self {
        ExperimentPlan {
            mode: SimulationMode::Linear,
            ..ExperimentPlan::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats < 1 {
            return Err(Error::invalid("experiment plan", "repeats must be >= 1"));
        }
        if self.sequence.first() != Some(&StationKind::Zero)
            || self.sequence.last() != Some(&StationKind::Zero)
            || self.sequence.len() < 2
        {
            return Err(Error::invalid(
                "experiment plan",
                "sequence must start and end at the zero posture",
            ));
        }
        for kind in [StationKind::Max, StationKind::Min] {
            if !self.sequence.contains(&kind) {
                return Err(Error::invalid(
                    "experiment plan",
                    "sequence must visit both travel limits",
                ));
            }
        }
        Ok(())
    }
}

/// Nominal commanded configuration of a test posture (deviation-free).
///
/// At the maximum/minimum postures the driven joint sits exactly at its
/// travel limit and the TCP at `limit` along the driven axis, because
/// `L sin(asin(limit / L)) = limit`.
pub fn posture_configuration(
    id: PostureId,
    geometry: &MachineGeometry,
) -> (TcpPosition, JointCoordinates) {
    let l = geometry.nominal_leg_length;
    match id.driven_axis() {
        None => (
            TcpPosition::origin(),
            JointCoordinates(Vector3::from_element(l)),
        ),
        Some(axis) => {
            let limit = id.travel_limit(geometry);
            let passive = (l * l - limit * limit).sqrt(); // L cos(alpha)
            let mut joints = Vector3::from_element(passive);
            joints[axis.index()] = l + limit;
            (
                TcpPosition(axis.unit() * limit),
                JointCoordinates(joints),
            )
        }
    }
}

/// Linearised measurement synthesis: the design-matrix image of the true
/// deviation. Exact for the first-order model by construction.
pub fn simulate_measurements_linear(
    true_dev: ParameterDeviation,
    geometry: &MachineGeometry,
) -> MeasurementVector {
    build_design_matrix(geometry).apply(true_dev)
}

/// Linearised synthesis on a compensated machine: the controller corrects
/// with its identified deviation, so the first-order observable is the image
/// of the *residual* deviation.
pub fn simulate_measurements_linear_compensated(
    true_dev: ParameterDeviation,
    controller_dev: ParameterDeviation,
    geometry: &MachineGeometry,
) -> MeasurementVector {
    let residual = ParameterDeviation::from_vector(true_dev.as_vector() - controller_dev.as_vector());
    build_design_matrix(geometry).apply(residual)
}

/// Exact measurement synthesis with nominal posture commands.
pub fn simulate_measurements_nonlinear(
    true_dev: ParameterDeviation,
    geometry: &MachineGeometry,
) -> Result<MeasurementVector> {
    simulate_measurements_nonlinear_compensated(true_dev, ParameterDeviation::zero(), geometry)
}

/// Exact measurement synthesis with the controller commanding postures
/// through its own (e.g. identified) parameter model.
pub fn simulate_measurements_nonlinear_compensated(
    true_dev: ParameterDeviation,
    controller_dev: ParameterDeviation,
    geometry: &MachineGeometry,
) -> Result<MeasurementVector> {
    let mut entries = Vec::with_capacity(MEASUREMENT_COUNT);
    for leg in Axis::ALL {
        for (label, value) in leg_differences(leg, true_dev, controller_dev, geometry)? {
            entries.push((label, value));
        }
    }
    MeasurementVector::from_labeled(&entries)
}

/// The four gauge differences of one leg (two transverse axes, both travel
/// directions), via exact geometry.
fn leg_differences(
    leg: Axis,
    true_dev: ParameterDeviation,
    controller_dev: ParameterDeviation,
    geometry: &MachineGeometry,
) -> Result<[(MeasurementLabel, f64); 4]> {
    let transverse = leg.others();

    // Zero posture: command through the controller model, realise with the
    // true parameters, set the gauges at the true leg midpoint.
    let commanded = inverse_kinematics(
        TcpPosition::origin(),
        controller_dev,
        geometry,
        ConfigurationIndices::POSITIVE,
    )?;
    let tcp = direct_kinematics(commanded, true_dev, geometry)?;
    let joint_centre = commanded[leg] + true_dev.joint_offset(leg);
    let midpoint = (tcp.0 + leg.unit() * joint_centre) / 2.0;
    let station = midpoint[leg.index()];
    let zero_readings = [
        midpoint[transverse.0.index()],
        midpoint[transverse.1.index()],
    ];

    let mut out = [(
        MeasurementLabel {
            axis: transverse.0,
            leg,
            travel: TravelDirection::Max,
        },
        0.0,
    ); 4];
    let mut slot = 0;
    for travel in [TravelDirection::Max, TravelDirection::Min] {
        let target = TcpPosition(leg.unit() * travel.limit(geometry));
        let commanded =
            inverse_kinematics(target, controller_dev, geometry, ConfigurationIndices::POSITIVE)?;
        let tcp = direct_kinematics(commanded, true_dev, geometry)?;
        let joint_centre = commanded[leg] + true_dev.joint_offset(leg);

        // The leg runs from the joint centre to the TCP; find where its
        // centreline crosses the gauge plane held at `station`.
        let axial_span = tcp.0[leg.index()] - joint_centre;
        let mu = (station - joint_centre) / axial_span;
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::GaugeOffLeg { leg, mu });
        }
        let point = leg.unit() * joint_centre + mu * (tcp.0 - leg.unit() * joint_centre);

        for (t, axis) in [transverse.0, transverse.1].into_iter().enumerate() {
            out[slot] = (
                MeasurementLabel { axis, leg, travel },
                point[axis.index()] - zero_readings[t],
            );
            slot += 1;
        }
    }
    Ok(out)
}

/// One raw gauge-difference reading of the experiment log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawReading {
    pub trial: u32,
    pub leg: Axis,
    pub axis: Axis,
    pub posture: TravelDirection,
    pub repeat: u32,
    pub value_mm: f64,
}

/// Averaged measurements plus the per-reading log of one experiment run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub measurements: MeasurementVector,
    pub readings: Vec<RawReading>,
}

fn quantize(value: f64, step: f64) -> f64 {
    if step > 0.0 {
        (value / step).round() * step
    } else {
        value
    }
}

/// Run the measurement protocol once: per leg, `repeats` passes through the
/// motion sequence, one noisy quantized reading per gauge per limit visit,
/// arithmetically averaged per observable. Deterministic for a given seed.
pub fn run_experiment(
    plan: &ExperimentPlan,
    true_dev: ParameterDeviation,
    noise: &NoiseModel,
    geometry: &MachineGeometry,
) -> Result<ExperimentOutcome> {
    run_experiment_trial(plan, true_dev, ParameterDeviation::zero(), noise, geometry, 0)
}

/// [`run_experiment`] with an explicit controller model and an independent
/// noise stream per `trial` (same seed, different stream), so Monte-Carlo
/// trials can run in parallel yet reproduce bit-identically.
pub fn run_experiment_trial(
    plan: &ExperimentPlan,
    true_dev: ParameterDeviation,
    controller_dev: ParameterDeviation,
    noise: &NoiseModel,
    geometry: &MachineGeometry,
    trial: u32,
) -> Result<ExperimentOutcome> {
    plan.validate()?;
    noise.validate()?;
    geometry.validate()?;

    let base = match plan.mode {
        SimulationMode::Linear => {
            simulate_measurements_linear_compensated(true_dev, controller_dev, geometry)
        }
        SimulationMode::Nonlinear => {
            simulate_measurements_nonlinear_compensated(true_dev, controller_dev, geometry)?
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(trial as u64);
    let normal = if noise.std_dev > 0.0 {
        Some(Normal::new(0.0, noise.std_dev).expect("validated std_dev"))
    } else {
        None
    };

    let mut sums = SVector::<f64, MEASUREMENT_COUNT>::zeros();
    let mut counts = [0u32; MEASUREMENT_COUNT];
    let mut readings = Vec::new();
    for leg in Axis::ALL {
        let transverse = leg.others();
        for repeat in 0..plan.repeats {
            for station in &plan.sequence {
                let travel = match station {
                    StationKind::Zero => continue, // gauges re-zeroed; no difference reading
                    StationKind::Max => TravelDirection::Max,
                    StationKind::Min => TravelDirection::Min,
                };
                for axis in [transverse.0, transverse.1] {
                    let idx = canonical_index(MeasurementLabel { axis, leg, travel });
                    let mut value = base.values()[idx];
                    if let Some(normal) = &normal {
                        value += normal.sample(&mut rng);
                    }
                    value = quantize(value, noise.quantization_step);
                    readings.push(RawReading {
                        trial,
                        leg,
                        axis,
                        posture: travel,
                        repeat,
                        value_mm: value,
                    });
                    sums[idx] += value;
                    counts[idx] += 1;
                }
            }
        }
    }

    let averaged = SVector::<f64, MEASUREMENT_COUNT>::from_fn(|i, _| sums[i] / counts[i] as f64);
    Ok(ExperimentOutcome {
        measurements: MeasurementVector::new(averaged)?,
        readings,
    })
}

/// Magnitude summary of one measurement pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSummary {
    pub measurements: MeasurementVector,
    pub max_abs: f64,
    pub rms: f64,
}

impl MeasurementSummary {
    fn new(measurements: MeasurementVector) -> Self {
        MeasurementSummary {
            max_abs: measurements.max_abs(),
            rms: measurements.rms(),
            measurements,
        }
    }
}

/// Post-compensation verification pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub measurements: MeasurementVector,
    pub max_abs_before: f64,
    pub max_abs_after: f64,
    /// `max_abs_before / max_abs_after`; absent when the compensated pass
    /// reads exactly zero.
    pub reduction_factor: Option<f64>,
}

/// Results of the three-experiment validation protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    /// Experiment 1: plain measurement pass on the uncalibrated machine.
    pub baseline: MeasurementSummary,
    /// Experiment 2: the fresh measurement pass the identification ran on.
    pub identification_data: MeasurementSummary,
    /// Experiment 2: identification results, full and both reduced
    /// parameter sets.
    pub identification: Vec<CalibrationResult>,
    /// Experiment 3: measurement pass with the full-set identification
    /// compensated in the controller.
    pub verification: VerificationSummary,
}

impl ProtocolReport {
    /// The full-mask identification row.
    pub fn full_identification(&self) -> &CalibrationResult {
        &self.identification[0]
    }
}

/// Run the three-experiment protocol: (1) baseline measurement pass, (2)
/// identification with the full and both reduced parameter sets, (3)
/// verification pass with the full-set result compensated. The three passes
/// draw from independent noise streams of the same seed.
pub fn three_experiment_protocol(
    true_dev: ParameterDeviation,
    noise: &NoiseModel,
    geometry: &MachineGeometry,
    plan: &ExperimentPlan,
) -> Result<ProtocolReport> {
    let baseline = run_experiment_trial(
        plan,
        true_dev,
        ParameterDeviation::zero(),
        noise,
        geometry,
        0,
    )?;

    let data = run_experiment_trial(
        plan,
        true_dev,
        ParameterDeviation::zero(),
        noise,
        geometry,
        1,
    )?;
    let identification = vec![
        solve_identification(&data.measurements, ParameterMask::full(), geometry)?,
        solve_identification(&data.measurements, ParameterMask::joint_offsets_only(), geometry)?,
        solve_identification(&data.measurements, ParameterMask::leg_lengths_only(), geometry)?,
    ];

    let compensated = identification[0].deviation;
    let verification_run =
        run_experiment_trial(plan, true_dev, compensated, noise, geometry, 2)?;
    let max_abs_before = data.measurements.max_abs();
    let max_abs_after = verification_run.measurements.max_abs();
    let verification = VerificationSummary {
        measurements: verification_run.measurements,
        max_abs_before,
        max_abs_after,
        reduction_factor: (max_abs_after > 0.0).then(|| max_abs_before / max_abs_after),
    };

    Ok(ProtocolReport {
        baseline: MeasurementSummary::new(baseline.measurements),
        identification_data: MeasurementSummary::new(data.measurements),
        identification,
        verification,
    })
}

/// Per-parameter accuracy statistics of a Monte-Carlo identification study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub trials: u32,
    pub repeats: u32,
    pub mode: SimulationMode,
    pub mask: ParameterMask,
    /// Mean |identified - true| per parameter, mm.
    pub mean_abs_error: [f64; PARAMETER_COUNT],
    /// 95th percentile of |identified - true| per parameter, mm.
    pub p95_abs_error: [f64; PARAMETER_COUNT],
    /// Mean |identified - true| across all parameters and trials, mm.
    pub overall_mean_abs_error: f64,
}

/// Repeat the measurement protocol plus identification over independent
/// noise streams and report recovery-error statistics. Trials run in
/// parallel; stream derivation and the ordered reduction keep the result
/// identical to a serial run.
pub fn monte_carlo(
    plan: &ExperimentPlan,
    true_dev: ParameterDeviation,
    noise: &NoiseModel,
    mask: ParameterMask,
    trials: u32,
    geometry: &MachineGeometry,
) -> Result<MonteCarloSummary> {
    if trials < 1 {
        return Err(Error::invalid("monte carlo", "trials must be >= 1"));
    }
    plan.validate()?;

    let per_trial: Vec<Result<[f64; PARAMETER_COUNT]>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let outcome = run_experiment_trial(
                plan,
                true_dev,
                ParameterDeviation::zero(),
                noise,
                geometry,
                trial,
            )?;
            let result = solve_identification(&outcome.measurements, mask, geometry)?;
            let diff = result.deviation.as_vector() - true_dev.as_vector();
            let mut abs = [0.0; PARAMETER_COUNT];
            for i in 0..PARAMETER_COUNT {
                abs[i] = diff[i].abs();
            }
            Ok(abs)
        })
        .collect();

    let mut errors = Vec::with_capacity(trials as usize);
    for item in per_trial {
        errors.push(item?);
    }

    let n = errors.len();
    let mut mean = [0.0; PARAMETER_COUNT];
    let mut p95 = [0.0; PARAMETER_COUNT];
    for param in 0..PARAMETER_COUNT {
        let mut column: Vec<f64> = errors.iter().map(|e| e[param]).collect();
        column.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
        mean[param] = column.iter().sum::<f64>() / n as f64;
        let rank = ((n as f64 * 0.95).ceil() as usize).clamp(1, n);
        p95[param] = column[rank - 1];
    }
    let overall = mean.iter().sum::<f64>() / PARAMETER_COUNT as f64;

    Ok(MonteCarloSummary {
        trials,
        repeats: plan.repeats,
        mode: plan.mode,
        mask,
        mean_abs_error: mean,
        p95_abs_error: p95,
        overall_mean_abs_error: overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn geom() -> MachineGeometry {
        MachineGeometry::default()
    }

    fn random_dev(rng: &mut ChaCha8Rng, range: f64) -> ParameterDeviation {
        ParameterDeviation::new(
            Vector3::from_fn(|_, _| rng.random_range(-range..range)),
            Vector3::from_fn(|_, _| rng.random_range(-range..range)),
        )
    }

    #[test]
    fn nominal_posture_configurations() {
        let g = geom();
        let l = g.nominal_leg_length;

        let (p, rho) = posture_configuration(PostureId::Zero, &g);
        assert_eq!(p.0, Vector3::zeros());
        assert_eq!(rho.0, Vector3::from_element(l));

        let (p, rho) = posture_configuration(PostureId::Max(Axis::X), &g);
        assert_eq!(p.0, Vector3::new(60.0, 0.0, 0.0));
        assert_eq!(rho[Axis::X], l + 60.0);
        // cross-check the passive joints against the inverse kinematics
        let ik = inverse_kinematics(p, ParameterDeviation::zero(), &g, ConfigurationIndices::POSITIVE)
            .unwrap();
        assert!((rho.0 - ik.0).amax() < 1e-9);

        let (p, rho) = posture_configuration(PostureId::Min(Axis::Y), &g);
        assert_eq!(p.0, Vector3::new(0.0, -100.0, 0.0));
        let ik = inverse_kinematics(p, ParameterDeviation::zero(), &g, ConfigurationIndices::POSITIVE)
            .unwrap();
        assert!((rho.0 - ik.0).amax() < 1e-9);
    }

    #[test]
    fn linear_simulation_zero_dev_is_zero() {
        let m = simulate_measurements_linear(ParameterDeviation::zero(), &geom());
        assert_eq!(m.values().amax(), 0.0);
    }

    #[test]
    fn linear_simulation_unit_dev_reads_design_column() {
        let g = geom();
        let dev = ParameterDeviation::new(Vector3::new(1.0, 0.0, 0.0), Vector3::zeros());
        let m = simulate_measurements_linear(dev, &g);
        let design = build_design_matrix(&g);
        for row in 0..MEASUREMENT_COUNT {
            assert_eq!(m.values()[row], design.matrix()[(row, 0)]);
        }
    }

    #[test]
    fn linear_roundtrip_through_solver() {
        let g = geom();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let dev = random_dev(&mut rng, 2.0);
            let m = simulate_measurements_linear(dev, &g);
            let result = solve_identification(&m, ParameterMask::full(), &g).unwrap();
            assert!((result.deviation.as_vector() - dev.as_vector()).amax() < 1e-9);
        }
    }

    #[test]
    fn nonlinear_zero_dev_reads_zero() {
        // nominal geometry keeps every leg exactly parallel at the test postures
        let m = simulate_measurements_nonlinear(ParameterDeviation::zero(), &geom()).unwrap();
        assert!(m.max_abs() < 1e-12, "max {}", m.max_abs());
    }

    #[test]
    fn nonlinear_agrees_with_linear_to_first_order() {
        let g = geom();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let dev = random_dev(&mut rng, 0.1);
            let nonlinear = simulate_measurements_nonlinear(dev, &g).unwrap();
            let linear = simulate_measurements_linear(dev, &g);
            let gap = (nonlinear.values() - linear.values()).amax();
            assert!(gap < 1e-3, "gap {gap}");
        }
    }

    #[test]
    fn nonlinear_quadratic_gap_bound() {
        // |nonlinear - linear| <= C * delta^2 with C frozen from the first
        // implementation run (worst observed ~0.008 / mm).
        const CURVATURE_BOUND: f64 = 0.02;
        let g = geom();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for delta in [0.1, 0.25, 0.5] {
            for _ in 0..50 {
                let dev = random_dev(&mut rng, delta);
                let nonlinear = simulate_measurements_nonlinear(dev, &g).unwrap();
                let linear = simulate_measurements_linear(dev, &g);
                let gap = (nonlinear.values() - linear.values()).amax();
                assert!(gap <= CURVATURE_BOUND * delta * delta, "delta {delta} gap {gap}");
            }
        }
    }

    #[test]
    fn single_length_deviation_matches_row_formula() {
        // Only length_x deviates: the dy_x+ reading follows its deviation
        // equation up to second-order terms.
        let g = geom();
        let dev = ParameterDeviation::new(Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0));
        let m = simulate_measurements_nonlinear(dev, &g).unwrap();
        let linear = simulate_measurements_linear(dev, &g);
        let label = MeasurementLabel {
            axis: Axis::Y,
            leg: Axis::X,
            travel: TravelDirection::Max,
        };
        assert!((m.get(label) - linear.get(label)).abs() < 0.01);
    }

    #[test]
    fn gauge_off_leg_detected() {
        // With joint_max = 0.6 L the mid-leg gauge plane ends up beyond the
        // TCP end of the leg at the maximum posture (mu ~ 1.1).
        let g = MachineGeometry {
            joint_max: 0.6 * 310.25,
            ..MachineGeometry::default()
        };
        let err = simulate_measurements_nonlinear(ParameterDeviation::zero(), &g).unwrap_err();
        assert!(matches!(err, Error::GaugeOffLeg { .. }));
    }

    #[test]
    fn noiseless_run_equals_single_simulation() {
        let g = geom();
        let dev = ParameterDeviation::new(
            Vector3::new(0.2, -0.3, 0.1),
            Vector3::new(0.05, 0.15, -0.25),
        );
        let plan = ExperimentPlan::default();
        let outcome = run_experiment(&plan, dev, &NoiseModel::noiseless(9), &g).unwrap();
        let direct = simulate_measurements_nonlinear(dev, &g).unwrap();
        assert!((outcome.measurements.values() - direct.values()).amax() < 1e-15);
        // 3 legs x 3 repeats x 2 limits x 2 gauges
        assert_eq!(outcome.readings.len(), 36);
    }

    #[test]
    fn seeded_rerun_is_bit_identical() {
        let g = geom();
        let dev = ParameterDeviation::new(
            Vector3::new(0.3, 0.1, -0.2),
            Vector3::new(-0.1, 0.2, 0.3),
        );
        let plan = ExperimentPlan::default();
        let noise = NoiseModel {
            std_dev: 0.01,
            quantization_step: 0.01,
            seed: 42,
        };
        let first = run_experiment(&plan, dev, &noise, &g).unwrap();
        let second = run_experiment(&plan, dev, &noise, &g).unwrap();
        assert_eq!(first, second);

        let other_seed = NoiseModel { seed: 43, ..noise };
        let third = run_experiment(&plan, dev, &other_seed, &g).unwrap();
        assert_ne!(first.measurements, third.measurements);
    }

    #[test]
    fn quantization_rounds_to_step() {
        let g = geom();
        let dev = ParameterDeviation::new(
            Vector3::new(0.3, 0.1, -0.2),
            Vector3::new(-0.1, 0.2, 0.3),
        );
        let plan = ExperimentPlan::default();
        let noise = NoiseModel {
            std_dev: 0.01,
            quantization_step: 0.01,
            seed: 7,
        };
        let outcome = run_experiment(&plan, dev, &noise, &g).unwrap();
        for reading in &outcome.readings {
            let scaled = reading.value_mm / noise.quantization_step;
            assert!((scaled - scaled.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_plans_rejected() {
        let plan = ExperimentPlan {
            repeats: 0,
            ..ExperimentPlan::default()
        };
        assert!(plan.validate().is_err());

        let plan = ExperimentPlan {
            sequence: vec![StationKind::Max, StationKind::Zero],
            ..ExperimentPlan::default()
        };
        assert!(plan.validate().is_err());

        let plan = ExperimentPlan {
            sequence: vec![StationKind::Zero, StationKind::Max, StationKind::Zero],
            ..ExperimentPlan::default()
        };
        assert!(plan.validate().is_err());
    }

    #[test]
    fn noise_free_linear_closed_loop() {
        let g = geom();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let dev = random_dev(&mut rng, 1.5);
            let m = simulate_measurements_linear(dev, &g);
            let result = solve_identification(&m, ParameterMask::full(), &g).unwrap();
            let after =
                simulate_measurements_linear_compensated(dev, result.deviation, &g);
            assert!(after.max_abs() < 1e-9, "after {}", after.max_abs());
        }
    }

    #[test]
    fn noise_free_nonlinear_closed_loop() {
        // Recovery tolerance frozen from the first implementation run: the
        // single linear solve leaves a second-order error amplified by the
        // design-matrix conditioning (worst observed ~0.15 mm over +-1 mm
        // deviations).
        let g = geom();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..50 {
            let dev = random_dev(&mut rng, 1.0);
            let m = simulate_measurements_nonlinear(dev, &g).unwrap();
            let result = solve_identification(&m, ParameterMask::full(), &g).unwrap();
            let err = (result.deviation.as_vector() - dev.as_vector()).amax();
            assert!(err < 0.2, "recovery error {err}");

            let before = m.max_abs();
            let after = simulate_measurements_nonlinear_compensated(dev, result.deviation, &g)
                .unwrap()
                .max_abs();
            assert!(after * 10.0 <= before, "reduction {} -> {}", before, after);
        }
    }

    #[test]
    fn protocol_zero_dev_all_zero() {
        let g = geom();
        let report = three_experiment_protocol(
            ParameterDeviation::zero(),
            &NoiseModel::noiseless(1),
            &g,
            &ExperimentPlan::default(),
        )
        .unwrap();
        assert!(report.baseline.max_abs < 1e-12);
        for row in &report.identification {
            assert!(row.deviation.as_vector().amax() < 1e-12);
            assert!(row.residual_rms < 1e-12);
        }
        assert!(report.verification.max_abs_after < 1e-12);
    }

    #[test]
    fn protocol_reduces_deviations_and_nests_residuals() {
        let g = geom();
        let dev = ParameterDeviation::new(
            Vector3::new(0.6, -0.4, 0.3),
            Vector3::new(-0.2, 0.5, 0.4),
        );
        let report = three_experiment_protocol(
            dev,
            &NoiseModel::noiseless(3),
            &g,
            &ExperimentPlan::default(),
        )
        .unwrap();
        assert!(report.verification.max_abs_after < report.verification.max_abs_before);
        let full_rms = report.identification[0].residual_rms;
        assert!(report.identification[1].residual_rms >= full_rms);
        assert!(report.identification[2].residual_rms >= full_rms);
    }

    #[test]
    fn monte_carlo_deterministic_and_scales() {
        let g = geom();
        let dev = ParameterDeviation::new(
            Vector3::new(0.3, -0.4, 0.25),
            Vector3::new(-0.2, 0.35, -0.3),
        );
        let noise = NoiseModel {
            std_dev: 0.01,
            quantization_step: 0.01,
            seed: 2026,
        };
        let plan = ExperimentPlan::default();
        let a = monte_carlo(&plan, dev, &noise, ParameterMask::full(), 50, &g).unwrap();
        let b = monte_carlo(&plan, dev, &noise, ParameterMask::full(), 50, &g).unwrap();
        assert_eq!(a, b);
        assert!(a.overall_mean_abs_error > 0.0);
        for param in 0..PARAMETER_COUNT {
            assert!(a.p95_abs_error[param] >= a.mean_abs_error[param] * 0.5);
        }
    }
}
