//! On-disk formats: measurement files, calibration reports, experiment
//! configurations and the raw readings log.
//!
//! Everything structured is JSON. Measurement entries are labelled, not
//! positional; ingestion validates the labels and reorders into the
//! canonical measurement order. Text renderings round to 6 decimal places;
//! JSON keeps full precision.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{
    CalibrationResult, MeasurementLabel, MeasurementVector, TravelDirection, CANONICAL_LABELS,
    PARAMETER_NAMES,
};
use crate::error::Error as ModelError;
use crate::geometry::{Axis, MachineGeometry, ParameterDeviation};
use crate::simulator::{
    ExperimentOutcome, ExperimentPlan, MonteCarloSummary, NoiseModel, ProtocolReport, RawReading,
};
use crate::tolerances::MEASUREMENT_SANITY_BOUND_MM;

#[derive(Debug, Error)]
pub enum FileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type FileResult<T> = std::result::Result<T, FileError>;

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> FileResult<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|source| FileError::Json {
        path: path.display().to_string(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> FileResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| FileError::Json {
        path: path.display().to_string(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Unit of the gauge values in a measurement file. Micrometre readings are
/// converted to mm at ingestion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementUnits {
    #[default]
    Mm,
    Um,
}

impl MeasurementUnits {
    fn to_mm(self) -> f64 {
        match self {
            MeasurementUnits::Mm => 1.0,
            MeasurementUnits::Um => 1e-3,
        }
    }
}

/// One labelled gauge difference. `value_mm` is the averaged reading (in the
/// file's units despite the name); when individual `repeats` are present
/// their mean must match it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementEntry {
    pub leg: Axis,
    pub axis: Axis,
    pub posture: TravelDirection,
    pub value_mm: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub repeats: Vec<f64>,
}

/// A complete set of twelve labelled gauge differences plus the geometry
/// they were taken on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementFile {
    #[serde(default)]
    pub geometry: MachineGeometry,
    #[serde(default)]
    pub units: MeasurementUnits,
    pub entries: Vec<MeasurementEntry>,
}

impl MeasurementFile {
    /// Package a simulated experiment for the calibration command.
    pub fn from_experiment(geometry: &MachineGeometry, outcome: &ExperimentOutcome) -> Self {
        let entries = CANONICAL_LABELS
            .iter()
            .map(|label| {
                let repeats: Vec<f64> = outcome
                    .readings
                    .iter()
                    .filter(|r| r.leg == label.leg && r.axis == label.axis && r.posture == label.travel)
                    .map(|r| r.value_mm)
                    .collect();
                MeasurementEntry {
                    leg: label.leg,
                    axis: label.axis,
                    posture: label.travel,
                    value_mm: outcome.measurements.get(*label),
                    repeats,
                }
            })
            .collect();
        MeasurementFile {
            geometry: *geometry,
            units: MeasurementUnits::Mm,
            entries,
        }
    }

    /// Validate, convert units and reorder into the canonical measurement
    /// vector.
    pub fn to_measurement_vector(&self) -> FileResult<MeasurementVector> {
        self.geometry.validate()?;
        let scale = self.units.to_mm();
        let mut labeled = Vec::with_capacity(self.entries.len());
        for entry in &self.entries {
            let label = MeasurementLabel::new(entry.axis, entry.leg, entry.posture)?;
            if !entry.value_mm.is_finite() {
                return Err(ModelError::invalid(
                    "measurement entry",
                    format!("non-finite value for {label}"),
                )
                .into());
            }
            if !entry.repeats.is_empty() {
                let mean = entry.repeats.iter().sum::<f64>() / entry.repeats.len() as f64;
                if (mean - entry.value_mm).abs() > 1e-9 {
                    return Err(ModelError::invalid(
                        "measurement entry",
                        format!(
                            "{label}: value {} does not match the mean of its repeats {}",
                            entry.value_mm, mean
                        ),
                    )
                    .into());
                }
            }
            labeled.push((label, entry.value_mm * scale));
        }
        let vector = MeasurementVector::from_labeled(&labeled)?;
        vector.validate_magnitude(MEASUREMENT_SANITY_BOUND_MM)?;
        Ok(vector)
    }

    pub fn load(path: &Path) -> FileResult<Self> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> FileResult<()> {
        write_json(path, self)
    }
}

/// Calibration report: identified parameters per mask, residuals and
/// conditioning, alongside the ingested measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub geometry: MachineGeometry,
    pub measurements: MeasurementVector,
    pub results: Vec<CalibrationResult>,
}

impl CalibrationReport {
    pub fn load(path: &Path) -> FileResult<Self> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> FileResult<()> {
        write_json(path, self)
    }

    /// Fixed-width table: one row per mask, identified parameters (dash for
    /// parameters held at zero), residual r.m.s. and conditioning.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "calibration report");
        let _ = writeln!(
            out,
            "geometry: L = {:.6} mm, travel [{:+.6}, {:+.6}] mm",
            self.geometry.nominal_leg_length, self.geometry.joint_min, self.geometry.joint_max
        );
        let _ = writeln!(out, "measurements (mm):");
        for (label, value) in self.measurements.iter_labeled() {
            let _ = writeln!(out, "  {label:<6} {value:+.6}");
        }
        let _ = write!(out, "{:<14}", "mask");
        for name in PARAMETER_NAMES {
            let _ = write!(out, "{name:>16}");
        }
        let _ = writeln!(out, "{:>12}{:>12}", "rms", "cond");
        for result in &self.results {
            let _ = write!(out, "{:<14}", result.mask.name());
            let values = result.deviation.as_vector();
            for column in 0..PARAMETER_NAMES.len() {
                if result.mask.includes(column) {
                    let _ = write!(out, "{:>16.6}", values[column]);
                } else {
                    let _ = write!(out, "{:>16}", "-");
                }
            }
            let _ = writeln!(
                out,
                "{:>12.6}{:>12.3}",
                result.residual_rms, result.condition_number
            );
        }
        out
    }
}

/// Input of the `simulate` and `pipeline` commands.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub geometry: MachineGeometry,
    pub true_deviation: ParameterDeviation,
    pub noise: NoiseModel,
    pub plan: ExperimentPlan,
    /// Monte-Carlo trial count for `simulate`; a single experiment when
    /// absent.
    pub trials: Option<u32>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> FileResult<Self> {
        let config: ExperimentConfig = read_json(path)?;
        config.geometry.validate()?;
        config.true_deviation.validate(&config.geometry)?;
        config.noise.validate()?;
        config.plan.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> FileResult<()> {
        write_json(path, self)
    }
}

/// Geometry-only file for the global `--geometry` flag.
pub fn load_geometry(path: &Path) -> FileResult<MachineGeometry> {
    let geometry: MachineGeometry = read_json(path)?;
    geometry.validate()?;
    Ok(geometry)
}

/// Raw readings log, one gauge difference per row.
pub fn write_readings_csv(path: &Path, readings: &[RawReading]) -> FileResult<()> {
    let mut out = String::from("trial,leg,axis,posture,repeat,value_mm\n");
    for r in readings {
        let posture = match r.posture {
            TravelDirection::Max => "max",
            TravelDirection::Min => "min",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.trial, r.leg, r.axis, posture, r.repeat, r.value_mm
        );
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn save_monte_carlo(path: &Path, summary: &MonteCarloSummary) -> FileResult<()> {
    write_json(path, summary)
}

/// Pipeline report file: protocol results plus the injected truth for
/// closed-loop comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config: ExperimentConfig,
    pub protocol: ProtocolReport,
}

impl PipelineReport {
    pub fn load(path: &Path) -> FileResult<Self> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> FileResult<()> {
        write_json(path, self)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let p = &self.protocol;
        let _ = writeln!(out, "three-experiment protocol");
        let _ = writeln!(
            out,
            "experiment 1 (baseline): max |reading| = {:.6} mm, rms = {:.6} mm",
            p.baseline.max_abs, p.baseline.rms
        );
        let _ = writeln!(out, "experiment 2 (identification):");
        let report = CalibrationReport {
            geometry: self.config.geometry,
            measurements: p.identification_data.measurements,
            results: p.identification.clone(),
        };
        for line in report.render_text().lines().skip(2) {
            let _ = writeln!(out, "  {line}");
        }
        let _ = writeln!(
            out,
            "experiment 3 (verification): max |reading| {:.6} -> {:.6} mm{}",
            p.verification.max_abs_before,
            p.verification.max_abs_after,
            match p.verification.reduction_factor {
                Some(f) => format!(" ({f:.1}x reduction)"),
                None => String::from(" (exact)"),
            }
        );
        out
    }
}
