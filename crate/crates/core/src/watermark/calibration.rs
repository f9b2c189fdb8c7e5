use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio::DistortionKind;
use crate::error::{Error, Result};
use crate::watermark::{ChannelCondition, GilbertElliott};

const BUNDLED: &str = include_str!("../../data/calibration.json");

/// Coverage values are matched up to this tolerance.
const COVERAGE_TOL: f64 = 1e-6;

/// One row of the table: a distortion condition measured at each strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub kind: DistortionKind,
    pub coverage: f64,
    pub bit_accuracy: Vec<f64>,
    #[serde(default)]
    pub perfect_recovery: Vec<f64>,
}

/// Channel condition plus strength, the key of a crossover lookup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub kind: DistortionKind,
    pub coverage: f64,
    pub alpha: f64,
}

impl Condition {
    pub fn new(kind: DistortionKind, coverage: f64, alpha: f64) -> Self {
        Condition {
            kind,
            coverage,
            alpha,
        }
    }

    pub fn from_channel(channel: &ChannelCondition, alpha: f64) -> Self {
        Condition::new(channel.kind, channel.coverage, alpha)
    }
}

/// Bit-accuracy table mapping (kind, coverage, alpha) to a crossover probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCalibration {
    #[serde(default)]
    pub description: String,
    pub alphas: Vec<f64>,
    pub conditions: Vec<CalibrationEntry>,
    /// Mean burst length in frames; `Some` switches bit errors to a Gilbert-Elliott chain.
    #[serde(default)]
    pub burst_frames: Option<f64>,
}

impl ChannelCalibration {
    /// The table shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled calibration table is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: ChannelCalibration = serde_json::from_str(text)?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn with_bursts(mut self, mean_burst_frames: Option<f64>) -> Self {
        self.burst_frames = mean_burst_frames;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.alphas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "calibration alphas must be non-empty and strictly increasing".into(),
            ));
        }
        for entry in &self.conditions {
            if entry.bit_accuracy.len() != self.alphas.len() {
                return Err(Error::InvalidConfig(format!(
                    "{} @ {}: {} accuracies for {} alphas",
                    entry.kind,
                    entry.coverage,
                    entry.bit_accuracy.len(),
                    self.alphas.len()
                )));
            }
            if let Some(a) = entry
                .bit_accuracy
                .iter()
                .find(|a| !(0.5..=1.0).contains(*a))
            {
                return Err(Error::InvalidConfig(format!(
                    "{} @ {}: accuracy {a} gives p outside [0, 0.5]",
                    entry.kind, entry.coverage
                )));
            }
        }
        if let Some(b) = self.burst_frames {
            if b.is_nan() || b < 1.0 {
                return Err(Error::InvalidConfig(format!("mean burst length {b} < 1")));
            }
        }
        Ok(())
    }

    /// Table rows in file order.
    pub fn entries(&self) -> &[CalibrationEntry] {
        &self.conditions
    }

    fn entry(&self, kind: DistortionKind, coverage: f64) -> Result<&CalibrationEntry> {
        self.conditions
            .iter()
            .find(|e| {
                e.kind == kind
                    && (kind == DistortionKind::Clean
                        || (e.coverage - coverage).abs() < COVERAGE_TOL)
            })
            .ok_or_else(|| {
                Error::CalibrationMiss(format!("no entry for {kind} at coverage {coverage}"))
            })
    }

    /// Bit accuracy, linearly interpolated in alpha between table columns.
    pub fn bit_accuracy(&self, condition: &Condition) -> Result<f64> {
        let entry = self.entry(condition.kind, condition.coverage)?;
        interpolate(&self.alphas, &entry.bit_accuracy, condition.alpha).ok_or_else(|| {
            Error::CalibrationMiss(format!(
                "alpha {} outside [{}, {}]",
                condition.alpha,
                self.alphas[0],
                self.alphas[self.alphas.len() - 1]
            ))
        })
    }

    /// Crossover probability `p = 1 - bit_accuracy`.
    pub fn crossover(&self, condition: &Condition) -> Result<f64> {
        Ok((1.0 - self.bit_accuracy(condition)?).clamp(0.0, 0.5))
    }

    /// Burst model matched to the crossover of `condition`, when enabled.
    pub fn burst_model(&self, condition: &Condition) -> Result<Option<GilbertElliott>> {
        match self.burst_frames {
            None => Ok(None),
            Some(len) => Ok(Some(GilbertElliott::matched(
                self.crossover(condition)?,
                len,
            ))),
        }
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let eps = 1e-9;
    if x < xs[0] - eps || x > xs[xs.len() - 1] + eps {
        return None;
    }
    if xs.len() == 1 {
        return Some(ys[0]);
    }
    let i = xs
        .windows(2)
        .position(|w| x <= w[1] + eps)
        .unwrap_or(xs.len() - 2);
    let t = ((x - xs[i]) / (xs[i + 1] - xs[i])).clamp(0.0, 1.0);
    Some(ys[i] + t * (ys[i + 1] - ys[i]))
}
