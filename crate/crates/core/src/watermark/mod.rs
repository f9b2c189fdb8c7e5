//! One-bit-per-frame watermark channel with a calibrated statistical backend
//! and a signal-level spread-spectrum backend.

mod bsc;
mod calibration;
mod carrier;
mod spread;
mod statistical;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bsc::{bsc_transmit, flip_with_probability, GilbertElliott};
pub use calibration::{CalibrationEntry, ChannelCalibration, Condition};
pub use carrier::synthetic_speech;
pub use spread::{
    ss_decode, ss_embed, CarrierSource, SpreadSpectrumChannel, SpreadSpectrumCodec,
    DEFAULT_PN_SEED, WATERMARK_GAIN,
};
pub use statistical::{IdleModel, StatisticalChannel};

use crate::audio::{DelaySpec, DistortionKind};
use crate::bits::Bitstream;
use crate::error::{Error, Result};

/// Samples per watermark frame (40 ms at 8 kHz).
pub const FRAME_SAMPLES: usize = 320;
/// Duration of one frame in seconds.
pub const FRAME_SECS: f64 = 0.04;
/// Duration of one sample in seconds.
pub const SAMPLE_SECS: f64 = 1.0 / 8000.0;
pub const MIN_ALPHA: f64 = 0.6;
pub const MAX_ALPHA: f64 = 1.0;

/// Hard bit decision with the decoder's confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodedBit {
    pub bit: bool,
    pub confidence: f64,
}

impl DecodedBit {
    pub fn new(bit: bool, confidence: f64) -> Self {
        DecodedBit {
            bit,
            confidence: confidence.clamp(0.0, 1.0),
        }
    }
}

/// Hard decisions of a decoded run, in order.
pub fn hard_bits(decoded: &[DecodedBit]) -> Bitstream {
    decoded.iter().map(|d| d.bit).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Statistical,
    SpreadSpectrum,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Statistical => "statistical",
            Backend::SpreadSpectrum => "spread_spectrum",
        })
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "statistical" | "bsc" => Ok(Backend::Statistical),
            "spread_spectrum" | "ss" | "signal" => Ok(Backend::SpreadSpectrum),
            other => Err(Error::Parse(format!("unknown backend {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameChannelConfig {
    pub frame_samples: usize,
    pub alpha: f64,
    pub backend: Backend,
}

impl Default for FrameChannelConfig {
    fn default() -> Self {
        FrameChannelConfig {
            frame_samples: FRAME_SAMPLES,
            alpha: MIN_ALPHA,
            backend: Backend::Statistical,
        }
    }
}

impl FrameChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_samples != FRAME_SAMPLES {
            return Err(Error::InvalidConfig(format!(
                "frame_samples must be {FRAME_SAMPLES}, got {}",
                self.frame_samples
            )));
        }
        validate_alpha(self.alpha)
    }
}

pub fn validate_alpha(alpha: f64) -> Result<()> {
    if !(MIN_ALPHA - 1e-9..=MAX_ALPHA + 1e-9).contains(&alpha) {
        return Err(Error::InvalidConfig(format!(
            "alpha {alpha} outside [{MIN_ALPHA}, {MAX_ALPHA}]"
        )));
    }
    Ok(())
}

/// What the receiver does while listening for one transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Listen {
    /// Frames decoded beyond the transmission length.
    pub extra_frames: usize,
    /// Whether the receiver acquires the sub-frame phase before decoding.
    /// Without it, frames are decoded on the nominal grid.
    pub align_phase: bool,
}

impl Listen {
    pub fn new(extra_frames: usize) -> Self {
        Listen {
            extra_frames,
            align_phase: true,
        }
    }
}

/// Receiver-side view of one transmission plus ground truth for diagnostics.
#[derive(Debug, Clone)]
pub struct Reception {
    pub decoded: Vec<DecodedBit>,
    pub delay_samples: usize,
    /// Frame index in `decoded` where the transmission starts, when the
    /// receiver's frame grid lines up with it.
    pub true_offset: Option<usize>,
}

/// Channel-level distortion applied to a transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelCondition {
    pub kind: DistortionKind,
    pub coverage: f64,
}

impl ChannelCondition {
    pub fn clean() -> Self {
        ChannelCondition {
            kind: DistortionKind::Clean,
            coverage: 0.0,
        }
    }

    pub fn new(kind: DistortionKind, coverage: f64) -> Self {
        ChannelCondition { kind, coverage }
    }
}

impl fmt::Display for ChannelCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind == DistortionKind::Clean {
            f.write_str("clean")
        } else {
            write!(f, "{}@{:.0}%", self.kind, self.coverage * 100.0)
        }
    }
}

/// Transport of a bitstream through the watermark layer and the telephony
/// channel. Both backends implement it, so upper layers are backend-agnostic.
pub trait FrameChannel: Send + Sync {
    fn transmit(
        &self,
        bits: &Bitstream,
        alpha: f64,
        condition: &ChannelCondition,
        listen: &Listen,
        seed: u64,
    ) -> Result<Reception>;

    fn delay(&self) -> &DelaySpec;

    fn backend(&self) -> Backend;
}
