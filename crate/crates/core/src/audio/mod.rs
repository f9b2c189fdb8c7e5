//! Narrowband PCM handling and the simulated telephony channel.

mod biquad;
mod delay;
mod distortion;
mod wav;

pub use biquad::{Biquad, ButterworthCascade};
pub use delay::{apply_delay, DelaySpec};
pub use distortion::{
    apply_distortion, DistortionKind, DistortionOutcome, DistortionParams, DistortionSpec, Range,
};
pub use wav::{load_wav, save_wav};

use crate::error::{Error, Result};

/// Sampling rate of every signal in the stack.
pub const SAMPLE_RATE: u32 = 8000;

/// Mono 8 kHz signal with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcmSignal {
    samples: Vec<f64>,
}

impl PcmSignal {
    /// Rejects non-finite samples; values are clamped to `[-1, 1]`.
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Format(format!("non-finite sample at index {i}")));
        }
        Ok(PcmSignal {
            samples: samples.into_iter().map(|s| s.clamp(-1.0, 1.0)).collect(),
        })
    }

    pub fn silence(len: usize) -> Self {
        PcmSignal {
            samples: vec![0.0; len],
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / SAMPLE_RATE as f64
    }

    pub fn clamp_in_place(&mut self) {
        for s in &mut self.samples {
            *s = s.clamp(-1.0, 1.0);
        }
    }
}

/// Mean power of a block of samples; zero for an empty block.
pub fn mean_power(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64
}

pub fn rms(samples: &[f64]) -> f64 {
    mean_power(samples).sqrt()
}
