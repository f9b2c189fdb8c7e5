use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::DelaySpec;
use crate::bits::Bitstream;
use crate::error::Result;
use crate::seed::derive_seed;
use crate::watermark::{
    validate_alpha, Backend, ChannelCalibration, ChannelCondition, Condition, DecodedBit,
    FrameChannel, Listen, Reception, FRAME_SAMPLES,
};

/// Decoder output on frames that carry no watermark.
///
/// The decoder still emits a bit for such frames: it reads `1` with
/// probability `p_one`, and its confidence is uniform on `[0, max_confidence]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdleModel {
    pub p_one: f64,
    pub max_confidence: f64,
}

impl Default for IdleModel {
    fn default() -> Self {
        IdleModel {
            p_one: 0.65,
            max_confidence: 0.35,
        }
    }
}

/// Frame channel driven by the calibrated crossover table.
///
/// Watermarked frames decode through a binary symmetric (or Gilbert-Elliott)
/// channel. Correct decisions carry confidence in `[0.5, 1]`, flipped ones in
/// `[0, 0.5)`. Random delay shifts the message by whole frames; a receiver
/// that does not acquire the sub-frame phase reads chance-level bits whenever
/// the delay is not a whole number of frames.
#[derive(Debug, Clone)]
pub struct StatisticalChannel {
    calibration: Arc<ChannelCalibration>,
    delay: DelaySpec,
    idle: IdleModel,
}

impl StatisticalChannel {
    pub fn new(calibration: Arc<ChannelCalibration>, delay: DelaySpec) -> Self {
        StatisticalChannel {
            calibration,
            delay,
            idle: IdleModel::default(),
        }
    }

    pub fn with_idle(mut self, idle: IdleModel) -> Self {
        self.idle = idle;
        self
    }

    pub fn calibration(&self) -> &ChannelCalibration {
        &self.calibration
    }

    pub fn idle(&self) -> &IdleModel {
        &self.idle
    }
}

impl FrameChannel for StatisticalChannel {
    fn transmit(
        &self,
        bits: &Bitstream,
        alpha: f64,
        condition: &ChannelCondition,
        listen: &Listen,
        seed: u64,
    ) -> Result<Reception> {
        validate_alpha(alpha)?;
        let cond = Condition::from_channel(condition, alpha);
        let p = self.calibration.crossover(&cond)?;
        let burst = self.calibration.burst_model(&cond)?;

        let mut delay_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
        let delay_samples = self.delay.sample_delay(&mut delay_rng);
        let frame_delay = delay_samples / FRAME_SAMPLES;
        let aligned = listen.align_phase || delay_samples.is_multiple_of(FRAME_SAMPLES);

        // Four draws per frame regardless of branch, so streams stay aligned
        // across strengths and conditions for the same seed.
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1]));
        let mut bad = match burst {
            Some(model) => rng.gen::<f64>() < model.stationary_bad(),
            None => false,
        };
        let window = bits.len() + listen.extra_frames;
        let decoded = (0..window)
            .map(|j| {
                let (u_flip, u_conf, u_bit, u_state): (f64, f64, f64, f64) = rng.gen();
                let in_message = (frame_delay..frame_delay + bits.len()).contains(&j);
                if aligned && in_message {
                    let p_now = match burst {
                        Some(model) => {
                            let rate = model.error_rate(bad);
                            bad = model.step(bad, u_state);
                            rate
                        }
                        None => p,
                    };
                    let error = u_flip < p_now;
                    let confidence = if error {
                        0.5 * u_conf
                    } else {
                        0.5 + 0.5 * u_conf
                    };
                    DecodedBit::new(bits[j - frame_delay] ^ error, confidence)
                } else {
                    let p_one = if aligned { self.idle.p_one } else { 0.5 };
                    DecodedBit::new(u_bit < p_one, u_conf * self.idle.max_confidence)
                }
            })
            .collect();

        Ok(Reception {
            decoded,
            delay_samples,
            true_offset: aligned.then_some(frame_delay),
        })
    }

    fn delay(&self) -> &DelaySpec {
        &self.delay
    }

    fn backend(&self) -> Backend {
        Backend::Statistical
    }
}
