use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bits::Bitstream;
use crate::error::{Error, Result};
use crate::watermark::{ChannelCalibration, Condition};

/// Two-state Markov bit-error model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GilbertElliott {
    pub p_good: f64,
    pub p_bad: f64,
    /// Per-frame probability of moving good -> bad.
    pub p_good_to_bad: f64,
    /// Per-frame probability of moving bad -> good.
    pub p_bad_to_good: f64,
}

impl GilbertElliott {
    /// Chain whose long-run error rate equals `p`, with error rates p/4 and
    /// min(0.4, 4p) and a mean bad-state dwell of `mean_burst_frames`.
    pub fn matched(p: f64, mean_burst_frames: f64) -> Self {
        let p_good = p / 4.0;
        let p_bad = (4.0 * p).min(0.4).max(p);
        let p_bad_to_good = 1.0 / mean_burst_frames.max(1.0);
        let occupancy = if p_bad > p_good {
            ((p - p_good) / (p_bad - p_good)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let p_good_to_bad = if occupancy >= 1.0 {
            1.0
        } else {
            (p_bad_to_good * occupancy / (1.0 - occupancy)).min(1.0)
        };
        GilbertElliott {
            p_good,
            p_bad,
            p_good_to_bad,
            p_bad_to_good,
        }
    }

    /// Long-run fraction of frames spent in the bad state.
    pub fn stationary_bad(&self) -> f64 {
        let total = self.p_good_to_bad + self.p_bad_to_good;
        if total == 0.0 {
            0.0
        } else {
            self.p_good_to_bad / total
        }
    }

    pub fn mean_error_rate(&self) -> f64 {
        let pi = self.stationary_bad();
        pi * self.p_bad + (1.0 - pi) * self.p_good
    }

    pub fn error_rate(&self, bad: bool) -> f64 {
        if bad {
            self.p_bad
        } else {
            self.p_good
        }
    }

    /// Next state given a uniform draw `u`.
    pub fn step(&self, bad: bool, u: f64) -> bool {
        if bad {
            u >= self.p_bad_to_good
        } else {
            u < self.p_good_to_bad
        }
    }

    /// Error indicator sequence starting from the stationary distribution.
    pub fn error_pattern<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<bool> {
        let mut bad = rng.gen::<f64>() < self.stationary_bad();
        (0..len)
            .map(|_| {
                let flip = rng.gen::<f64>() < self.error_rate(bad);
                bad = self.step(bad, rng.gen());
                flip
            })
            .collect()
    }
}

/// Flips each bit independently with probability `p`.
pub fn flip_with_probability<R: Rng + ?Sized>(bits: &Bitstream, p: f64, rng: &mut R) -> Bitstream {
    bits.iter().map(|&b| b ^ (rng.gen::<f64>() < p)).collect()
}

/// Passes `bits` through the calibrated binary channel for `condition`.
pub fn bsc_transmit(
    bits: &Bitstream,
    calibration: &ChannelCalibration,
    condition: &Condition,
    seed: u64,
) -> Result<Bitstream> {
    let p = calibration.crossover(condition)?;
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::CalibrationMiss(format!(
            "crossover {p} outside [0, 0.5]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match calibration.burst_model(condition)? {
        None => flip_with_probability(bits, p, &mut rng),
        Some(model) => {
            let errors = model.error_pattern(bits.len(), &mut rng);
            bits.iter().zip(errors).map(|(&b, e)| b ^ e).collect()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::DistortionKind;

    #[test]
    fn zero_crossover_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bits = Bitstream::random(1000, &mut rng);
        assert_eq!(flip_with_probability(&bits, 0.0, &mut rng), bits);
    }

    #[test]
    fn clean_rate_matches_table() {
        let table = ChannelCalibration::bundled();
        let cond = Condition::new(DistortionKind::Clean, 0.0, 0.6);
        let bits = Bitstream::zeros(200_000);
        let out = bsc_transmit(&bits, &table, &cond, 3).unwrap();
        let rate = out.count_ones() as f64 / bits.len() as f64;
        assert!((rate - 0.08).abs() < 0.003, "{rate}");
        assert_eq!(out, bsc_transmit(&bits, &table, &cond, 3).unwrap());
    }

    #[test]
    fn unknown_condition_is_calibration_miss() {
        let table = ChannelCalibration::bundled();
        let cond = Condition::new(DistortionKind::Lowpass, 0.5, 0.6);
        assert!(matches!(
            bsc_transmit(&Bitstream::zeros(4), &table, &cond, 0),
            Err(Error::CalibrationMiss(_))
        ));
    }

    #[test]
    fn gilbert_elliott_matches_mean_and_clusters() {
        let model = GilbertElliott::matched(0.08, 8.0);
        assert!((model.mean_error_rate() - 0.08).abs() < 1e-12);
        assert!((model.p_bad - 0.32).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let errors = model.error_pattern(400_000, &mut rng);
        let rate = errors.iter().filter(|&&e| e).count() as f64 / errors.len() as f64;
        assert!((rate - 0.08).abs() < 0.005, "{rate}");
        // Clustering: P(error | previous error) exceeds the marginal rate.
        let pairs = errors.windows(2).filter(|w| w[0]).count() as f64;
        let both = errors.windows(2).filter(|w| w[0] && w[1]).count() as f64;
        assert!(both / pairs > 0.12, "{}", both / pairs);
    }

    #[test]
    fn burst_table_keeps_mean_rate() {
        let table = ChannelCalibration::bundled().with_bursts(Some(6.0));
        let cond = Condition::new(DistortionKind::WhiteNoise, 0.8, 1.0);
        let out = bsc_transmit(&Bitstream::zeros(300_000), &table, &cond, 1).unwrap();
        let rate = out.count_ones() as f64 / 300_000.0;
        assert!((rate - 0.111).abs() < 0.006, "{rate}");
    }
}
