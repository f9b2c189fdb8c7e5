use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{PcmSignal, SAMPLE_RATE};

/// Channel propagation delay drawn uniformly from `[0, max_delay_ms]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySpec {
    pub max_delay_ms: f64,
}

impl Default for DelaySpec {
    fn default() -> Self {
        DelaySpec {
            max_delay_ms: 120.0,
        }
    }
}

impl DelaySpec {
    pub fn none() -> Self {
        DelaySpec { max_delay_ms: 0.0 }
    }

    /// Draws a delay in whole samples.
    pub fn sample_delay<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.max_delay_ms <= 0.0 {
            return 0;
        }
        let ms = rng.gen_range(0.0..=self.max_delay_ms);
        (ms * SAMPLE_RATE as f64 / 1000.0).round() as usize
    }

    pub fn max_delay_samples(&self) -> usize {
        (self.max_delay_ms.max(0.0) * SAMPLE_RATE as f64 / 1000.0).round() as usize
    }
}

/// Prepends a random stretch of silence; returns the delayed signal and the delay in samples.
pub fn apply_delay<R: Rng + ?Sized>(
    signal: &PcmSignal,
    spec: &DelaySpec,
    rng: &mut R,
) -> (PcmSignal, usize) {
    let delay = spec.sample_delay(rng);
    let mut samples = vec![0.0; delay];
    samples.extend_from_slice(signal.samples());
    (PcmSignal { samples }, delay)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn delay_prepends_silence_within_bound() {
        let signal = PcmSignal::new(vec![0.5; 100]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let (out, d) = apply_delay(&signal, &DelaySpec::default(), &mut rng);
            assert!(d <= 960);
            assert_eq!(out.len(), 100 + d);
            assert!(out.samples()[..d].iter().all(|&s| s == 0.0));
            assert_eq!(&out.samples()[d..], signal.samples());
        }
    }

    #[test]
    fn zero_delay_spec_is_identity() {
        let signal = PcmSignal::new(vec![0.1, 0.2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (out, d) = apply_delay(&signal, &DelaySpec::none(), &mut rng);
        assert_eq!(d, 0);
        assert_eq!(out, signal);
    }
}
