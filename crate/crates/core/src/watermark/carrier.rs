use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::audio::{rms, Biquad, PcmSignal, SAMPLE_RATE};

/// Target RMS of the synthetic carrier (-20 dBFS).
const CARRIER_RMS: f64 = 0.1;

/// Speech-like carrier: a glottal pulse train plus breath noise shaped by
/// three formant resonators, under a syllable-rate envelope.
pub fn synthetic_speech(len: usize, seed: u64) -> PcmSignal {
    if len == 0 {
        return PcmSignal::silence(0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = SAMPLE_RATE as f64;
    let pitch_hz = rng.gen_range(95.0..220.0);
    let syllable_hz = rng.gen_range(3.0..5.5);
    let formants = [
        (rng.gen_range(400.0..800.0), 5.0, 1.0),
        (rng.gen_range(1000.0..1800.0), 8.0, 0.6),
        (rng.gen_range(2200.0..3000.0), 10.0, 0.35),
    ];
    let mut filters: Vec<(Biquad, f64)> = formants
        .iter()
        .map(|&(f, q, g)| (Biquad::bandpass(f, q, fs), g))
        .collect();

    let mut phase = 0.0;
    let mut samples = Vec::with_capacity(len);
    for i in 0..len {
        let t = i as f64 / fs;
        // Slow pitch drift keeps the pulse train from being strictly periodic.
        let f0 = pitch_hz * (1.0 + 0.05 * (2.0 * PI * 0.7 * t).sin());
        phase += f0 / fs;
        let pulse = if phase >= 1.0 {
            phase -= 1.0;
            1.0
        } else {
            0.0
        };
        let noise: f64 = rng.sample(StandardNormal);
        let excitation = pulse * 4.0 + 0.3 * noise;
        let voiced: f64 = filters
            .iter_mut()
            .map(|(f, g)| *g * f.process(excitation))
            .sum();
        let envelope = 0.15 + 0.85 * (PI * syllable_hz * t).sin().abs();
        samples.push(voiced * envelope);
    }

    let level = rms(&samples);
    let scale = if level > 0.0 {
        CARRIER_RMS / level
    } else {
        0.0
    };
    PcmSignal::new(samples.into_iter().map(|s| s * scale).collect())
        .expect("synthetic carrier is finite")
}
