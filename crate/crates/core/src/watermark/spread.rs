use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::{apply_distortion, DelaySpec, DistortionParams, DistortionSpec, PcmSignal};
use crate::bits::Bitstream;
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::watermark::{
    synthetic_speech, validate_alpha, Backend, ChannelCondition, DecodedBit, FrameChannel, Listen,
    Reception, FRAME_SAMPLES,
};

/// Chip amplitude at alpha = 1 (-20 dBFS watermark power).
pub const WATERMARK_GAIN: f64 = 0.1;
/// Public PN seed shared by both endpoints.
pub const DEFAULT_PN_SEED: u64 = 0x5EED_CA11;

/// Correlation z-scores mapped linearly onto confidence 0..1.
const Z_FLOOR: f64 = 1.5;
const Z_FULL: f64 = 4.5;

/// Direct-sequence spread-spectrum codec carrying one bit per frame.
#[derive(Debug, Clone)]
pub struct SpreadSpectrumCodec {
    pn: Vec<f64>,
    gain: f64,
}

impl SpreadSpectrumCodec {
    pub fn new(pn_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(pn_seed);
        let pn = (0..FRAME_SAMPLES)
            .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            .collect();
        SpreadSpectrumCodec {
            pn,
            gain: WATERMARK_GAIN,
        }
    }

    pub fn pn(&self) -> &[f64] {
        &self.pn
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    fn check_frame(frame: &[f64]) -> Result<()> {
        if frame.len() != FRAME_SAMPLES {
            return Err(Error::FrameSize {
                expected: FRAME_SAMPLES,
                got: frame.len(),
            });
        }
        Ok(())
    }

    /// Adds `±alpha·g·PN` to the frame, the sign carrying the bit.
    pub fn embed_frame(&self, frame: &[f64], bit: bool, alpha: f64) -> Result<Vec<f64>> {
        Self::check_frame(frame)?;
        let amp = if bit {
            alpha * self.gain
        } else {
            -alpha * self.gain
        };
        Ok(frame
            .iter()
            .zip(&self.pn)
            .map(|(x, c)| (x + amp * c).clamp(-1.0, 1.0))
            .collect())
    }

    /// Sign of the PN correlation; confidence ramps with its z-score.
    pub fn decode_frame(&self, frame: &[f64]) -> Result<DecodedBit> {
        Self::check_frame(frame)?;
        let corr: f64 = frame.iter().zip(&self.pn).map(|(x, c)| x * c).sum();
        let energy: f64 = frame.iter().map(|x| x * x).sum();
        Ok(decision(corr, energy))
    }

    /// Embeds consecutive bits into consecutive frames of `carrier` starting at `start_sample`.
    pub fn embed_stream_at(
        &self,
        bits: &Bitstream,
        carrier: &PcmSignal,
        alpha: f64,
        start_sample: usize,
    ) -> Result<PcmSignal> {
        let needed = start_sample + bits.len() * FRAME_SAMPLES;
        if carrier.len() < needed {
            return Err(Error::CarrierTooShort {
                needed,
                available: carrier.len(),
            });
        }
        let mut out = carrier.samples().to_vec();
        for (i, &bit) in bits.iter().enumerate() {
            let s = start_sample + i * FRAME_SAMPLES;
            let marked = self.embed_frame(&out[s..s + FRAME_SAMPLES], bit, alpha)?;
            out[s..s + FRAME_SAMPLES].copy_from_slice(&marked);
        }
        PcmSignal::new(out)
    }

    pub fn embed_stream(
        &self,
        bits: &Bitstream,
        carrier: &PcmSignal,
        alpha: f64,
    ) -> Result<PcmSignal> {
        self.embed_stream_at(bits, carrier, alpha, 0)
    }

    /// Decodes `n_bits` frames beginning `start_sample` samples into the signal.
    pub fn decode_stream_at(
        &self,
        signal: &PcmSignal,
        start_sample: usize,
        n_bits: usize,
    ) -> Result<Vec<DecodedBit>> {
        let needed = start_sample + n_bits * FRAME_SAMPLES;
        if signal.len() < needed {
            return Err(Error::CarrierTooShort {
                needed,
                available: signal.len(),
            });
        }
        signal.samples()[start_sample..needed]
            .chunks_exact(FRAME_SAMPLES)
            .map(|frame| self.decode_frame(frame))
            .collect()
    }

    pub fn decode_stream(
        &self,
        signal: &PcmSignal,
        offset_frames: usize,
        n_bits: usize,
    ) -> Result<Vec<DecodedBit>> {
        self.decode_stream_at(signal, offset_frames * FRAME_SAMPLES, n_bits)
    }

    /// PN correlation at every sample lag `s`, i.e. `sum_k x[s+k]·pn[k]`.
    pub fn correlate_all(&self, samples: &[f64]) -> Vec<f64> {
        let n = samples.len();
        if n < FRAME_SAMPLES {
            return Vec::new();
        }
        let size = (n + FRAME_SAMPLES).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut x: Vec<Complex<f64>> = samples.iter().map(|&s| Complex::new(s, 0.0)).collect();
        x.resize(size, Complex::new(0.0, 0.0));
        let mut p: Vec<Complex<f64>> = self.pn.iter().map(|&c| Complex::new(c, 0.0)).collect();
        p.resize(size, Complex::new(0.0, 0.0));
        forward.process(&mut x);
        forward.process(&mut p);
        for (a, b) in x.iter_mut().zip(&p) {
            *a *= b.conj();
        }
        inverse.process(&mut x);
        let scale = 1.0 / size as f64;
        x[..=n - FRAME_SAMPLES]
            .iter()
            .map(|c| c.re * scale)
            .collect()
    }

    /// Sample phase in `0..320` whose frame grid maximizes total |correlation|
    /// over `frames` frames.
    pub fn acquire_phase(&self, signal: &PcmSignal, frames: usize) -> usize {
        let corr = self.correlate_all(signal.samples());
        (0..FRAME_SAMPLES)
            .map(|phase| {
                let score: f64 = (0..frames)
                    .filter_map(|j| corr.get(phase + j * FRAME_SAMPLES))
                    .map(|c| c.abs())
                    .sum();
                (phase, score)
            })
            .fold(
                (0, f64::MIN),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            )
            .0
    }
}

fn decision(corr: f64, energy: f64) -> DecodedBit {
    if energy <= 0.0 {
        return DecodedBit::new(false, 0.0);
    }
    // Normalized correlation times sqrt(320): roughly N(0, 1) for frames without a watermark.
    let z = corr / energy.sqrt();
    let confidence = ((z.abs() - Z_FLOOR) / (Z_FULL - Z_FLOOR)).clamp(0.0, 1.0);
    DecodedBit::new(corr > 0.0, confidence)
}

pub fn ss_embed(frame: &[f64], bit: bool, alpha: f64, pn_seed: u64) -> Result<Vec<f64>> {
    SpreadSpectrumCodec::new(pn_seed).embed_frame(frame, bit, alpha)
}

pub fn ss_decode(frame: &[f64], pn_seed: u64) -> Result<DecodedBit> {
    SpreadSpectrumCodec::new(pn_seed).decode_frame(frame)
}

/// Where host audio comes from.
#[derive(Debug, Clone)]
pub enum CarrierSource {
    Synthetic,
    /// Recordings used in turn; shorter ones are looped.
    Corpus(Arc<Vec<PcmSignal>>),
}

/// Frame channel that embeds into audio, runs the telephony channel and
/// decodes with a per-sample phase search.
#[derive(Debug, Clone)]
pub struct SpreadSpectrumChannel {
    codec: SpreadSpectrumCodec,
    delay: DelaySpec,
    params: DistortionParams,
    carrier: CarrierSource,
}

impl SpreadSpectrumChannel {
    pub fn new(delay: DelaySpec) -> Self {
        SpreadSpectrumChannel {
            codec: SpreadSpectrumCodec::new(DEFAULT_PN_SEED),
            delay,
            params: DistortionParams::default(),
            carrier: CarrierSource::Synthetic,
        }
    }

    pub fn with_params(mut self, params: DistortionParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_corpus(mut self, corpus: Vec<PcmSignal>) -> Result<Self> {
        if corpus.iter().all(|s| s.is_empty()) {
            return Err(Error::InvalidConfig("carrier corpus holds no audio".into()));
        }
        self.carrier = CarrierSource::Corpus(Arc::new(corpus));
        Ok(self)
    }

    pub fn codec(&self) -> &SpreadSpectrumCodec {
        &self.codec
    }

    fn host_audio(&self, len: usize, seed: u64) -> PcmSignal {
        match &self.carrier {
            CarrierSource::Synthetic => synthetic_speech(len, seed),
            CarrierSource::Corpus(corpus) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let usable: Vec<&PcmSignal> = corpus.iter().filter(|s| !s.is_empty()).collect();
                let source = usable[rng.gen_range(0..usable.len())].samples();
                let start = rng.gen_range(0..source.len());
                let samples = source
                    .iter()
                    .cycle()
                    .skip(start)
                    .take(len)
                    .copied()
                    .collect();
                PcmSignal::new(samples).expect("corpus audio is finite")
            }
        }
    }
}

impl FrameChannel for SpreadSpectrumChannel {
    fn transmit(
        &self,
        bits: &Bitstream,
        alpha: f64,
        condition: &ChannelCondition,
        listen: &Listen,
        seed: u64,
    ) -> Result<Reception> {
        validate_alpha(alpha)?;
        let mut delay_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
        let delay_samples = self.delay.sample_delay(&mut delay_rng);
        let window = bits.len() + listen.extra_frames;
        let len = (window + 1) * FRAME_SAMPLES + self.delay.max_delay_samples();
        let host = self.host_audio(len, derive_seed(seed, &[2]));
        let marked = self
            .codec
            .embed_stream_at(bits, &host, alpha, delay_samples)?;

        let mut samples = marked.into_samples();
        let span = delay_samples..delay_samples + bits.len() * FRAME_SAMPLES;
        if !span.is_empty() {
            let mut spec =
                DistortionSpec::new(condition.kind, condition.coverage, derive_seed(seed, &[3]));
            spec.params = self.params.clone();
            let region = PcmSignal::new(samples[span.clone()].to_vec())?;
            let distorted = apply_distortion(&region, &spec)?;
            samples[span].copy_from_slice(distorted.signal.samples());
        }
        let received = PcmSignal::new(samples)?;

        let phase = if listen.align_phase {
            self.codec.acquire_phase(&received, window)
        } else {
            0
        };
        let decoded = self.codec.decode_stream_at(&received, phase, window)?;

        let lag = delay_samples as i64 - phase as i64;
        let frames = (lag as f64 / FRAME_SAMPLES as f64).round() as i64;
        let residual = (lag - frames * FRAME_SAMPLES as i64).abs();
        let true_offset =
            (frames >= 0 && residual < (FRAME_SAMPLES / 4) as i64).then_some(frames as usize);
        Ok(Reception {
            decoded,
            delay_samples,
            true_offset,
        })
    }

    fn delay(&self) -> &DelaySpec {
        &self.delay
    }

    fn backend(&self) -> Backend {
        Backend::SpreadSpectrum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::DistortionKind;
    use crate::watermark::hard_bits;
    use rand_distr::StandardNormal;

    fn speech_frames(count: usize, seed: u64) -> Vec<Vec<f64>> {
        synthetic_speech(count * FRAME_SAMPLES, seed)
            .samples()
            .chunks_exact(FRAME_SAMPLES)
            .map(|c| c.to_vec())
            .collect()
    }

    #[test]
    fn silent_frame_gets_scaled_pn() {
        let codec = SpreadSpectrumCodec::new(DEFAULT_PN_SEED);
        let out = codec.embed_frame(&[0.0; FRAME_SAMPLES], true, 0.8).unwrap();
        for (o, c) in out.iter().zip(codec.pn()) {
            assert!((o - 0.8 * WATERMARK_GAIN * c).abs() < 1e-15);
        }
    }

    #[test]
    fn wrong_frame_size_rejected() {
        assert!(matches!(
            ss_embed(&[0.0; 100], true, 1.0, 1),
            Err(Error::FrameSize {
                expected: 320,
                got: 100
            })
        ));
        assert!(ss_decode(&[0.0; 321], 1).is_err());
    }

    #[test]
    fn round_trip_on_speech_frames() {
        let codec = SpreadSpectrumCodec::new(DEFAULT_PN_SEED);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut correct = 0;
        let mut confident = 0;
        let mut total = 0;
        for seed in 0..40 {
            for frame in speech_frames(250, seed) {
                let bit = rng.gen::<bool>();
                let out = codec
                    .decode_frame(&codec.embed_frame(&frame, bit, 0.6).unwrap())
                    .unwrap();
                total += 1;
                correct += usize::from(out.bit == bit);
                confident += usize::from(out.bit == bit && out.confidence > 0.9);
            }
        }
        assert_eq!(total, 10_000);
        assert!(correct as f64 / total as f64 >= 0.99, "{correct}");
        assert!(confident as f64 / total as f64 >= 0.99, "{confident}");
    }

    #[test]
    fn noise_frames_have_low_confidence() {
        let codec = SpreadSpectrumCodec::new(DEFAULT_PN_SEED);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mean: f64 = (0..10_000)
            .map(|_| {
                let frame: Vec<f64> = (0..FRAME_SAMPLES)
                    .map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                codec.decode_frame(&frame).unwrap().confidence
            })
            .sum::<f64>()
            / 10_000.0;
        assert!(mean < 0.2, "{mean}");
    }

    #[test]
    fn sign_flip_gives_opposite_bit() {
        let codec = SpreadSpectrumCodec::new(3);
        let frame = &speech_frames(1, 1)[0];
        let marked = codec.embed_frame(frame, true, 1.0).unwrap();
        let mirrored: Vec<f64> = marked.iter().zip(frame).map(|(m, x)| 2.0 * x - m).collect();
        assert!(codec.decode_frame(&marked).unwrap().bit);
        assert!(!codec.decode_frame(&mirrored).unwrap().bit);
    }

    #[test]
    fn energy_grows_with_alpha() {
        let codec = SpreadSpectrumCodec::new(3);
        let frame = &speech_frames(1, 5)[0];
        let diff = |alpha| {
            let out = codec.embed_frame(frame, true, alpha).unwrap();
            crate::audio::rms(
                &out.iter()
                    .zip(frame)
                    .map(|(o, x)| o - x)
                    .collect::<Vec<_>>(),
            )
        };
        assert!(diff(1.0) > diff(0.6));
    }

    #[test]
    fn stream_length_and_misalignment() {
        let codec = SpreadSpectrumCodec::new(DEFAULT_PN_SEED);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bits = Bitstream::random(46, &mut rng);
        assert!(matches!(
            codec.embed_stream(&bits, &synthetic_speech(14_719, 1), 0.6),
            Err(Error::CarrierTooShort { needed: 14_720, .. })
        ));
        let host = synthetic_speech(14_720 + FRAME_SAMPLES, 1);
        let marked = codec.embed_stream(&bits, &host, 0.6).unwrap();
        let aligned = hard_bits(&codec.decode_stream(&marked, 0, 46).unwrap());
        assert_eq!(aligned, bits);

        let mut agree = 0;
        let mut total = 0;
        for seed in 0..40 {
            let bits = Bitstream::random(46, &mut rng);
            let host = synthetic_speech(47 * FRAME_SAMPLES, seed);
            let marked = codec.embed_stream(&bits, &host, 0.6).unwrap();
            let shifted = hard_bits(&codec.decode_stream(&marked, 1, 46).unwrap());
            agree += 46 - shifted.hamming_distance(&bits);
            total += 46;
        }
        let acc = agree as f64 / total as f64;
        assert!((acc - 0.5).abs() < 0.07, "{acc}");
    }

    #[test]
    fn fft_correlation_matches_direct_sum() {
        let codec = SpreadSpectrumCodec::new(11);
        let signal = synthetic_speech(1000, 2);
        let corr = codec.correlate_all(signal.samples());
        assert_eq!(corr.len(), 1000 - FRAME_SAMPLES + 1);
        for s in [0, 17, 300, 680] {
            let direct: f64 = (0..FRAME_SAMPLES)
                .map(|k| signal.samples()[s + k] * codec.pn()[k])
                .sum();
            assert!((corr[s] - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn channel_recovers_bits_through_delay() {
        let ch = SpreadSpectrumChannel::new(DelaySpec::default());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for seed in 0..10 {
            let bits = Bitstream::random(46, &mut rng);
            let rx = ch
                .transmit(
                    &bits,
                    0.6,
                    &ChannelCondition::clean(),
                    &Listen::new(8),
                    seed,
                )
                .unwrap();
            let off = rx.true_offset.expect("phase acquired");
            assert_eq!(off, rx.delay_samples / FRAME_SAMPLES);
            assert_eq!(hard_bits(&rx.decoded[off..off + 46]), bits);
        }
    }

    #[test]
    fn channel_survives_moderate_distortion() {
        let ch = SpreadSpectrumChannel::new(DelaySpec::default());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut errors = 0;
        for (i, kind) in DistortionKind::DISTORTIONS.into_iter().enumerate() {
            let bits = Bitstream::random(100, &mut rng);
            let cond = ChannelCondition::new(kind, 0.2);
            let rx = ch
                .transmit(&bits, 0.6, &cond, &Listen::new(8), i as u64)
                .unwrap();
            let off = rx.true_offset.expect("phase acquired");
            errors += hard_bits(&rx.decoded[off..off + 100]).hamming_distance(&bits);
        }
        assert!(errors < 35, "{errors}");
    }
}
