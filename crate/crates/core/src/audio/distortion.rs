use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::audio::{mean_power, ButterworthCascade, PcmSignal, SAMPLE_RATE};
use crate::error::{Error, Result};

/// Power used as the SNR reference when the affected segment is silent (-40 dBFS).
const SILENT_REFERENCE_POWER: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionKind {
    Clean,
    WhiteNoise,
    PinkNoise,
    Echo,
    Lowpass,
    Highpass,
    Bandpass,
    Duck,
}

impl DistortionKind {
    pub const ALL: [DistortionKind; 8] = [
        DistortionKind::Clean,
        DistortionKind::WhiteNoise,
        DistortionKind::PinkNoise,
        DistortionKind::Echo,
        DistortionKind::Lowpass,
        DistortionKind::Highpass,
        DistortionKind::Bandpass,
        DistortionKind::Duck,
    ];

    /// Every kind except `Clean`.
    pub const DISTORTIONS: [DistortionKind; 7] = [
        DistortionKind::WhiteNoise,
        DistortionKind::PinkNoise,
        DistortionKind::Echo,
        DistortionKind::Lowpass,
        DistortionKind::Highpass,
        DistortionKind::Bandpass,
        DistortionKind::Duck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DistortionKind::Clean => "clean",
            DistortionKind::WhiteNoise => "white_noise",
            DistortionKind::PinkNoise => "pink_noise",
            DistortionKind::Echo => "echo",
            DistortionKind::Lowpass => "lowpass",
            DistortionKind::Highpass => "highpass",
            DistortionKind::Bandpass => "bandpass",
            DistortionKind::Duck => "duck",
        }
    }
}

impl fmt::Display for DistortionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistortionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.trim().to_ascii_lowercase().replace('-', "_");
        DistortionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == normalized)
            .ok_or_else(|| Error::Parse(format!("unknown distortion kind {s:?}")))
    }
}

/// Closed interval sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Range { min, max }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.max <= self.min {
            self.min
        } else {
            rng.gen_range(self.min..=self.max)
        }
    }

    fn validate(&self, name: &str, lo: f64, hi: f64) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite())
            || self.min > self.max
            || self.min < lo
            || self.max > hi
        {
            return Err(Error::InvalidConfig(format!(
                "{name} range [{}, {}] outside [{lo}, {hi}]",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

/// Parameter ranges for each distortion kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistortionParams {
    pub snr_db: Range,
    pub echo_delay_ms: Range,
    pub echo_attenuation: Range,
    pub lowpass_hz: Range,
    pub highpass_hz: Range,
    pub bandpass_low_hz: Range,
    pub bandpass_high_hz: Range,
    pub duck_gain: Range,
    /// Butterworth order of every filter; realized as order/2 biquads.
    pub filter_order: usize,
}

impl Default for DistortionParams {
    fn default() -> Self {
        DistortionParams {
            snr_db: Range::new(10.0, 30.0),
            echo_delay_ms: Range::new(100.0, 500.0),
            echo_attenuation: Range::new(0.2, 0.5),
            lowpass_hz: Range::new(2000.0, 3500.0),
            highpass_hz: Range::new(300.0, 800.0),
            bandpass_low_hz: Range::new(300.0, 800.0),
            bandpass_high_hz: Range::new(2000.0, 3000.0),
            duck_gain: Range::new(0.1, 0.4),
            filter_order: 4,
        }
    }
}

impl DistortionParams {
    pub fn validate(&self) -> Result<()> {
        let nyquist = SAMPLE_RATE as f64 / 2.0;
        self.snr_db.validate("snr_db", -20.0, 80.0)?;
        self.echo_delay_ms.validate("echo_delay_ms", 0.0, 2000.0)?;
        self.echo_attenuation
            .validate("echo_attenuation", 0.0, 1.0)?;
        self.lowpass_hz.validate("lowpass_hz", 1.0, nyquist - 1.0)?;
        self.highpass_hz
            .validate("highpass_hz", 1.0, nyquist - 1.0)?;
        self.bandpass_low_hz
            .validate("bandpass_low_hz", 1.0, nyquist - 1.0)?;
        self.bandpass_high_hz
            .validate("bandpass_high_hz", 1.0, nyquist - 1.0)?;
        self.duck_gain.validate("duck_gain", 0.0, 1.0)?;
        if self.bandpass_low_hz.max >= self.bandpass_high_hz.min {
            return Err(Error::InvalidConfig(
                "bandpass low edge must stay below the high edge".into(),
            ));
        }
        if self.filter_order < 2 || !self.filter_order.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "filter order {} must be even and >= 2",
                self.filter_order
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionSpec {
    pub kind: DistortionKind,
    /// Fraction of the signal duration affected.
    pub coverage: f64,
    #[serde(default)]
    pub params: DistortionParams,
    pub rng_seed: u64,
    /// Number of disjoint segments sharing the coverage; 1 is a single contiguous span.
    #[serde(default = "one")]
    pub segments: usize,
}

fn one() -> usize {
    1
}

impl DistortionSpec {
    pub fn new(kind: DistortionKind, coverage: f64, rng_seed: u64) -> Self {
        DistortionSpec {
            kind,
            coverage,
            params: DistortionParams::default(),
            rng_seed,
            segments: 1,
        }
    }

    pub fn clean() -> Self {
        Self::new(DistortionKind::Clean, 0.0, 0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.coverage) {
            return Err(Error::InvalidConfig(format!(
                "coverage {} outside [0, 1]",
                self.coverage
            )));
        }
        if self.segments == 0 {
            return Err(Error::InvalidConfig("segments must be >= 1".into()));
        }
        self.params.validate()
    }
}

/// Parameter values actually drawn for one application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DrawnParams {
    None,
    Noise { snr_db: f64 },
    Echo { delay_ms: f64, attenuation: f64 },
    Cutoff { hz: f64 },
    Band { low_hz: f64, high_hz: f64 },
    Gain { gain: f64 },
}

#[derive(Debug, Clone)]
pub struct DistortionOutcome {
    pub signal: PcmSignal,
    /// Half-open sample ranges that were modified.
    pub segments: Vec<(usize, usize)>,
    pub drawn: DrawnParams,
    /// Samples that had to be clamped back into `[-1, 1]`.
    pub clipped: usize,
}

/// Distorts a randomly placed portion of the signal covering `spec.coverage`
/// of its duration. Samples outside the chosen segments are left untouched.
pub fn apply_distortion(signal: &PcmSignal, spec: &DistortionSpec) -> Result<DistortionOutcome> {
    spec.validate()?;
    if signal.is_empty() {
        return Err(Error::InvalidConfig(
            "cannot distort an empty signal".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let covered = (spec.coverage * signal.len() as f64).round() as usize;
    if spec.kind == DistortionKind::Clean || covered == 0 {
        return Ok(DistortionOutcome {
            signal: signal.clone(),
            segments: Vec::new(),
            drawn: DrawnParams::None,
            clipped: 0,
        });
    }

    let segments = place_segments(signal.len(), covered, spec.segments, &mut rng);
    let drawn = draw_params(spec.kind, &spec.params, &mut rng);
    let input = signal.samples();
    let mut out = input.to_vec();
    let sr = SAMPLE_RATE as f64;

    for &(start, end) in &segments {
        let seg = &mut out[start..end];
        match drawn {
            DrawnParams::Noise { snr_db } => {
                let noise = match spec.kind {
                    DistortionKind::PinkNoise => pink_noise(seg.len(), &mut rng),
                    _ => white_noise(seg.len(), &mut rng),
                };
                let signal_power = match mean_power(&input[start..end]) {
                    p if p > 0.0 => p,
                    _ => SILENT_REFERENCE_POWER,
                };
                let noise_power = mean_power(&noise);
                let scale = if noise_power > 0.0 {
                    (signal_power / 10f64.powf(snr_db / 10.0) / noise_power).sqrt()
                } else {
                    0.0
                };
                for (s, n) in seg.iter_mut().zip(noise) {
                    *s += scale * n;
                }
            }
            DrawnParams::Echo {
                delay_ms,
                attenuation,
            } => {
                let lag = (delay_ms * sr / 1000.0).round() as usize;
                for (i, s) in seg.iter_mut().enumerate() {
                    let src = start + i;
                    if src >= lag {
                        *s += attenuation * input[src - lag];
                    }
                }
            }
            DrawnParams::Cutoff { hz } => {
                let mut filter = match spec.kind {
                    DistortionKind::Highpass => {
                        ButterworthCascade::highpass(spec.params.filter_order, hz, sr)
                    }
                    _ => ButterworthCascade::lowpass(spec.params.filter_order, hz, sr),
                };
                filter.process_block(seg);
            }
            DrawnParams::Band { low_hz, high_hz } => {
                ButterworthCascade::highpass(spec.params.filter_order, low_hz, sr)
                    .process_block(seg);
                ButterworthCascade::lowpass(spec.params.filter_order, high_hz, sr)
                    .process_block(seg);
            }
            DrawnParams::Gain { gain } => {
                for s in seg.iter_mut() {
                    *s *= gain;
                }
            }
            DrawnParams::None => {}
        }
    }

    let mut clipped = 0;
    for s in &mut out {
        if s.abs() > 1.0 {
            clipped += 1;
            *s = s.clamp(-1.0, 1.0);
        }
    }
    Ok(DistortionOutcome {
        signal: PcmSignal::new(out)?,
        segments,
        drawn,
        clipped,
    })
}

/// Splits `covered` samples into `count` pieces, each placed uniformly inside
/// its own equal share of the signal.
fn place_segments<R: Rng>(
    len: usize,
    covered: usize,
    count: usize,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let count = count.min(covered).max(1);
    let zone = len / count;
    let mut segments = Vec::with_capacity(count);
    for i in 0..count {
        let piece = covered / count + usize::from(i < covered % count);
        let zone_start = i * zone;
        let zone_len = if i + 1 == count {
            len - zone_start
        } else {
            zone
        };
        let piece = piece.min(zone_len);
        let start = zone_start + rng.gen_range(0..=zone_len - piece);
        segments.push((start, start + piece));
    }
    segments
}

fn draw_params<R: Rng>(kind: DistortionKind, p: &DistortionParams, rng: &mut R) -> DrawnParams {
    match kind {
        DistortionKind::Clean => DrawnParams::None,
        DistortionKind::WhiteNoise | DistortionKind::PinkNoise => DrawnParams::Noise {
            snr_db: p.snr_db.sample(rng),
        },
        DistortionKind::Echo => DrawnParams::Echo {
            delay_ms: p.echo_delay_ms.sample(rng),
            attenuation: p.echo_attenuation.sample(rng),
        },
        DistortionKind::Lowpass => DrawnParams::Cutoff {
            hz: p.lowpass_hz.sample(rng),
        },
        DistortionKind::Highpass => DrawnParams::Cutoff {
            hz: p.highpass_hz.sample(rng),
        },
        DistortionKind::Bandpass => DrawnParams::Band {
            low_hz: p.bandpass_low_hz.sample(rng),
            high_hz: p.bandpass_high_hz.sample(rng),
        },
        DistortionKind::Duck => DrawnParams::Gain {
            gain: p.duck_gain.sample(rng),
        },
    }
}

fn white_noise<R: Rng>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Paul Kellett's pinking filter (-3 dB/octave) applied to white noise.
fn pink_noise<R: Rng>(len: usize, rng: &mut R) -> Vec<f64> {
    let mut b = [0.0f64; 7];
    (0..len)
        .map(|_| {
            let white: f64 = rng.sample(StandardNormal);
            b[0] = 0.99886 * b[0] + white * 0.0555179;
            b[1] = 0.99332 * b[1] + white * 0.0750759;
            b[2] = 0.96900 * b[2] + white * 0.1538520;
            b[3] = 0.86650 * b[3] + white * 0.3104856;
            b[4] = 0.55000 * b[4] + white * 0.5329522;
            b[5] = -0.7616 * b[5] - white * 0.0168980;
            let pink = b.iter().sum::<f64>() + white * 0.5362;
            b[6] = white * 0.115926;
            pink
        })
        .collect()
}
