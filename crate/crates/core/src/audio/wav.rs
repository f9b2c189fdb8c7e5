use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::audio::{PcmSignal, SAMPLE_RATE};
use crate::error::{Error, Result};

const FULL_SCALE: f64 = 32768.0;

/// Reads a mono 8 kHz 16-bit PCM WAV file.
pub fn load_wav(path: impl AsRef<Path>) -> Result<PcmSignal> {
    let path = path.as_ref();
    let file = BufReader::new(File::open(path)?);
    let reader =
        WavReader::new(file).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Format(format!(
            "{}: {} channels, expected mono",
            path.display(),
            spec.channels
        )));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::Format(format!(
            "{}: sample rate {} Hz, expected {SAMPLE_RATE} Hz",
            path.display(),
            spec.sample_rate
        )));
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Format(format!(
            "{}: {}-bit {:?} samples, expected 16-bit PCM",
            path.display(),
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / FULL_SCALE))
        .collect::<std::result::Result<Vec<f64>, _>>()?;
    PcmSignal::new(samples)
}

/// Writes a mono 8 kHz 16-bit PCM WAV file, rounding to the nearest code.
pub fn save_wav(signal: &PcmSignal, path: impl AsRef<Path>) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for &s in signal.samples() {
        let code = (s * FULL_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(code)?;
    }
    writer.finalize()?;
    Ok(())
}
