use std::path::Path;

use hound::{SampleFormat, WavSpec};
use xling_core::features::AudioBuffer;

use crate::error::{Context, Error, Result};
use crate::fsutil;

fn wav_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Wav {
        path: path.to_path_buf(),
        detail: e.to_string(),
    }
}

/// Reads a mono WAV file (16-bit PCM or 32-bit float) as samples in [-1, 1].
pub fn read(path: &Path) -> Result<AudioBuffer> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(wav_err(path, format!("expected mono audio, found {} channels", spec.channels)));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(|e| wav_err(path, e))?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| wav_err(path, e))?,
        (fmt, bits) => {
            return Err(wav_err(path, format!("unsupported sample format {fmt:?} with {bits} bits")))
        }
    };
    AudioBuffer::new(samples, spec.sample_rate).at(path.display())
}

/// Duration in seconds from the header alone.
pub fn duration_sec(path: &Path) -> Result<(f64, u32)> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(wav_err(path, format!("expected mono audio, found {} channels", spec.channels)));
    }
    Ok((reader.duration() as f64 / spec.sample_rate as f64, spec.sample_rate))
}

/// Encodes samples as 16-bit mono PCM, clipping to [-1, 1].
pub fn encode(samples: &[f64], sample_rate: u32) -> Result<Vec<u8>> {
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut cursor = std::io::Cursor::new(Vec::with_capacity(44 + 2 * samples.len()));
    let origin = Path::new("<wav encoder>");
    let mut w = hound::WavWriter::new(&mut cursor, spec).map_err(|e| wav_err(origin, e))?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_sample(v).map_err(|e| wav_err(origin, e))?;
    }
    w.finalize().map_err(|e| wav_err(origin, e))?;
    Ok(cursor.into_inner())
}

pub fn write(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    fsutil::write_atomic(path, &encode(samples, sample_rate)?)
}
