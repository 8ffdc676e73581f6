//! RIFF/WAVE reading and writing.
//!
//! Reads 16-bit PCM and 32-bit float files of any channel count, downmixing
//! by averaging. PCM uses a 32768 scale both ways, so a value read from a
//! 16-bit file writes back to the same integer.

use std::fs;
use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use schoolroom_core::AudioBuffer;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum WavError {
    #[error("{}: no such file", .0.display())]
    NotFound(PathBuf),
    #[error("{}: unsupported WAV encoding ({detail})", .path.display())]
    Unsupported { path: PathBuf, detail: String },
    #[error("{}: file holds no samples", .0.display())]
    Empty(PathBuf),
    #[error("{}: sample {index} = {value} is outside [-1, 1]", .path.display())]
    OutOfRange { path: PathBuf, index: usize, value: f64 },
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {detail}", .path.display())]
    Invalid { path: PathBuf, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Pcm16,
    #[default]
    Float32,
}

/// What to do with samples beyond full scale when writing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangePolicy {
    #[default]
    Strict,
    Clamp,
}

/// Full scale of 16-bit samples.
pub const PCM_SCALE: f64 = 32768.0;

fn hound_error(path: &Path, e: hound::Error) -> WavError {
    match e {
        hound::Error::IoError(source) => WavError::Io {
            path: path.into(),
            source,
        },
        other => WavError::Unsupported {
            path: path.into(),
            detail: other.to_string(),
        },
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, WavError> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(WavError::NotFound(path.into()));
    }
    let mut reader = WavReader::open(path).map_err(|e| hound_error(path, e))?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels.max(1));
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / PCM_SCALE))
            .collect::<Result<_, _>>(),
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>(),
        (format, bits) => {
            return Err(WavError::Unsupported {
                path: path.into(),
                detail: format!("{bits}-bit {format:?}"),
            })
        }
    }
    .map_err(|e| hound_error(path, e))?;
    if interleaved.is_empty() {
        return Err(WavError::Empty(path.into()));
    }
    let mono = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    AudioBuffer::new(mono, spec.sample_rate).map_err(|e| WavError::Invalid {
        path: path.into(),
        detail: e.to_string(),
    })
}

/// Duration in seconds from the header alone.
pub fn wav_duration(path: impl AsRef<Path>) -> Result<f64, WavError> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(WavError::NotFound(path.into()));
    }
    let reader = WavReader::open(path).map_err(|e| hound_error(path, e))?;
    Ok(f64::from(reader.duration()) / f64::from(reader.spec().sample_rate))
}

/// The value a sample takes after a write/read round trip.
pub fn quantize(x: f64, encoding: Encoding) -> f64 {
    match encoding {
        Encoding::Float32 => f64::from(x as f32),
        Encoding::Pcm16 => (x * PCM_SCALE).round().clamp(-PCM_SCALE, PCM_SCALE - 1.0) / PCM_SCALE,
    }
}

/// A copy of `buffer` exactly as it would be read back from disk.
pub fn quantize_buffer(buffer: &AudioBuffer, encoding: Encoding) -> AudioBuffer {
    let samples = buffer.samples().iter().map(|&x| quantize(x, encoding)).collect();
    AudioBuffer::new(samples, buffer.sample_rate()).expect("quantization keeps samples finite")
}

/// Write a mono file, creating parent directories.
pub fn write_wav(
    buffer: &AudioBuffer,
    path: impl AsRef<Path>,
    encoding: Encoding,
    policy: RangePolicy,
) -> Result<(), WavError> {
    let path = path.as_ref();
    if policy == RangePolicy::Strict {
        if let Some((index, &value)) = buffer.samples().iter().enumerate().find(|(_, v)| v.abs() > 1.0) {
            return Err(WavError::OutOfRange {
                path: path.into(),
                index,
                value,
            });
        }
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| WavError::Io {
            path: dir.into(),
            source,
        })?;
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: buffer.sample_rate(),
        bits_per_sample: match encoding {
            Encoding::Pcm16 => 16,
            Encoding::Float32 => 32,
        },
        sample_format: match encoding {
            Encoding::Pcm16 => SampleFormat::Int,
            Encoding::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| hound_error(path, e))?;
    for &x in buffer.samples() {
        let x = x.clamp(-1.0, 1.0);
        match encoding {
            Encoding::Pcm16 => writer.write_sample((quantize(x, encoding) * PCM_SCALE) as i16),
            Encoding::Float32 => writer.write_sample(x as f32),
        }
        .map_err(|e| hound_error(path, e))?;
    }
    writer.finalize().map_err(|e| hound_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pcm16_silence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        write_wav(
            &AudioBuffer::silence(16_000, 16_000).unwrap(),
            &p,
            Encoding::Pcm16,
            RangePolicy::Strict,
        )
        .unwrap();
        let b = read_wav(&p).unwrap();
        assert_eq!((b.len(), b.sample_rate()), (16_000, 16_000));
        assert!(b.samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn stereo_antiphase_downmixes_to_zero() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("st.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        for i in 0..800i16 {
            w.write_sample(i * 10).unwrap();
            w.write_sample(-i * 10).unwrap();
        }
        w.finalize().unwrap();
        let b = read_wav(&p).unwrap();
        assert_eq!(b.len(), 800);
        assert!(b.samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn ten_seconds_at_48k() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("long.wav");
        write_wav(
            &AudioBuffer::silence(480_000, 48_000).unwrap(),
            &p,
            Encoding::Float32,
            RangePolicy::Strict,
        )
        .unwrap();
        assert_eq!(wav_duration(&p).unwrap(), 10.0);
    }

    #[test]
    fn strict_rejects_and_clamp_limits() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("hot.wav");
        let b = AudioBuffer::new(vec![0.0, 1.5, -0.2], 16_000).unwrap();
        assert!(matches!(
            write_wav(&b, &p, Encoding::Pcm16, RangePolicy::Strict),
            Err(WavError::OutOfRange { index: 1, .. })
        ));
        write_wav(&b, &p, Encoding::Float32, RangePolicy::Clamp).unwrap();
        assert_eq!(read_wav(&p).unwrap().samples()[1], 1.0);
    }

    #[test]
    fn distinct_read_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            read_wav(dir.path().join("nope.wav")),
            Err(WavError::NotFound(_))
        ));

        let junk = dir.path().join("junk.wav");
        fs::write(&junk, b"definitely not a wave file").unwrap();
        assert!(matches!(read_wav(&junk), Err(WavError::Unsupported { .. })));

        let empty = dir.path().join("empty.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        WavWriter::create(&empty, spec).unwrap().finalize().unwrap();
        assert!(matches!(read_wav(&empty), Err(WavError::Empty(_))));

        let int32 = dir.path().join("i32.wav");
        let spec = WavSpec {
            bits_per_sample: 32,
            ..spec
        };
        let mut w = WavWriter::create(&int32, spec).unwrap();
        w.write_sample(5i32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&int32), Err(WavError::Unsupported { .. })));
    }

    #[test]
    fn quantize_matches_disk() {
        let dir = tempfile::tempdir().unwrap();
        let b = AudioBuffer::new(vec![0.123456789, -0.99999, 1.0, -1.0, 3e-6], 16_000).unwrap();
        for enc in [Encoding::Pcm16, Encoding::Float32] {
            let p = dir.path().join("q.wav");
            write_wav(&b, &p, enc, RangePolicy::Strict).unwrap();
            assert_eq!(read_wav(&p).unwrap(), quantize_buffer(&b, enc));
        }
    }
}
