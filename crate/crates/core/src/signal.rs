//! Mono audio carrier, level measurement and sample-rate conversion.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// Default activity frame for [`measure_level`], in milliseconds.
pub const ACTIVITY_FRAME_MS: f64 = 25.0;
/// Default activity threshold relative to global RMS, in dB.
pub const ACTIVITY_THRESHOLD_DB: f64 = -35.0;

/// A mono sample sequence with its sample rate.
///
/// Samples are finite `f64` values. They usually stay within [-1, 1], but
/// intermediate renders (an unnormalized reverberant signal, for instance)
/// may exceed it; range is enforced where audio leaves the process.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidSampleRate);
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    #[inline]
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    #[inline]
    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    #[inline]
    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Largest absolute sample value (0 for an empty buffer).
    pub fn peak(&self) -> f64 {
        peak(&self.samples)
    }

    /// Multiply every sample by `gain`.
    pub fn scale(&mut self, gain: f64) {
        for s in &mut self.samples {
            *s *= gain;
        }
    }

    /// Scale so the peak equals `target`. Silent buffers are left untouched;
    /// returns the applied gain.
    pub fn normalize_peak(&mut self, target: f64) -> f64 {
        let p = self.peak();
        if p > 0.0 {
            let g = target / p;
            self.scale(g);
            g
        } else {
            1.0
        }
    }

    /// Shorten or zero-extend to exactly `len` samples.
    pub fn resize(&mut self, len: usize) {
        self.samples.resize(len, 0.0);
    }

    pub fn ensure_same_rate(&self, other: &AudioBuffer) -> Result<()> {
        if self.sample_rate != other.sample_rate {
            return Err(Error::SampleRateMismatch {
                left: self.sample_rate,
                right: other.sample_rate,
            });
        }
        Ok(())
    }
}

pub fn peak(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    math::sqrt(x.iter().map(|s| s * s).sum::<f64>() / x.len() as f64)
}

/// Level summary of a buffer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    /// RMS over all samples.
    pub rms: f64,
    /// `20·log10(rms)`; `-inf` for digital silence.
    pub rms_db: f64,
    /// RMS over frames whose own RMS exceeds `rms_db + threshold_db`.
    pub active_rms: f64,
    /// Fraction of samples that fell in active frames.
    pub active_fraction: f64,
}

/// Measure global and activity-gated RMS.
///
/// The signal is cut into consecutive frames of `frame_ms` (the last one may
/// be short). A frame is active when its RMS, in dB, exceeds the global
/// level plus `threshold_db`.
pub fn measure_level(buffer: &AudioBuffer, frame_ms: f64, threshold_db: f64) -> Result<LevelReport> {
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    if !(frame_ms > 0.0) {
        return Err(Error::InvalidArgument("frame_ms must be positive".into()));
    }
    let x = buffer.samples();
    let total_energy: f64 = x.iter().map(|s| s * s).sum();
    let rms = math::sqrt(total_energy / x.len() as f64);
    let rms_db = math::amp_to_db(rms);

    let frame = (math::round(frame_ms * f64::from(buffer.sample_rate()) / 1000.0) as usize).max(1);
    let gate = rms * math::db_to_amp(threshold_db);
    let mut active_energy = 0.0;
    let mut active_count = 0usize;
    if rms > 0.0 {
        for chunk in x.chunks(frame) {
            let e: f64 = chunk.iter().map(|s| s * s).sum();
            let frame_rms = math::sqrt(e / chunk.len() as f64);
            if frame_rms > gate {
                active_energy += e;
                active_count += chunk.len();
            }
        }
    }
    let active_rms = if active_count > 0 {
        math::sqrt(active_energy / active_count as f64)
    } else {
        0.0
    };
    Ok(LevelReport {
        rms,
        rms_db,
        active_rms,
        active_fraction: active_count as f64 / x.len() as f64,
    })
}

/// Band-limited resampling with a polyphase Kaiser-windowed sinc.
///
/// Output length is `round(len · target / source)`. The anti-aliasing cutoff
/// sits at 0.9 of the lower Nyquist frequency; the kernel spans 32 zero
/// crossings on each side, which keeps passband ripple well under 0.01 dB.
pub fn resample(buffer: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(Error::InvalidSampleRate);
    }
    let source_rate = buffer.sample_rate();
    if source_rate == target_rate {
        return Ok(buffer.clone());
    }
    let resampler = Resampler::new(source_rate, target_rate);
    AudioBuffer::new(resampler.process(buffer.samples()), target_rate)
}

/// Precomputed polyphase filter bank for one rate pair.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    /// First input offset (relative to the floor position) of each phase.
    half_taps: usize,
    /// `up` phases × `2·half_taps` taps.
    bank: Vec<f64>,
}

const RESAMPLE_ZERO_CROSSINGS: f64 = 32.0;
const RESAMPLE_ROLLOFF: f64 = 0.9;
const RESAMPLE_BETA: f64 = 10.0;

impl Resampler {
    pub fn new(source_rate: u32, target_rate: u32) -> Self {
        let g = gcd(source_rate as u64, target_rate as u64);
        let up = (target_rate as u64 / g) as usize;
        let down = (source_rate as u64 / g) as usize;
        // Cutoff in cycles per input sample.
        let cutoff = 0.5 * RESAMPLE_ROLLOFF * (up as f64 / down as f64).min(1.0);
        let half_width = RESAMPLE_ZERO_CROSSINGS / (2.0 * cutoff);
        let half_taps = math::ceil(half_width) as usize + 1;
        let width = 2 * half_taps;
        let i0_beta = math::bessel_i0(RESAMPLE_BETA);
        let mut bank = vec![0.0; up * width];
        for phase in 0..up {
            let frac = phase as f64 / up as f64;
            let row = &mut bank[phase * width..(phase + 1) * width];
            for (j, tap) in row.iter_mut().enumerate() {
                // Input sample at floor + j - half_taps + 1, output at floor + frac.
                let offset = j as f64 - half_taps as f64 + 1.0 - frac;
                let w = math::kaiser(offset / half_width, RESAMPLE_BETA, i0_beta);
                *tap = 2.0 * cutoff * math::sinc(2.0 * cutoff * offset) * w;
            }
            let sum: f64 = row.iter().sum();
            for tap in row.iter_mut() {
                *tap /= sum;
            }
        }
        Self {
            up,
            down,
            half_taps,
            bank,
        }
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        let num = input_len as u128 * self.up as u128;
        ((num + self.down as u128 / 2) / self.down as u128) as usize
    }

    pub fn process(&self, x: &[f64]) -> Vec<f64> {
        let n_out = self.output_len(x.len());
        let width = 2 * self.half_taps;
        let mut out = Vec::with_capacity(n_out);
        for n in 0..n_out {
            let pos = n as u128 * self.down as u128;
            let base = (pos / self.up as u128) as isize;
            let phase = (pos % self.up as u128) as usize;
            let taps = &self.bank[phase * width..(phase + 1) * width];
            let start = base - self.half_taps as isize + 1;
            let mut acc = 0.0;
            if start >= 0 && (start as usize + width) <= x.len() {
                let s = start as usize;
                for (a, b) in taps.iter().zip(&x[s..s + width]) {
                    acc += a * b;
                }
            } else {
                for (j, tap) in taps.iter().enumerate() {
                    let idx = start + j as isize;
                    if idx >= 0 && (idx as usize) < x.len() {
                        acc += tap * x[idx as usize];
                    }
                }
            }
            out.push(acc);
        }
        out
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
