//! Exponential sine sweep measurement.
//!
//! The excitation is `x(t) = sin(2π·f1·L·(e^{t/L} − 1))` with
//! `L = T / ln(f2/f1)`, so the instantaneous frequency `f1·e^{t/L}` climbs
//! from `f1` at `t = 0` to `f2` at `t = T`. Deconvolving a recorded response
//! with the inverse of the excitation compresses the sweep into an impulse at
//! lag zero. Harmonic distortion of order `k` lands `L·ln k` seconds before
//! lag zero, so a causal window after lag zero contains only the linear
//! response.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::fft::{Complex64, RealFft};
use crate::math;
use crate::room::Point3;
use crate::signal::AudioBuffer;
use crate::{Error, Result};

/// Exponential sweep parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// Start frequency, Hz.
    pub f_start: f64,
    /// End frequency, Hz.
    pub f_end: f64,
    pub duration_s: f64,
    pub sample_rate: u32,
    /// Raised-cosine fade at each end, milliseconds.
    pub fade_ms: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            f_start: 20.0,
            f_end: 20_000.0,
            duration_s: 10.0,
            sample_rate: 48_000,
            fade_ms: 20.0,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let nyquist = f64::from(self.sample_rate) / 2.0;
        if self.sample_rate == 0 {
            return Err(Error::InvalidSweep("sample rate must be positive".into()));
        }
        if !(self.f_start > 0.0 && self.f_start < self.f_end && self.f_end < nyquist) {
            return Err(Error::InvalidSweep(format!(
                "need 0 < f_start < f_end < {nyquist} Hz, got {}..{}",
                self.f_start, self.f_end
            )));
        }
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(Error::InvalidSweep("duration must be positive".into()));
        }
        if !(self.fade_ms >= 0.0) || 2.0 * self.fade_ms / 1000.0 > self.duration_s {
            return Err(Error::InvalidSweep("fades must fit inside the sweep".into()));
        }
        if self.len() < 2 {
            return Err(Error::InvalidSweep("sweep shorter than two samples".into()));
        }
        Ok(())
    }

    /// Sweep rate constant `L = T / ln(f2/f1)`, seconds.
    pub fn rate_constant(&self) -> f64 {
        self.duration_s / math::ln(self.f_end / self.f_start)
    }

    /// Number of samples, `round(T · fs)`.
    pub fn len(&self) -> usize {
        math::round(self.duration_s * f64::from(self.sample_rate)) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Instantaneous frequency at time `t`, Hz.
    pub fn instantaneous_frequency(&self, t: f64) -> f64 {
        self.f_start * math::exp(t / self.rate_constant())
    }

    /// How far before lag zero the order-`k` harmonic response lands, seconds.
    pub fn harmonic_lead_s(&self, k: u32) -> f64 {
        self.rate_constant() * math::ln(f64::from(k))
    }

    fn fade_len(&self) -> usize {
        math::round(self.fade_ms / 1000.0 * f64::from(self.sample_rate)) as usize
    }
}

/// Render the sweep with raised-cosine fades at both ends.
pub fn generate_sweep(spec: &SweepSpec) -> Result<AudioBuffer> {
    spec.validate()?;
    AudioBuffer::new(sweep_samples(spec), spec.sample_rate)
}

fn sweep_samples(spec: &SweepSpec) -> Vec<f64> {
    let n = spec.len();
    let fs = f64::from(spec.sample_rate);
    let l = spec.rate_constant();
    let k = 2.0 * math::PI * spec.f_start * l;
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            math::sin(k * (math::exp(t / l) - 1.0))
        })
        .collect();
    let fade = spec.fade_len().min(n / 2);
    for i in 0..fade {
        let w = 0.5 - 0.5 * math::cos(math::PI * i as f64 / fade as f64);
        x[i] *= w;
        x[n - 1 - i] *= w;
    }
    x
}

/// Time-reversed sweep with an exponentially decaying envelope.
///
/// The sweep spends time `L/f` per hertz, so its energy falls 3 dB per
/// octave; reversing it and weighting by `e^{-t/L}` (high frequencies first,
/// at full weight) tilts the product back to a flat magnitude response. The
/// filter is scaled so that `sweep ⊛ inverse` peaks at exactly 1, at index
/// `len − 1`.
pub fn inverse_filter(spec: &SweepSpec) -> Result<AudioBuffer> {
    spec.validate()?;
    let x = sweep_samples(spec);
    let n = x.len();
    let fs = f64::from(spec.sample_rate);
    let l = spec.rate_constant();
    let mut inv: Vec<f64> = x
        .iter()
        .rev()
        .enumerate()
        .map(|(i, s)| s * math::exp(-(i as f64 / fs) / l))
        .collect();

    let fft = RealFft::new((2 * n - 1).next_power_of_two());
    let a = fft.forward(&x);
    let b = fft.forward(&inv);
    let prod: Vec<Complex64> = a.iter().zip(&b).map(|(p, q)| p * q).collect();
    let y = fft.inverse(&prod);
    let peak = crate::signal::peak(&y[..2 * n - 1]);
    for v in &mut inv {
        *v /= peak;
    }
    AudioBuffer::new(inv, spec.sample_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Measured,
    Simulated,
}

/// A room impulse response with its geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    pub id: String,
    pub taps: AudioBuffer,
    pub room_id: String,
    pub source: Point3,
    pub receiver: Point3,
    pub origin: Origin,
}

/// Identity and geometry attached to an extracted response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RirGeometry {
    pub id: String,
    pub room_id: String,
    pub source: Point3,
    pub receiver: Point3,
}

/// Where the returned window starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowAnchor {
    /// At deconvolution lag zero: tap `n` is the response `n` samples after
    /// the excitation, so propagation delay is preserved.
    LagZero,
    /// `pre_samples` before the detected reference peak; removes latency.
    Peak { pre_samples: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractOptions {
    pub anchor: WindowAnchor,
    /// Tikhonov term inside the sweep band, relative to the peak sweep power.
    pub regularization: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            anchor: WindowAnchor::LagZero,
            regularization: 1e-10,
        }
    }
}

/// Regularized inverse of a sweep, held as a fixed FIR filter.
///
/// On a grid of `M ≥ 2N − 1` points the inverse spectrum is
/// `conj(X) / (|X|² + ε)` with `ε = regularization · max|X|²` up to the
/// sweep's end frequency; above it ε equals the peak power, which suppresses
/// bins the sweep never excited. Back in the time domain the filter is laid
/// out so that tap `j` is lag `j − offset`. Deconvolution is then plain linear
/// convolution with this filter, so it is exactly shift-equivariant and
/// independent of the recording length.
#[derive(Debug, Clone)]
pub struct Deconvolver {
    spec: SweepSpec,
    fir: Vec<f64>,
    offset: usize,
}

impl Deconvolver {
    pub fn new(spec: &SweepSpec, regularization: f64) -> Result<Self> {
        spec.validate()?;
        if !(regularization > 0.0 && regularization.is_finite()) {
            return Err(Error::InvalidArgument("regularization must be positive".into()));
        }
        let n = spec.len();
        let size = (2 * n - 1).next_power_of_two();
        let fft = RealFft::new(size);
        let xs = fft.forward(&sweep_samples(spec));
        let max_power = xs.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
        let bin_hz = f64::from(spec.sample_rate) / size as f64;
        let inv: Vec<Complex64> = xs
            .iter()
            .enumerate()
            .map(|(k, x)| {
                let eps = if k as f64 * bin_hz <= spec.f_end {
                    regularization * max_power
                } else {
                    max_power
                };
                x.conj() / (x.norm_sqr() + eps)
            })
            .collect();
        let g = fft.inverse(&inv);
        // The reversed sweep occupies lags −(N−1)..=0; split the spare
        // length evenly between the leading and trailing ringing.
        let offset = n - 1 + (size - n) / 2;
        let fir = (0..size).map(|j| g[(j + size - offset) % size]).collect();
        Ok(Self {
            spec: *spec,
            fir,
            offset,
        })
    }

    pub fn spec(&self) -> &SweepSpec {
        &self.spec
    }

    /// Filter taps; tap `j` sits at lag `j − offset()`.
    pub fn taps(&self) -> &[f64] {
        &self.fir
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn apply(&self, recording: &AudioBuffer) -> Result<Deconvolution> {
        if recording.sample_rate() != self.spec.sample_rate {
            return Err(Error::SampleRateMismatch {
                left: recording.sample_rate(),
                right: self.spec.sample_rate,
            });
        }
        let n = self.spec.len();
        if recording.len() < n {
            return Err(Error::RecordingTooShort {
                needed: n,
                found: recording.len(),
            });
        }
        let out_len = recording.len() + self.fir.len() - 1;
        let fft = RealFft::new(out_len.next_power_of_two());
        let a = fft.forward(recording.samples());
        let b = fft.forward(&self.fir);
        let prod: Vec<Complex64> = a.iter().zip(&b).map(|(p, q)| p * q).collect();
        let mut samples = fft.inverse(&prod);
        samples.truncate(out_len);
        Ok(Deconvolution {
            samples,
            offset: self.offset,
        })
    }
}

/// Linear deconvolution of a recording. Lag `l` lives at index
/// `l + offset`; negative lags hold the harmonic distortion products.
#[derive(Debug, Clone)]
pub struct Deconvolution {
    samples: Vec<f64>,
    offset: usize,
}

impl Deconvolution {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn min_lag(&self) -> i64 {
        -(self.offset as i64)
    }

    /// One past the largest lag.
    pub fn max_lag(&self) -> i64 {
        self.samples.len() as i64 - self.offset as i64
    }

    /// Value at `lag`; zero outside the computed range.
    pub fn at(&self, lag: i64) -> f64 {
        let i = lag + self.offset as i64;
        if i < 0 {
            0.0
        } else {
            self.samples.get(i as usize).copied().unwrap_or(0.0)
        }
    }

    /// Global magnitude argmax, earliest on ties.
    pub fn peak_lag(&self) -> Option<i64> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.samples.iter().enumerate() {
            let v = v.abs();
            if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i as i64 - self.offset as i64)
    }

    pub fn window(&self, start: i64, len: usize) -> Vec<f64> {
        (0..len as i64).map(|i| self.at(start + i)).collect()
    }
}

/// Deconvolve a recording with the regularized inverse of the sweep.
pub fn deconvolve(recording: &AudioBuffer, spec: &SweepSpec, regularization: f64) -> Result<Deconvolution> {
    Deconvolver::new(spec, regularization)?.apply(recording)
}

/// Extraction result with the detected reference peak.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub rir: Rir,
    /// Lag of the global magnitude maximum of the deconvolved signal.
    pub peak_lag: i64,
    /// Lag at which the returned window starts.
    pub window_start: i64,
}

/// Recover a peak-normalized impulse response of `rir_len` taps, anchored at
/// deconvolution lag zero.
pub fn extract_rir(recording: &AudioBuffer, spec: &SweepSpec, rir_len: usize, geometry: RirGeometry) -> Result<Rir> {
    extract_rir_with(recording, spec, rir_len, geometry, &ExtractOptions::default()).map(|e| e.rir)
}

pub fn extract_rir_with(
    recording: &AudioBuffer,
    spec: &SweepSpec,
    rir_len: usize,
    geometry: RirGeometry,
    options: &ExtractOptions,
) -> Result<Extraction> {
    let deconvolver = Deconvolver::new(spec, options.regularization)?;
    extract_with_deconvolver(&deconvolver, recording, rir_len, geometry, options.anchor)
}

/// Extraction with a prepared [`Deconvolver`], for batches sharing one sweep.
pub fn extract_with_deconvolver(
    deconvolver: &Deconvolver,
    recording: &AudioBuffer,
    rir_len: usize,
    geometry: RirGeometry,
    anchor: WindowAnchor,
) -> Result<Extraction> {
    if rir_len == 0 {
        return Err(Error::InvalidArgument("rir_len must be positive".into()));
    }
    let dec = deconvolver.apply(recording)?;
    let peak_lag = dec.peak_lag().ok_or(Error::NoPeak)?;
    let window_start = match anchor {
        WindowAnchor::LagZero => 0,
        WindowAnchor::Peak { pre_samples } => peak_lag - pre_samples as i64,
    };
    if window_start < dec.min_lag() || window_start + rir_len as i64 > dec.max_lag() {
        return Err(Error::InvalidArgument(format!(
            "window of {rir_len} taps at lag {window_start} exceeds the deconvolution range"
        )));
    }
    let mut taps = dec.window(window_start, rir_len);
    let p = crate::signal::peak(&taps);
    if p == 0.0 {
        return Err(Error::NoPeak);
    }
    for t in &mut taps {
        *t /= p;
    }
    let rir = Rir {
        id: geometry.id,
        taps: AudioBuffer::new(taps, deconvolver.spec().sample_rate)?,
        room_id: geometry.room_id,
        source: geometry.source,
        receiver: geometry.receiver,
        origin: Origin::Measured,
    };
    Ok(Extraction {
        rir,
        peak_lag,
        window_start,
    })
}

/// Pass a sweep through a linear system with impulse response `rir`
/// (FFT convolution). Used to "measure" simulated rooms.
pub fn record_through(spec: &SweepSpec, rir: &[f64]) -> Result<AudioBuffer> {
    let sweep = generate_sweep(spec)?;
    if rir.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    AudioBuffer::new(crate::convolve::convolve_slices(sweep.samples(), rir), spec.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn geometry() -> RirGeometry {
        RirGeometry {
            id: "t".into(),
            room_id: "r".into(),
            source: Point3::new(1.0, 1.0, 1.0),
            receiver: Point3::new(2.0, 2.0, 1.0),
        }
    }

    fn short_spec() -> SweepSpec {
        SweepSpec {
            f_start: 20.0,
            f_end: 7000.0,
            duration_s: 1.0,
            sample_rate: 16_000,
            fade_ms: 20.0,
        }
    }

    /// Brute-force DFT magnitude at one frequency over a Hann-windowed frame.
    fn frame_magnitude(x: &[f64], start: usize, len: usize, freq: f64, fs: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for i in 0..len {
            let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos();
            let a = 2.0 * PI * freq * (start + i) as f64 / fs;
            re += w * x[start + i] * a.cos();
            im -= w * x[start + i] * a.sin();
        }
        (re * re + im * im).sqrt()
    }

    #[test]
    fn default_spec_length_and_band() {
        let spec = SweepSpec::default();
        assert_eq!((spec.f_start, spec.f_end), (20.0, 20_000.0));
        let x = generate_sweep(&spec).unwrap();
        assert_eq!(x.len(), 480_000);
        assert!(x.peak() <= 1.0);
        assert_eq!(x.samples()[0], 0.0);
    }

    #[test]
    fn midpoint_frequency_is_geometric_mean() {
        let spec = SweepSpec::default();
        let mid = spec.instantaneous_frequency(spec.duration_s / 2.0);
        assert!((mid - (20.0f64 * 20_000.0).sqrt()).abs() < 1e-9);
        assert!((mid - 632.455_532).abs() < 1e-3);
        assert!((spec.instantaneous_frequency(0.0) - 20.0).abs() < 1e-12);
        assert!((spec.instantaneous_frequency(spec.duration_s) - 20_000.0).abs() < 1e-6);
    }

    #[test]
    fn spectrogram_ridge_follows_exponential_law() {
        let spec = SweepSpec::default();
        let x = generate_sweep(&spec).unwrap();
        let fs = 48_000.0;
        let frame = 4096;
        let bin = fs / frame as f64;
        for t_center in [0.5, 5.0, 9.9] {
            let start = ((t_center * fs) as usize).saturating_sub(frame / 2);
            let t_mid = (start + frame / 2) as f64 / fs;
            let expected = spec.instantaneous_frequency(t_mid);
            // Scan bins around the expectation and take the ridge.
            let k0 = (expected / bin).round() as i64;
            let best = (k0 - 20..=k0 + 20)
                .filter(|k| *k > 0)
                .map(|k| (k, frame_magnitude(x.samples(), start, frame, k as f64 * bin, fs)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(
                (best.0 as f64 * bin - expected).abs() <= bin,
                "t={t_mid}: ridge {} Hz vs {expected} Hz",
                best.0 as f64 * bin
            );
        }
    }

    #[test]
    fn spectrum_falls_three_db_per_octave() {
        let spec = SweepSpec::default();
        let x = generate_sweep(&spec).unwrap();
        let fft = RealFft::new(x.len().next_power_of_two());
        let spec_bins = fft.forward(x.samples());
        let bin = 48_000.0 / fft.len() as f64;
        // Mean power per octave band, 100 Hz .. 6.4 kHz.
        let mut pts = Vec::new();
        let mut lo = 100.0;
        while lo < 6400.0 {
            let hi = lo * 2.0;
            let (a, b) = ((lo / bin) as usize, (hi / bin) as usize);
            let p: f64 = spec_bins[a..b].iter().map(|c| c.norm_sqr()).sum::<f64>() / (b - a) as f64;
            pts.push(((lo * hi).sqrt().log2(), 10.0 * p.log10()));
            lo = hi;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope + 3.0).abs() < 0.3, "slope {slope} dB/octave");
    }

    #[test]
    fn invalid_specs() {
        let above_nyquist = SweepSpec {
            f_end: 24_000.0,
            ..SweepSpec::default()
        };
        assert!(matches!(generate_sweep(&above_nyquist), Err(Error::InvalidSweep(_))));
        assert!(inverse_filter(&SweepSpec {
            f_start: 0.0,
            ..SweepSpec::default()
        })
        .is_err());
        assert!(SweepSpec {
            duration_s: 0.0,
            ..SweepSpec::default()
        }
        .validate()
        .is_err());
        assert!(SweepSpec {
            f_start: 30_000.0,
            ..SweepSpec::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn inverse_filter_length_matches_sweep() {
        let spec = short_spec();
        assert_eq!(
            inverse_filter(&spec).unwrap().len(),
            generate_sweep(&spec).unwrap().len()
        );
    }

    /// sweep ⊛ inverse on the default spec, via the FFT engine.
    fn compressed_default() -> (SweepSpec, Vec<f64>, Vec<Complex64>, usize) {
        let spec = SweepSpec::default();
        let x = generate_sweep(&spec).unwrap();
        let inv = inverse_filter(&spec).unwrap();
        let fft = RealFft::new((2 * x.len() - 1).next_power_of_two());
        let a = fft.forward(x.samples());
        let b = fft.forward(inv.samples());
        let prod: Vec<Complex64> = a.iter().zip(&b).map(|(p, q)| p * q).collect();
        let mut y = fft.inverse(&prod);
        y.truncate(2 * x.len() - 1);
        (spec, y, prod, fft.len())
    }

    #[test]
    fn inverse_filter_compresses_sweep() {
        let (spec, y, prod, size) = compressed_default();
        let n = spec.len();
        let peak = (0..y.len()).max_by(|&i, &j| y[i].abs().total_cmp(&y[j].abs())).unwrap();
        assert_eq!(peak, n - 1);
        assert!((y[peak] - 1.0).abs() < 1e-9);

        let lobe = 96;
        let total: f64 = y.iter().map(|v| v * v).sum();
        let near: f64 = y[peak - lobe..=peak + lobe].iter().map(|v| v * v).sum();
        assert!(near / total >= 0.99, "energy within 2 ms: {}", near / total);

        let side = y
            .iter()
            .enumerate()
            .filter(|(i, _)| i.abs_diff(peak) > lobe)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        let psr = 20.0 * (1.0 / side).log10();
        assert!(psr > 40.0, "peak-to-sidelobe {psr} dB");

        let bin = 48_000.0 / size as f64;
        let (lo, hi) = (
            (2.0 * spec.f_start / bin).ceil() as usize,
            (spec.f_end / 2.0 / bin) as usize,
        );
        let mags: Vec<f64> = prod[lo..=hi]
            .iter()
            .map(|c| 20.0 * c.norm_sqr().sqrt().log10())
            .collect();
        let mean = mags.iter().sum::<f64>() / mags.len() as f64;
        let (min, max) = mags
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
        assert!(
            max - mean <= 1.0 && mean - min <= 1.0,
            "ripple {min}..{max} around {mean}"
        );
    }

    #[test]
    fn identity_system_gives_impulse_at_delay() {
        let spec = SweepSpec::default();
        let sweep = generate_sweep(&spec).unwrap();
        let mut rec = vec![0.0; 100];
        rec.extend_from_slice(sweep.samples());
        rec.extend(std::iter::repeat_n(0.0, 48_000));
        let rec = AudioBuffer::new(rec, 48_000).unwrap();
        let ex = extract_rir_with(&rec, &spec, 48_000, geometry(), &ExtractOptions::default()).unwrap();
        assert_eq!(ex.peak_lag, 100);
        let taps = ex.rir.taps.samples();
        assert_eq!(taps[100], 1.0);
        // The recovered impulse is band-limited to the sweep band, so its
        // neighborhood is the ±2 ms main lobe rather than a single tap.
        let total: f64 = taps.iter().map(|v| v * v).sum();
        let near: f64 = taps[4..=196].iter().map(|v| v * v).sum();
        assert!(near / total >= 0.999, "energy fraction {}", near / total);
        assert_eq!(ex.rir.origin, Origin::Measured);
    }

    #[test]
    fn extraction_errors() {
        let spec = short_spec();
        let short = AudioBuffer::silence(100, 16_000).unwrap();
        assert!(matches!(
            extract_rir(&short, &spec, 10, geometry()),
            Err(Error::RecordingTooShort { .. })
        ));
        let zeros = AudioBuffer::silence(spec.len() + 10, 16_000).unwrap();
        assert_eq!(extract_rir(&zeros, &spec, 10, geometry()), Err(Error::NoPeak));
        let wrong_rate = AudioBuffer::silence(spec.len(), 8000).unwrap();
        assert!(matches!(
            extract_rir(&wrong_rate, &spec, 10, geometry()),
            Err(Error::SampleRateMismatch { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn scaling_does_not_change_shape(gain in 0.01f64..50.0, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let spec = short_spec();
            let h: Vec<f64> = (0..400).map(|i| rng.random_range(-1.0..1.0) * (-(i as f64) / 80.0).exp()).collect();
            let rec = record_through(&spec, &h).unwrap();
            let mut scaled = rec.clone();
            scaled.scale(gain);
            let a = extract_rir(&rec, &spec, 600, geometry()).unwrap();
            let b = extract_rir(&scaled, &spec, 600, geometry()).unwrap();
            for (p, q) in a.taps.samples().iter().zip(b.taps.samples()) {
                prop_assert!((p - q).abs() < 1e-6);
            }
        }

        #[test]
        fn peak_anchor_is_shift_equivariant(delay in 0usize..3000, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let spec = short_spec();
            let mut h = vec![0.0; 40];
            h.push(1.0);
            h.extend((0..300).map(|i| rng.random_range(-0.5..0.5) * (-(i as f64) / 60.0).exp()));
            let rec = record_through(&spec, &h).unwrap();
            let mut delayed = vec![0.0; delay];
            delayed.extend_from_slice(rec.samples());
            let delayed = AudioBuffer::new(delayed, spec.sample_rate).unwrap();
            let opts = ExtractOptions { anchor: WindowAnchor::Peak { pre_samples: 8 }, ..Default::default() };
            let a = extract_rir_with(&rec, &spec, 500, geometry(), &opts).unwrap();
            let b = extract_rir_with(&delayed, &spec, 500, geometry(), &opts).unwrap();
            prop_assert_eq!(b.peak_lag, a.peak_lag + delay as i64);
            for (p, q) in a.rir.taps.samples().iter().zip(b.rir.taps.samples()) {
                prop_assert!((p - q).abs() < 1e-6);
            }
        }
    }
}
