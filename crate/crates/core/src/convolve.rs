//! FFT convolution engine.
//!
//! The kernel is cut into equal partitions of `P` samples, each transformed
//! once at FFT size `2P`. The signal is processed in blocks of `P`; each output
//! block is the sum over partitions of (delayed input spectrum × partition
//! spectrum), inverse-transformed and overlap-added. A short kernel uses a
//! single partition with `P ≥ 4·len(kernel)`; a long one uses
//! [`PartitionConfig::partition_len`].

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::fft::{Complex64, RealFft};
use crate::signal::AudioBuffer;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    /// Kernels up to this length use one partition.
    pub short_kernel_max: usize,
    /// Partition length for longer kernels (rounded up to a power of two).
    pub partition_len: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            short_kernel_max: 2048,
            partition_len: 4096,
        }
    }
}

/// A kernel prepared for repeated convolution.
#[derive(Debug, Clone)]
pub struct Convolver {
    kernel_len: usize,
    block: usize,
    fft: RealFft,
    partitions: Vec<Vec<Complex64>>,
}

impl Convolver {
    /// Panics if `kernel` is empty.
    pub fn new(kernel: &[f64], config: &PartitionConfig) -> Self {
        assert!(!kernel.is_empty(), "convolution kernel is empty");
        let block = if kernel.len() <= config.short_kernel_max {
            (4 * kernel.len()).next_power_of_two()
        } else {
            config.partition_len.max(1).next_power_of_two()
        };
        let fft = RealFft::new(2 * block);
        let partitions = kernel.chunks(block).map(|part| fft.forward(part)).collect();
        Self {
            kernel_len: kernel.len(),
            block,
            fft,
            partitions,
        }
    }

    pub fn kernel_len(&self) -> usize {
        self.kernel_len
    }

    pub fn partition_len(&self) -> usize {
        self.block
    }

    pub fn partitions(&self) -> usize {
        self.partitions.len()
    }

    /// Full linear convolution, `len(signal) + len(kernel) - 1` samples.
    pub fn process(&self, signal: &[f64]) -> Vec<f64> {
        if signal.is_empty() {
            return Vec::new();
        }
        let p = self.block;
        let k = self.partitions.len();
        let bins = self.fft.spectrum_len();
        let in_blocks = signal.len().div_ceil(p);
        let total_blocks = in_blocks + k - 1;
        let out_len = signal.len() + self.kernel_len - 1;

        let mut out = vec![0.0; (total_blocks + 1) * p];
        let mut history = vec![vec![Complex64::new(0.0, 0.0); bins]; k];
        let mut acc = vec![Complex64::new(0.0, 0.0); bins];
        let mut scratch = vec![Complex64::new(0.0, 0.0); p];
        let mut time = vec![0.0; 2 * p];

        for b in 0..total_blocks {
            if b < in_blocks {
                let start = b * p;
                let end = (start + p).min(signal.len());
                self.fft
                    .forward_into(&signal[start..end], &mut scratch, &mut history[b % k]);
            }
            acc.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            for (j, part) in self.partitions.iter().enumerate() {
                if j > b || b - j >= in_blocks {
                    continue;
                }
                let x = &history[(b - j) % k];
                for ((a, xv), hv) in acc.iter_mut().zip(x).zip(part) {
                    *a += xv * hv;
                }
            }
            self.fft.inverse_into(&acc, &mut scratch, &mut time);
            for (o, t) in out[b * p..b * p + 2 * p].iter_mut().zip(&time) {
                *o += t;
            }
        }
        out.truncate(out_len);
        out
    }
}

/// Full linear convolution of two slices with the default partitioning.
/// Returns an empty vector when either input is empty.
pub fn convolve_slices(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    if signal.is_empty() || kernel.is_empty() {
        return Vec::new();
    }
    Convolver::new(kernel, &PartitionConfig::default()).process(signal)
}

/// Full linear convolution of two buffers at the same sample rate.
pub fn convolve(signal: &AudioBuffer, kernel: &AudioBuffer) -> Result<AudioBuffer> {
    signal.ensure_same_rate(kernel)?;
    if signal.is_empty() || kernel.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    AudioBuffer::new(
        convolve_slices(signal.samples(), kernel.samples()),
        signal.sample_rate(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn direct(x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len() + h.len() - 1];
        for (i, xv) in x.iter().enumerate() {
            for (j, hv) in h.iter().enumerate() {
                y[i + j] += xv * hv;
            }
        }
        y
    }

    fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    fn noise(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn unit_impulse_is_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x = noise(&mut rng, 5000);
        let y = convolve_slices(&x, &[1.0]);
        assert_eq!(y.len(), x.len());
        let dev = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-7);
    }

    #[test]
    fn shifted_scaled_impulse() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let x = noise(&mut rng, 3000);
        let d = 137;
        let mut h = vec![0.0; d + 1];
        h[d] = 0.5;
        let y = convolve_slices(&x, &h);
        assert_eq!(y.len(), x.len() + d);
        for (i, v) in y.iter().enumerate() {
            let want = if i >= d { 0.5 * x[i - d] } else { 0.0 };
            assert!((v - want).abs() < 1e-9);
        }
    }

    #[test]
    fn random_second_against_half_second_kernel() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x = noise(&mut rng, 16000);
        let h = noise(&mut rng, 8000);
        let y = convolve_slices(&x, &h);
        assert!(rel_l2(&y, &direct(&x, &h)) < 1e-6);
    }

    #[test]
    fn buffer_errors() {
        let a = AudioBuffer::new(vec![1.0; 4], 16000).unwrap();
        let b = AudioBuffer::new(vec![1.0; 4], 48000).unwrap();
        let e = AudioBuffer::new(vec![], 16000).unwrap();
        assert!(matches!(convolve(&a, &b), Err(Error::SampleRateMismatch { .. })));
        assert_eq!(convolve(&a, &e), Err(Error::EmptyBuffer));
        assert_eq!(convolve(&e, &a), Err(Error::EmptyBuffer));
    }

    #[test]
    fn partition_choice() {
        let cfg = PartitionConfig::default();
        assert_eq!(Convolver::new(&[0.0; 100], &cfg).partition_len(), 512);
        assert_eq!(Convolver::new(&[0.0; 100], &cfg).partitions(), 1);
        let long = Convolver::new(&vec![0.0; 16000], &cfg);
        assert_eq!(long.partition_len(), 4096);
        assert_eq!(long.partitions(), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn matches_direct(sig_len in 1usize..3000, ker_len in 1usize..3000, part in 4u32..10, seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = noise(&mut rng, sig_len);
            let h = noise(&mut rng, ker_len);
            let cfg = PartitionConfig { short_kernel_max: 64, partition_len: 1 << part };
            let y = Convolver::new(&h, &cfg).process(&x);
            prop_assert_eq!(y.len(), sig_len + ker_len - 1);
            prop_assert!(rel_l2(&y, &direct(&x, &h)) < 1e-9);
        }

        #[test]
        fn linear_and_commutative(n in 1usize..1500, m in 1usize..1500, a in -2.0f64..2.0, b in -2.0f64..2.0, seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = noise(&mut rng, n);
            let y = noise(&mut rng, n);
            let h = noise(&mut rng, m);
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = convolve_slices(&mix, &h);
            let cx = convolve_slices(&x, &h);
            let cy = convolve_slices(&y, &h);
            for i in 0..lhs.len() {
                prop_assert!((lhs[i] - (a * cx[i] + b * cy[i])).abs() < 1e-6);
            }
            let swapped = convolve_slices(&h, &x);
            for (p, q) in swapped.iter().zip(&cx) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }
    }
}
