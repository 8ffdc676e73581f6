//! Power-of-two FFTs.
//!
//! [`Fft`] is an iterative radix-2 decimation-in-time transform with a
//! precomputed twiddle table. [`RealFft`] packs a real sequence of length `n`
//! into `n/2` complex points and untangles the spectrum, which halves the work
//! for the real-valued signals this crate deals with.

use alloc::vec;
use alloc::vec::Vec;

pub use num_complex::Complex64;

use crate::math;

#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    /// exp(-2πik/n) for k in 0..n/2.
    twiddles: Vec<Complex64>,
    bit_reverse: Vec<u32>,
}

impl Fft {
    /// Panics if `n` is not a power of two.
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT length {n} is not a power of two");
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * math::PI * k as f64 / n as f64;
                Complex64::new(math::cos(a), math::sin(a))
            })
            .collect();
        let bits = n.trailing_zeros();
        let bit_reverse = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        Self {
            n,
            twiddles,
            bit_reverse,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// Inverse transform without the 1/n scaling.
    pub fn inverse_unscaled(&self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        assert_eq!(data.len(), n);
        for i in 0..n {
            let j = self.bit_reverse[i] as usize;
            if j > i {
                data.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for block in data.chunks_exact_mut(size) {
                let (lo, hi) = block.split_at_mut(half);
                for (k, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    let w = self.twiddles[k * stride];
                    let w = if inverse { w.conj() } else { w };
                    let t = w * *b;
                    *b = *a - t;
                    *a += t;
                }
            }
            size *= 2;
        }
    }
}

/// Real-input FFT of even power-of-two length `n`, producing `n/2 + 1` bins.
#[derive(Debug, Clone)]
pub struct RealFft {
    n: usize,
    half: Fft,
    /// exp(-2πik/n) for k in 0..=n/2.
    twiddles: Vec<Complex64>,
}

impl RealFft {
    /// Panics unless `n` is a power of two and at least 2.
    pub fn new(n: usize) -> Self {
        assert!(
            n >= 2 && n.is_power_of_two(),
            "real FFT length {n} must be a power of two >= 2"
        );
        let twiddles = (0..=n / 2)
            .map(|k| {
                let a = -2.0 * math::PI * k as f64 / n as f64;
                Complex64::new(math::cos(a), math::sin(a))
            })
            .collect();
        Self {
            n,
            half: Fft::new(n / 2),
            twiddles,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spectrum_len(&self) -> usize {
        self.n / 2 + 1
    }

    /// Forward transform of `input` zero-padded to `n`. `scratch` must hold
    /// `n/2` points and `out` `n/2 + 1`.
    pub fn forward_into(&self, input: &[f64], scratch: &mut [Complex64], out: &mut [Complex64]) {
        let h = self.n / 2;
        assert!(input.len() <= self.n);
        assert_eq!(scratch.len(), h);
        assert_eq!(out.len(), h + 1);
        for (m, z) in scratch.iter_mut().enumerate() {
            let re = input.get(2 * m).copied().unwrap_or(0.0);
            let im = input.get(2 * m + 1).copied().unwrap_or(0.0);
            *z = Complex64::new(re, im);
        }
        self.half.forward(scratch);
        for k in 0..=h {
            let zk = scratch[k % h];
            let zc = scratch[(h - k) % h].conj();
            let even = (zk + zc) * 0.5;
            let odd = (zk - zc) * Complex64::new(0.0, -0.5);
            out[k] = even + self.twiddles[k] * odd;
        }
    }

    /// Inverse transform (scaled by 1/n) of an `n/2 + 1` bin spectrum.
    pub fn inverse_into(&self, spectrum: &[Complex64], scratch: &mut [Complex64], out: &mut [f64]) {
        let h = self.n / 2;
        assert_eq!(spectrum.len(), h + 1);
        assert_eq!(scratch.len(), h);
        assert_eq!(out.len(), self.n);
        for (k, z) in scratch.iter_mut().enumerate() {
            let xk = spectrum[k];
            let xc = spectrum[h - k].conj();
            let even = (xk + xc) * 0.5;
            let odd = (xk - xc) * 0.5 * self.twiddles[k].conj();
            *z = even + Complex64::new(0.0, 1.0) * odd;
        }
        self.half.inverse_unscaled(scratch);
        let scale = 1.0 / h as f64;
        for (m, z) in scratch.iter().enumerate() {
            out[2 * m] = z.re * scale;
            out[2 * m + 1] = z.im * scale;
        }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<Complex64> {
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.n / 2];
        let mut out = vec![Complex64::new(0.0, 0.0); self.spectrum_len()];
        self.forward_into(input, &mut scratch, &mut out);
        out
    }

    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.n / 2];
        let mut out = vec![0.0; self.n];
        self.inverse_into(spectrum, &mut scratch, &mut out);
        out
    }
}
