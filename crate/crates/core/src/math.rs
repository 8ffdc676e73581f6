//! Float functions routed through `libm` so the crate stays `no_std`.

pub use core::f64::consts::PI;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}
#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}
#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}
#[inline]
pub fn log10(x: f64) -> f64 {
    libm::log10(x)
}
#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}
#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}
#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}
#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// 10^(db/20).
#[inline]
pub fn db_to_amp(db: f64) -> f64 {
    powf(10.0, db / 20.0)
}

/// 20·log10(a); `-inf` for zero.
#[inline]
pub fn amp_to_db(a: f64) -> f64 {
    20.0 * log10(a)
}

/// Zeroth-order modified Bessel function of the first kind (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= (half / k) * (half / k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Normalized sinc, sin(πx)/(πx).
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = PI * x;
        sin(px) / px
    }
}

/// Kaiser window evaluated at `x` in [-1, 1]; zero outside.
#[inline]
pub fn kaiser(x: f64, beta: f64, i0_beta: f64) -> f64 {
    let r = 1.0 - x * x;
    if r <= 0.0 {
        if r == 0.0 {
            1.0 / i0_beta
        } else {
            0.0
        }
    } else {
        bessel_i0(beta * sqrt(r)) / i0_beta
    }
}

/// x^n by repeated squaring; `powi(0.0, 0) == 1`.
pub fn powi(mut x: f64, mut n: u32) -> f64 {
    let mut acc = 1.0;
    while n > 0 {
        if n & 1 == 1 {
            acc *= x;
        }
        x *= x;
        n >>= 1;
    }
    acc
}
