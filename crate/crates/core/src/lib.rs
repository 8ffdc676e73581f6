//! Algorithms for synthesizing classroom speech corpora.
//!
//! Everything in this crate is a pure transform over in-memory buffers, so it
//! builds without `std` (an allocator is required). File formats, batch
//! scheduling and the command line live in the `schoolroom` crate.
//!
//! Module map:
//!
//! * [`signal`]: the [`AudioBuffer`] carrier, level measurement, resampling.
//! * [`fft`] and [`convolve`]: FFT kernels and the partitioned overlap-add engine.
//! * [`ess`]: exponential sine sweeps, inverse filtering, impulse response extraction.
//! * [`room`]: shoebox image-source simulation, Sabine/Schroeder reverberation
//!   time, and RIR bank generation.
//! * [`babble`]: multi-talker classroom noise with a moving listener.
//! * [`pairing`]: embedding normalization and greedy child/adult matching.
//! * [`assemble`]: dialogue construction, SNR mixing, speaker-disjoint splits and
//!   the clean/rir/noise condition matrix.
#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]
// Range checks are written `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod assemble;
pub mod babble;
pub mod convolve;
mod error;
pub mod ess;
pub mod fft;
pub(crate) mod math;
pub mod pairing;
pub mod room;
pub mod seed;
pub mod signal;

pub use error::{Error, Result};
pub use signal::AudioBuffer;
