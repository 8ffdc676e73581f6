//! Filesystem side of the classroom-dialogue toolkit: WAV and manifest IO,
//! configuration, parallel stage drivers and the command implementations
//! behind the `schoolroom` binary. The signal processing itself lives in
//! `schoolroom-core`.

pub mod bank_io;
pub mod cli;
pub mod config;
pub mod embeddings;
pub mod error;
pub mod hash;
pub mod log;
pub mod manifest;
pub mod pipeline;
pub mod stages;
pub mod wav;

pub use error::{Error, Result};
