use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("buffer is empty")]
    EmptyBuffer,
    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: u32, right: u32 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("recording has {found} samples, sweep needs at least {needed}")]
    RecordingTooShort { needed: usize, found: usize },
    #[error("deconvolved signal has no detectable peak")]
    NoPeak,
    #[error("invalid room: {0}")]
    InvalidRoom(String),
    #[error("source and receiver coincide")]
    CoincidentPositions,
    #[error("position ({x}, {y}, {z}) lies outside the room")]
    OutsideRoom { x: f64, y: f64, z: f64 },
    #[error("room has no absorption; reverberation time is unbounded")]
    NoAbsorption,
    #[error("decay curve does not reach {0} dB; cannot fit reverberation time")]
    DecayTooShort(f64),
    #[error("source pool is empty")]
    EmptyPool,
    #[error("utterance {id} has a zero embedding")]
    ZeroEmbedding { id: String },
    #[error("utterance {id} has embedding dimension {found}, expected {expected}")]
    DimensionMismatch { id: String, expected: usize, found: usize },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("input is silent; SNR is undefined")]
    SilentInput,
    #[error("speaker {speaker} carries contradictory fixed split labels")]
    SplitConflict { speaker: String },
    #[error("missing dependency for condition {0}")]
    MissingDependency(String),
}
