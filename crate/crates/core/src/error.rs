use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Wav { path: PathBuf, message: String },

    #[error("unsupported channel count: {0} (expected mono)")]
    UnsupportedChannels(u16),

    #[error("unsupported sample rate: {0} Hz (expected 16000)")]
    UnsupportedSampleRate(u32),

    #[error("unsupported sample format: {0} (expected 16-bit PCM)")]
    UnsupportedFormat(String),

    #[error("utterance too short: {samples} samples, need at least {window}")]
    UtteranceTooShort { samples: usize, window: usize },

    #[error("segment shorter than requested crop: {frames} frames, crop {crop} at {start}")]
    CropOutOfRange {
        frames: usize,
        crop: usize,
        start: usize,
    },

    #[error("input below receptive field: {frames} frames, need at least {required}")]
    BelowReceptiveField { frames: usize, required: usize },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("non-finite gradient in tensor {0}")]
    NonFiniteGradient(&'static str),

    #[error("non-finite loss: {0}")]
    NonFiniteLoss(f64),

    #[error("cannot exclude from singleton")]
    SingletonExclusion,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("zero-norm embedding at speaker {speaker}, utterance {utterance}")]
    ZeroNorm { speaker: usize, utterance: usize },

    #[error("zero-norm centroid for speaker {0}")]
    ZeroNormCentroid(usize),

    #[error("not enough speakers: need {needed}, have {available} with usable utterances")]
    NotEnoughSpeakers { needed: usize, available: usize },

    #[error("invalid feature cache: {0}")]
    FeatureCache(String),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("score file line {line}: {message}")]
    ScoreFile { line: usize, message: String },

    #[error("synthetic speakers are not separable: {0}")]
    SynthCheck(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
