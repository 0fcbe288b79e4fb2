//! Crate-wide error type. Every fallible operation returns one of these
//! variants; `Error::category` yields the stable machine-parsable token the
//! CLI prints on failure.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // audio
    #[error("unsupported WAV encoding in {path}: {detail}")]
    UnsupportedFormat { path: PathBuf, detail: String },
    #[error("corrupt RIFF/WAVE header in {path}: {detail}")]
    CorruptHeader { path: PathBuf, detail: String },
    #[error("audio stream is empty: {0}")]
    EmptyAudio(String),
    #[error("tone frequency {freq} Hz is at or above Nyquist ({nyquist} Hz)")]
    AliasedFrequency { freq: f64, nyquist: f64 },
    #[error("manifest header must be `path,label,subset,attack_tag`, got `{0}`")]
    BadHeader(String),
    #[error("manifest row {row}: unknown {field} token `{token}`")]
    BadLabel {
        row: usize,
        field: &'static str,
        token: String,
    },
    #[error("manifest row {row}: duplicate path `{path}`")]
    DuplicatePath { row: usize, path: String },

    // framing
    #[error("window or hop length must be at least 1")]
    ZeroLength,
    #[error("signal of {signal_len} samples is shorter than one frame ({frame_len})")]
    SignalTooShort { signal_len: usize, frame_len: usize },

    // spectrogram
    #[error("frame length {0} is not a power of two")]
    BadFrameLength(usize),
    #[error("{n_mels} mel bands exceed the {bins} spectrum bins available")]
    TooManyBands { n_mels: usize, bins: usize },
    #[error("spectrogram {rows}x{cols} is smaller than the 3x3 coding window")]
    SpectrogramTooSmall { rows: usize, cols: usize },
    #[error("non-finite value in input")]
    NonFiniteInput,

    // tensor / training
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("class label {label} out of range for {classes} classes")]
    BadClassLabel { label: usize, classes: usize },
    #[error("cannot extract temporal features from an empty sequence")]
    EmptySequence,
    #[error("need at least {min} vectors to fit normalization, got {got}")]
    TooFewVectors { min: usize, got: usize },
    #[error("normalization stats dimension {stats} does not match feature dimension {feature}")]
    StatsNotFitted { stats: usize, feature: usize },
    #[error("autoencoder training set is empty")]
    EmptyTrainingSet,
    #[error("training data contains a single class; need both bona fide and spoof examples")]
    SingleClassData,

    // metrics
    #[error("scores contain a single class; EER needs both bona fide and spoof records")]
    SingleClassScores,

    // augment
    #[error("bad {kind} augmentation parameter: {detail}")]
    BadParameter { kind: &'static str, detail: String },

    // pipeline
    #[error("missing model artifact `{}`; run training first", .0.display())]
    MissingModel(PathBuf),
    #[error("bad model container {path}: {detail}")]
    BadContainer { path: PathBuf, detail: String },
    #[error("bad feature file {path}: {detail}")]
    BadFeatureFile { path: PathBuf, detail: String },
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable single-token category, suitable for scripted matching on CLI
    /// stderr output.
    pub fn category(&self) -> &'static str {
        match self {
            Error::UnsupportedFormat { .. } => "UnsupportedFormat",
            Error::CorruptHeader { .. } => "CorruptHeader",
            Error::EmptyAudio(_) => "EmptyAudio",
            Error::AliasedFrequency { .. } => "AliasedFrequency",
            Error::BadHeader(_) => "BadHeader",
            Error::BadLabel { .. } => "BadLabel",
            Error::DuplicatePath { .. } => "DuplicatePath",
            Error::ZeroLength => "ZeroLength",
            Error::SignalTooShort { .. } => "SignalTooShort",
            Error::BadFrameLength(_) => "BadFrameLength",
            Error::TooManyBands { .. } => "TooManyBands",
            Error::SpectrogramTooSmall { .. } => "SpectrogramTooSmall",
            Error::NonFiniteInput => "NonFiniteInput",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::BadClassLabel { .. } => "BadClassLabel",
            Error::EmptySequence => "EmptySequence",
            Error::TooFewVectors { .. } => "TooFewVectors",
            Error::StatsNotFitted { .. } => "StatsNotFitted",
            Error::EmptyTrainingSet => "EmptyTrainingSet",
            Error::SingleClassData => "SingleClassData",
            Error::SingleClassScores => "SingleClassScores",
            Error::BadParameter { .. } => "BadParameter",
            Error::MissingModel(_) => "MissingModel",
            Error::BadContainer { .. } => "BadContainer",
            Error::BadFeatureFile { .. } => "BadFeatureFile",
            Error::BadConfig(_) => "BadConfig",
            Error::IoFailure { .. } => "IoFailure",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoFailure {
            path: path.into(),
            source,
        }
    }
}
