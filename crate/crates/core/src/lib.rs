//! Voice anti-spoofing feature pipeline.
//!
//! The crate builds three utterance descriptors and the machinery around
//! them:
//!
//! - **SDC** — spectral deviation coefficients: a log-mel spectrogram is
//!   coded by a ternary 3x3 deviation operator, split into higher/lower bit
//!   planes, packed into per-cell bytes, reduced by a central-tendency mask,
//!   and projected through a real DFT into 128 dimensions.
//! - **STC** — sequential temporal coefficients: a two-layer bidirectional
//!   LSTM over the spectrogram frames, summarized into 128 dimensions.
//! - **STDC** — the fused representation: both vectors are z-scored into a
//!   compatible range, concatenated, and distilled through an autoencoder
//!   bottleneck back to 128 dimensions.
//!
//! Around the features sit trainable decision heads, an EER/DET evaluation
//! harness, five training-time augmentations, a synthetic corpus generator,
//! and the file formats (manifests, feature files, model containers, score
//! CSVs) that the `stdc` CLI exposes.

pub mod audio;
pub mod augment;
pub mod classifier;
pub mod error;
pub mod fft;
pub mod framing;
pub mod fusion;
pub mod ldp;
pub mod melspec;
pub mod metrics;
pub mod pipeline;
pub mod temporal;
pub mod tensor;

pub use audio::{AudioBuffer, Label, ManifestEntry, Subset};
pub use error::{Error, Result};
pub use fusion::StdcVector;
pub use ldp::SdcVector;
pub use melspec::{SpectrogramKind, SpectrogramMatrix};
pub use metrics::{EvalReport, ScoreRecord};
pub use pipeline::{FeatureKind, PipelineConfig};
pub use temporal::StcVector;
pub use tensor::Tensor2;
