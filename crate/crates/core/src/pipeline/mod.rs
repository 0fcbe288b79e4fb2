//! End-to-end orchestration: configuration, feature files, the feature
//! cache, model artifacts, synthetic corpus generation, staged training, and
//! evaluation.

pub mod cache;
pub mod config;
pub mod eval;
pub mod extract;
pub mod features;
pub mod models;
pub mod synth;
pub mod train;

pub use config::PipelineConfig;
pub use eval::{cmd_eval, cmd_extract, cmd_score};
pub use extract::{extract_features, extract_one, log_mel_for_buffer, ExtractionModels};
pub use features::{read_feature_file, write_feature_file, FeatureKind, FEATURE_DIM};
pub use models::ModelPaths;
pub use synth::{cmd_synth, synth_corpus, SpoofStyle, SynthSpec, SynthUtterance};
pub use train::{cmd_train, TrainSummary};
