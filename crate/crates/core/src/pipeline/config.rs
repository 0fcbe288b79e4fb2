//! Pipeline configuration: analysis geometry, seed, worker count, and the
//! optional model/cache directories. Loadable from plain `key = value`
//! files.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    /// Sequence cap for the recurrent stage.
    pub max_frames: usize,
    pub seed: u64,
    /// Extraction worker count; 0 means use the runtime default.
    pub workers: usize,
    pub model_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            n_fft: 2_048,
            hop: 512,
            n_mels: 128,
            max_frames: 256,
            seed: 7,
            workers: 0,
            model_dir: None,
            cache_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 || self.hop == 0 || self.n_mels == 0 || self.max_frames == 0 {
            return Err(Error::BadConfig(
                "sample_rate, hop, n_mels, and max_frames must be positive".into(),
            ));
        }
        if !self.n_fft.is_power_of_two() {
            return Err(Error::BadConfig(format!(
                "n_fft must be a power of two, got {}",
                self.n_fft
            )));
        }
        Ok(())
    }

    /// Parse a `key = value` file; `#` starts a comment, blank lines are
    /// skipped, unknown keys are rejected.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str_contents(&text)
    }

    pub fn from_str_contents(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::BadConfig(format!("line {}: expected key = value", i + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let parse_err =
                |key: &str| Error::BadConfig(format!("line {}: bad value for {key}", i + 1));
            match key {
                "sample_rate" => config.sample_rate = value.parse().map_err(|_| parse_err(key))?,
                "n_fft" => config.n_fft = value.parse().map_err(|_| parse_err(key))?,
                "hop" => config.hop = value.parse().map_err(|_| parse_err(key))?,
                "n_mels" => config.n_mels = value.parse().map_err(|_| parse_err(key))?,
                "max_frames" => config.max_frames = value.parse().map_err(|_| parse_err(key))?,
                "seed" => config.seed = value.parse().map_err(|_| parse_err(key))?,
                "workers" => config.workers = value.parse().map_err(|_| parse_err(key))?,
                "model_dir" => config.model_dir = Some(PathBuf::from(value)),
                "cache_dir" => config.cache_dir = Some(PathBuf::from(value)),
                other => {
                    return Err(Error::BadConfig(format!(
                        "line {}: unknown key `{other}`",
                        i + 1
                    )))
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Canonical string of the fields that determine extracted features;
    /// cache keys hash this alongside the audio bytes.
    pub fn feature_signature(&self) -> String {
        format!(
            "sample_rate={};n_fft={};hop={};n_mels={};max_frames={}",
            self.sample_rate, self.n_fft, self.hop, self.n_mels, self.max_frames
        )
    }
}
