//! Feature extraction over manifests: resolve paths, decode and resample,
//! run the requested feature stage, fan out across utterances, and reuse
//! cached spectral vectors when a cache directory is configured.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::audio::{parse_wav, resample, AudioBuffer, ManifestEntry};
use crate::error::{Error, Result};
use crate::framing::frame_signal;
use crate::fusion::{encode_stdc, AutoencoderParams, NormStats};
use crate::ldp::{sdc_features, SdcVector};
use crate::melspec::{log_mel, SpectrogramMatrix};
use crate::temporal::{spectrogram_frames, BiLstm, StcVector};

use super::cache;
use super::config::PipelineConfig;
use super::features::FeatureKind;
use super::models::{load_bilstm, load_fusion, ModelPaths};

/// Models needed by the requested feature kind.
#[derive(Debug)]
pub struct ExtractionModels {
    pub bilstm: Option<BiLstm>,
    pub norm: Option<NormStats>,
    pub autoencoder: Option<AutoencoderParams>,
}

impl ExtractionModels {
    pub fn none() -> Self {
        Self {
            bilstm: None,
            norm: None,
            autoencoder: None,
        }
    }

    /// Load exactly what `kind` requires from a model directory.
    pub fn load_for(kind: FeatureKind, paths: &ModelPaths) -> Result<Self> {
        let mut models = Self::none();
        if matches!(kind, FeatureKind::Stc | FeatureKind::Stdc) {
            models.bilstm = Some(load_bilstm(&paths.bilstm())?);
        }
        if kind == FeatureKind::Stdc {
            let (norm, ae) = load_fusion(&paths.fusion())?;
            models.norm = Some(norm);
            models.autoencoder = Some(ae);
        }
        Ok(models)
    }

    fn bilstm(&self) -> Result<&BiLstm> {
        self.bilstm
            .as_ref()
            .ok_or_else(|| Error::MissingModel(PathBuf::from("bilstm.stdc")))
    }

    fn fusion(&self) -> Result<(&NormStats, &AutoencoderParams)> {
        match (&self.norm, &self.autoencoder) {
            (Some(n), Some(a)) => Ok((n, a)),
            _ => Err(Error::MissingModel(PathBuf::from("fusion.stdc"))),
        }
    }
}

/// Resolve a manifest-relative path against the manifest's directory.
pub fn resolve_path(base_dir: &Path, entry_path: &str) -> PathBuf {
    let p = Path::new(entry_path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

/// Canonical log-mel spectrogram of a buffer under a config (resample,
/// window, mel projection).
pub fn log_mel_for_buffer(buf: &AudioBuffer, config: &PipelineConfig) -> Result<SpectrogramMatrix> {
    let buf = resample(buf, config.sample_rate)?;
    let frames = frame_signal(&buf, config.n_fft, config.hop, true)?;
    log_mel(&frames, config.n_mels, config.sample_rate)
}

/// Spectral vector with optional cache lookup keyed on the raw WAV bytes.
fn sdc_cached(
    wav_bytes: &[u8],
    buf: &AudioBuffer,
    config: &PipelineConfig,
) -> Result<SdcVector> {
    let signature = config.feature_signature();
    if let Some(dir) = &config.cache_dir {
        let key = cache::sdc_cache_key(wav_bytes, &signature);
        if let Some(hit) = cache::load(dir, key, crate::ldp::SDC_DIM) {
            return SdcVector::new(hit);
        }
        let sdc = sdc_features(&log_mel_for_buffer(buf, config)?)?;
        cache::store(dir, key, sdc.coefficients())?;
        return Ok(sdc);
    }
    sdc_features(&log_mel_for_buffer(buf, config)?)
}

/// Temporal vector under the config's frame cap.
pub fn stc_for_spec(
    spec: &SpectrogramMatrix,
    net: &BiLstm,
    config: &PipelineConfig,
) -> Result<StcVector> {
    let frames = spectrogram_frames(spec, Some(config.max_frames));
    StcVector::new(net.forward(&frames)?)
}

/// Extract one utterance's vector of the requested kind.
pub fn extract_one(
    wav_path: &Path,
    config: &PipelineConfig,
    kind: FeatureKind,
    models: &ExtractionModels,
) -> Result<Vec<f64>> {
    let wav_bytes = fs::read(wav_path).map_err(|e| Error::io(wav_path, e))?;
    let buf = parse_wav(&wav_bytes, wav_path)?;
    match kind {
        FeatureKind::Sdc => Ok(sdc_cached(&wav_bytes, &buf, config)?.coefficients().to_vec()),
        FeatureKind::Stc => {
            let spec = log_mel_for_buffer(&buf, config)?;
            Ok(stc_for_spec(&spec, models.bilstm()?, config)?
                .coefficients()
                .to_vec())
        }
        FeatureKind::Stdc => {
            let sdc = sdc_cached(&wav_bytes, &buf, config)?;
            let spec = log_mel_for_buffer(&buf, config)?;
            let stc = stc_for_spec(&spec, models.bilstm()?, config)?;
            let (norm, ae) = models.fusion()?;
            Ok(encode_stdc(&sdc, &stc, norm, ae)?.coefficients().to_vec())
        }
    }
}

/// Run a fallible job over items with the configured worker fan-out,
/// preserving input order.
pub fn parallel_map<T, U, F>(config: &PipelineConfig, items: &[T], job: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync,
{
    if config.workers == 1 {
        return items.iter().map(&job).collect();
    }
    let run = || items.par_iter().map(&job).collect::<Result<Vec<U>>>();
    if config.workers == 0 {
        run()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::BadConfig(format!("cannot build worker pool: {e}")))?;
        pool.install(run)
    }
}

/// Order-preserving extraction of every manifest entry.
pub fn extract_features(
    entries: &[ManifestEntry],
    base_dir: &Path,
    config: &PipelineConfig,
    kind: FeatureKind,
    models: &ExtractionModels,
) -> Result<Vec<(String, Vec<f64>)>> {
    parallel_map(config, entries, |entry| {
        let path = resolve_path(base_dir, &entry.path);
        let vector = extract_one(&path, config, kind, models)?;
        Ok((entry.path.clone(), vector))
    })
}
