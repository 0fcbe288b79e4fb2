//! Scoring and evaluation commands: turn manifests plus trained models into
//! score CSVs, EER reports, and DET point files.

use std::fs;
use std::path::{Path, PathBuf};

use crate::audio::{read_manifest, ManifestEntry, Subset};
use crate::classifier::{score, HeadParams};
use crate::error::{Error, Result};
use crate::metrics::{
    compute_eer, write_det_csv, write_report_txt, write_score_csv, EvalReport, ScoreRecord,
};
use crate::tensor::Tensor2;

use super::config::PipelineConfig;
use super::extract::{extract_features, ExtractionModels};
use super::features::{write_feature_file, FeatureKind};
use super::models::{load_head, ModelPaths};

fn head_path(paths: &ModelPaths, kind: FeatureKind) -> PathBuf {
    match kind {
        FeatureKind::Sdc => paths.sdc_head(),
        FeatureKind::Stc => paths.stc_head(),
        FeatureKind::Stdc => paths.stdc_head(),
    }
}

fn load_models_for(kind: FeatureKind, model_dir: Option<&Path>) -> Result<ExtractionModels> {
    match (kind, model_dir) {
        (FeatureKind::Sdc, _) => Ok(ExtractionModels::none()),
        (_, Some(dir)) => ExtractionModels::load_for(kind, &ModelPaths::new(dir)),
        (_, None) => Err(Error::MissingModel(PathBuf::from(
            "model directory required for temporal features",
        ))),
    }
}

/// Extract features for manifest entries (optionally one subset) and write
/// them to a feature file. Returns the number of vectors written.
pub fn cmd_extract(
    manifest_path: &Path,
    config: &PipelineConfig,
    kind: FeatureKind,
    model_dir: Option<&Path>,
    subset: Option<Subset>,
    out_path: &Path,
) -> Result<usize> {
    config.validate()?;
    let base_dir = manifest_path.parent().unwrap_or(Path::new("."));
    let entries: Vec<ManifestEntry> = read_manifest(manifest_path)?
        .into_iter()
        .filter(|e| subset.is_none_or(|s| e.subset == s))
        .collect();
    let models = load_models_for(kind, model_dir)?;
    let extracted = extract_features(&entries, base_dir, config, kind, &models)?;
    let (ids, vectors): (Vec<String>, Vec<Vec<f64>>) = extracted.into_iter().unzip();
    write_feature_file(out_path, kind, &ids, &vectors)?;
    Ok(ids.len())
}

fn score_entries(
    entries: &[ManifestEntry],
    base_dir: &Path,
    config: &PipelineConfig,
    kind: FeatureKind,
    models: &ExtractionModels,
    head: &HeadParams,
) -> Result<Vec<ScoreRecord>> {
    let extracted = extract_features(entries, base_dir, config, kind, models)?;
    let mut features = Tensor2::zeros(extracted.len(), head.input_dim());
    for (row, (_, vector)) in extracted.iter().enumerate() {
        features.row_mut(row).copy_from_slice(vector);
    }
    let scores = score(&features, head)?;
    Ok(extracted
        .into_iter()
        .zip(scores)
        .zip(entries)
        .map(|(((utt_id, _), s), entry)| ScoreRecord {
            utt_id,
            score: s,
            label: entry.label,
        })
        .collect())
}

/// Score one subset and write the CSV.
pub fn cmd_score(
    manifest_path: &Path,
    config: &PipelineConfig,
    model_dir: &Path,
    kind: FeatureKind,
    subset: Subset,
    out_csv: &Path,
) -> Result<Vec<ScoreRecord>> {
    config.validate()?;
    let base_dir = manifest_path.parent().unwrap_or(Path::new("."));
    let entries: Vec<ManifestEntry> = read_manifest(manifest_path)?
        .into_iter()
        .filter(|e| e.subset == subset)
        .collect();
    let models = load_models_for(kind, Some(model_dir))?;
    let head = load_head(&head_path(&ModelPaths::new(model_dir), kind))?;
    let records = score_entries(&entries, base_dir, config, kind, &models, &head)?;
    write_score_csv(out_csv, &records)?;
    Ok(records)
}

/// Score the dev and eval subsets, write per-subset score CSVs, plain-text
/// reports, and DET point files, and return the computed reports.
pub fn cmd_eval(
    manifest_path: &Path,
    config: &PipelineConfig,
    model_dir: &Path,
    kind: FeatureKind,
    out_dir: &Path,
) -> Result<Vec<(Subset, EvalReport)>> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let base_dir = manifest_path.parent().unwrap_or(Path::new("."));
    let all_entries = read_manifest(manifest_path)?;
    let models = load_models_for(kind, Some(model_dir))?;
    let head = load_head(&head_path(&ModelPaths::new(model_dir), kind))?;

    let mut reports = Vec::new();
    for (subset, name) in [(Subset::Dev, "dev"), (Subset::Eval, "eval")] {
        let entries: Vec<ManifestEntry> = all_entries
            .iter()
            .filter(|e| e.subset == subset)
            .cloned()
            .collect();
        if entries.is_empty() {
            continue;
        }
        let records = score_entries(&entries, base_dir, config, kind, &models, &head)?;
        let report = compute_eer(&records)?;
        write_score_csv(&out_dir.join(format!("scores_{name}_{kind}.csv")), &records)?;
        write_report_txt(
            &out_dir.join(format!("report_{name}_{kind}.txt")),
            name,
            &report,
        )?;
        write_det_csv(&out_dir.join(format!("det_{name}_{kind}.csv")), &report)?;
        reports.push((subset, report));
    }
    Ok(reports)
}
