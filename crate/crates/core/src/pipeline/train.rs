//! Staged training: spectral extraction, joint recurrent/temporal-head
//! training, fusion fitting, and the final decision heads, all deterministic
//! from one seed.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::audio::{parse_wav, read_manifest, AudioBuffer, Label, ManifestEntry, Subset};
use crate::augment::{apply_augment, AugmentSpec, DEFAULT_HIGHPASS_HZ, DEFAULT_LOWPASS_HZ};
use crate::classifier::{HeadParams, HeadVariant, MLP_HIDDEN};
use crate::error::{Error, Result};
use crate::fusion::{fit_norm, train_autoencoder, AutoencoderParams, AE_HIDDEN, FUSED_DIM, STDC_DIM};
use crate::ldp::sdc_features;
use crate::temporal::{BiLstm, STC_HIDDEN};
use crate::tensor::{
    derive_seed, seeded_rng, xent_softmax, Adam, Tensor2, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS,
};

use super::cache;
use super::config::PipelineConfig;
use super::extract::{log_mel_for_buffer, parallel_map, resolve_path, stc_for_spec};
use super::models::{save_bilstm, save_fusion, save_head, ModelPaths};

/// Per-epoch diagnostics handed back to the caller.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub n_train_items: usize,
    pub n_augmented: usize,
    pub stage2_epoch_losses: Vec<f64>,
    pub autoencoder_epoch_losses: Vec<f64>,
}

struct TrainItem {
    id: String,
    buffer: AudioBuffer,
    label: Label,
    wav_bytes: Option<Vec<u8>>,
}

/// Top up the minority class with augmented copies, cycling through the six
/// augmentation kinds deterministically.
fn balance_classes(items: &mut Vec<TrainItem>, seed: u64) -> Result<usize> {
    let bona: Vec<usize> = (0..items.len())
        .filter(|&i| items[i].label == Label::BonaFide)
        .collect();
    let spoof: Vec<usize> = (0..items.len())
        .filter(|&i| items[i].label == Label::Spoof)
        .collect();
    if bona.is_empty() || spoof.is_empty() {
        return Err(Error::SingleClassData);
    }
    let (minority, need) = if bona.len() < spoof.len() {
        (bona.clone(), spoof.len() - bona.len())
    } else {
        (spoof.clone(), bona.len() - spoof.len())
    };
    let mut rng = seeded_rng(derive_seed(seed, 0xau64));
    for k in 0..need {
        let source = minority[k % minority.len()];
        let len = items[source].buffer.len() as i64;
        let spec = match k % 6 {
            0 => AugmentSpec::Highpass {
                cutoff_hz: DEFAULT_HIGHPASS_HZ,
            },
            1 => AugmentSpec::Lowpass {
                cutoff_hz: DEFAULT_LOWPASS_HZ,
            },
            2 => AugmentSpec::Compress {
                threshold: 0.5,
                ratio: 4.0,
            },
            3 => AugmentSpec::TimeShift {
                shift: rng.random_range(len / 8..len / 2),
            },
            4 => AugmentSpec::PitchShift {
                semitones: rng.random_range(-2.0..2.0),
            },
            _ => AugmentSpec::Reverb {
                decay_secs: 0.1,
                ir_secs: 0.06,
                seed: rng.random_range(0..u64::MAX / 2),
            },
        };
        let augmented = apply_augment(&items[source].buffer, &spec)?;
        items.push(TrainItem {
            id: format!("{}#aug{k}", items[source].id),
            buffer: augmented,
            label: items[source].label,
            wav_bytes: None,
        });
    }
    Ok(need)
}

/// Joint training of the recurrent extractor and a logistic supervision
/// head over the utterance summaries.
fn train_bilstm_jointly(
    sequences: &[Vec<Vec<f64>>],
    labels: &[usize],
    n_mels: usize,
    seed: u64,
) -> Result<(BiLstm, HeadParams, Vec<f64>)> {
    let mut net = BiLstm::new(n_mels, STC_HIDDEN, 2, &mut seeded_rng(derive_seed(seed, 1)));
    let mut head = HeadParams::init(
        HeadVariant::Logistic,
        net.output_dim(),
        MLP_HIDDEN,
        &mut seeded_rng(derive_seed(seed, 2)),
    );
    let mut shapes = net.param_shapes();
    shapes.extend(head.param_shapes());
    let mut adam = Adam::with_defaults(&shapes);
    let mut shuffle_rng = seeded_rng(derive_seed(seed, 3));
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut epoch_losses = Vec::with_capacity(DEFAULT_EPOCHS);

    for _ in 0..DEFAULT_EPOCHS {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for batch in order.chunks(DEFAULT_BATCH_SIZE) {
            let mut stc_batch = Tensor2::zeros(batch.len(), net.output_dim());
            let mut batch_labels = Vec::with_capacity(batch.len());
            let mut traces = Vec::with_capacity(batch.len());
            for (row, &idx) in batch.iter().enumerate() {
                let (summary, trace) = net.forward_trace(&sequences[idx])?;
                stc_batch.row_mut(row).copy_from_slice(&summary);
                traces.push(trace);
                batch_labels.push(labels[idx]);
            }
            let (logits, head_cache) = head.forward(&stc_batch)?;
            let (loss, d_logits) = xent_softmax(&logits, &batch_labels)?;
            let (head_grads, d_stc) = head.backward(&stc_batch, &head_cache, &d_logits)?;
            let mut net_grads = net.zero_grads();
            for (row, trace) in traces.iter().enumerate() {
                net.backward(trace, d_stc.row(row), &mut net_grads);
            }
            let mut params = net.params_mut();
            params.extend(head.params_mut());
            let mut grads = net_grads.refs();
            grads.extend(HeadParams::grad_refs(&head_grads));
            adam.step(&mut params, &grads)?;
            epoch_loss += loss;
            batches += 1;
        }
        epoch_losses.push(epoch_loss / batches as f64);
    }
    Ok((net, head, epoch_losses))
}

fn features_tensor(vectors: &[Vec<f64>]) -> Result<Tensor2> {
    let dim = vectors.first().map_or(0, |v| v.len());
    let mut out = Tensor2::zeros(vectors.len(), dim);
    for (row, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::ShapeMismatch("ragged feature rows".into()));
        }
        out.row_mut(row).copy_from_slice(v);
    }
    Ok(out)
}

/// Run every training stage off a manifest's train subset and write the
/// model artifacts into `model_dir`.
pub fn cmd_train(
    manifest_path: &Path,
    config: &PipelineConfig,
    model_dir: &Path,
) -> Result<TrainSummary> {
    config.validate()?;
    let base_dir = manifest_path.parent().unwrap_or(Path::new("."));
    let entries: Vec<ManifestEntry> = read_manifest(manifest_path)?
        .into_iter()
        .filter(|e| e.subset == Subset::Train)
        .collect();
    if entries.is_empty() {
        return Err(Error::SingleClassData);
    }

    // Stage 0: decode and balance.
    let mut items: Vec<TrainItem> = parallel_map(config, &entries, |entry| {
        let path = resolve_path(base_dir, &entry.path);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let buffer = parse_wav(&bytes, &path)?;
        Ok(TrainItem {
            id: entry.path.clone(),
            buffer,
            label: entry.label,
            wav_bytes: Some(bytes),
        })
    })?;
    let n_augmented = balance_classes(&mut items, config.seed)?;

    // Stage 1: spectral features and log-mel sequences.
    let signature = config.feature_signature();
    let per_item = parallel_map(config, &items, |item| {
        let spec = log_mel_for_buffer(&item.buffer, config)?;
        let sdc = match (&config.cache_dir, &item.wav_bytes) {
            (Some(dir), Some(bytes)) => {
                let key = cache::sdc_cache_key(bytes, &signature);
                match cache::load(dir, key, crate::ldp::SDC_DIM) {
                    Some(hit) => crate::ldp::SdcVector::new(hit)?,
                    None => {
                        let fresh = sdc_features(&spec)?;
                        cache::store(dir, key, fresh.coefficients())?;
                        fresh
                    }
                }
            }
            _ => sdc_features(&spec)?,
        };
        let frames = crate::temporal::spectrogram_frames(&spec, Some(config.max_frames));
        Ok((sdc, spec, frames))
    })?;
    let labels: Vec<usize> = items.iter().map(|i| i.label.class_index()).collect();
    let sdc_vectors: Vec<Vec<f64>> = per_item
        .iter()
        .map(|(sdc, _, _)| sdc.coefficients().to_vec())
        .collect();
    let sequences: Vec<Vec<Vec<f64>>> = per_item.iter().map(|(_, _, f)| f.clone()).collect();

    // Stage 2: joint recurrent training.
    let (net, stc_head, stage2_losses) =
        train_bilstm_jointly(&sequences, &labels, config.n_mels, config.seed)?;

    // Stage 3: fusion statistics and autoencoder.
    let stc_vectors: Vec<Vec<f64>> = parallel_map(config, &per_item, |(_, spec, _)| {
        Ok(stc_for_spec(spec, &net, config)?.coefficients().to_vec())
    })?;
    let fused: Vec<Vec<f64>> = sdc_vectors
        .iter()
        .zip(&stc_vectors)
        .map(|(sdc, stc)| {
            let mut v = Vec::with_capacity(FUSED_DIM);
            v.extend_from_slice(sdc);
            v.extend_from_slice(stc);
            v
        })
        .collect();
    let stats = fit_norm(&fused)?;
    let normalized: Vec<Vec<f64>> = fused
        .iter()
        .map(|v| stats.normalize(v))
        .collect::<Result<_>>()?;
    let ae_init = AutoencoderParams::init(
        FUSED_DIM,
        AE_HIDDEN,
        STDC_DIM,
        &mut seeded_rng(derive_seed(config.seed, 4)),
    );
    let (autoencoder, ae_losses) =
        train_autoencoder(&normalized, ae_init, derive_seed(config.seed, 5))?;

    // Stage 4: decision heads on the fused bottleneck and on raw spectral
    // vectors (the ablation path).
    let stdc_vectors: Vec<Vec<f64>> = normalized
        .iter()
        .map(|v| autoencoder.encode(v))
        .collect::<Result<_>>()?;
    let stdc_head = crate::classifier::train_head(
        &features_tensor(&stdc_vectors)?,
        &labels,
        HeadVariant::Mlp,
        derive_seed(config.seed, 6),
    )?;
    let sdc_head = crate::classifier::train_head(
        &features_tensor(&sdc_vectors)?,
        &labels,
        HeadVariant::Mlp,
        derive_seed(config.seed, 7),
    )?;

    fs::create_dir_all(model_dir).map_err(|e| Error::io(model_dir, e))?;
    let paths = ModelPaths::new(model_dir);
    save_bilstm(&paths.bilstm(), &net)?;
    save_head(&paths.stc_head(), &stc_head)?;
    save_fusion(&paths.fusion(), &stats, &autoencoder)?;
    save_head(&paths.stdc_head(), &stdc_head)?;
    save_head(&paths.sdc_head(), &sdc_head)?;

    Ok(TrainSummary {
        n_train_items: items.len(),
        n_augmented,
        stage2_epoch_losses: stage2_losses,
        autoencoder_epoch_losses: ae_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::synth_two_tone;

    fn item(label: Label, freq: f64, id: &str) -> TrainItem {
        TrainItem {
            id: id.into(),
            buffer: synth_two_tone(0.4, 0.2, freq, freq * 4.0, 0.3, 16_000).unwrap(),
            label,
            wav_bytes: None,
        }
    }

    #[test]
    fn balancing_tops_up_the_minority_class() {
        let mut items = vec![
            item(Label::BonaFide, 200.0, "b0"),
            item(Label::BonaFide, 220.0, "b1"),
            item(Label::BonaFide, 240.0, "b2"),
            item(Label::Spoof, 260.0, "s0"),
        ];
        let added = balance_classes(&mut items, 5).unwrap();
        assert_eq!(added, 2);
        assert_eq!(items.len(), 6);
        let spoofs = items.iter().filter(|i| i.label == Label::Spoof).count();
        assert_eq!(spoofs, 3);
        assert!(items[4].id.contains("#aug") && items[5].id.contains("#aug"));
        for i in &items {
            assert_eq!(i.buffer.sample_rate(), 16_000);
        }
    }

    #[test]
    fn balancing_rejects_single_class_input() {
        let mut items = vec![item(Label::Spoof, 200.0, "s0")];
        assert_eq!(
            balance_classes(&mut items, 5).unwrap_err().category(),
            "SingleClassData"
        );
    }

    #[test]
    fn balanced_input_is_untouched() {
        let mut items = vec![
            item(Label::BonaFide, 200.0, "b0"),
            item(Label::Spoof, 260.0, "s0"),
        ];
        assert_eq!(balance_classes(&mut items, 5).unwrap(), 0);
        assert_eq!(items.len(), 2);
    }
}
