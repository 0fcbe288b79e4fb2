//! Desk-scale synthetic corpus: bona fide utterances are enveloped two-tone
//! signals with light noise; spoofed ones carry one of three injected
//! anomalies (a spliced segment with a shifted upper tone, a flattened
//! amplitude envelope, or an inharmonic added partial).

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::audio::{write_manifest, write_wav_pcm16, AudioBuffer, Label, ManifestEntry, Subset};
use crate::error::{Error, Result};
use crate::tensor::{derive_seed, seeded_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpoofStyle {
    /// A contiguous fraction of the utterance is replaced by a segment with
    /// a shifted upper tone and a flattened local envelope.
    PartialSplice,
    /// The natural amplitude envelope is replaced by a constant.
    FlatEnvelope,
    /// An inharmonic partial rides on top of the genuine signal.
    AddedHarmonic,
}

impl SpoofStyle {
    pub fn tag(self) -> &'static str {
        match self {
            SpoofStyle::PartialSplice => "partial",
            SpoofStyle::FlatEnvelope => "flat_env",
            SpoofStyle::AddedHarmonic => "harmonic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub count: usize,
    pub seed: u64,
    pub sample_rate: u32,
    /// Fraction of each partial-spoof utterance that gets substituted.
    pub partial_fraction: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            count: 400,
            seed: 7,
            sample_rate: 16_000,
            partial_fraction: 0.35,
        }
    }
}

/// One generated utterance plus its generation plan.
#[derive(Debug, Clone)]
pub struct SynthUtterance {
    pub id: String,
    pub buffer: AudioBuffer,
    pub label: Label,
    pub subset: Subset,
    pub style: Option<SpoofStyle>,
    /// Sample range `[start, start + len)` substituted by the partial style.
    pub splice: Option<(usize, usize)>,
}

/// Slowly varying positive envelope: one long arc deformed by a few random
/// bumps.
fn natural_envelope(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let bumps: Vec<(f64, f64, f64)> = (0..rng.random_range(2..=4))
        .map(|_| {
            (
                rng.random_range(0.1..0.9),  // center (fraction of length)
                rng.random_range(0.04..0.15), // width
                rng.random_range(-0.25..0.3), // amplitude
            )
        })
        .collect();
    (0..n)
        .map(|j| {
            let t = j as f64 / (n - 1).max(1) as f64;
            let arc = 0.3 + 0.55 * (std::f64::consts::PI * t).sin();
            let bump: f64 = bumps
                .iter()
                .map(|&(c, w, a)| a * (-((t - c) / w).powi(2)).exp())
                .sum();
            (arc * (1.0 + bump)).clamp(0.1, 1.0)
        })
        .collect()
}

struct ToneParams {
    freq_low: f64,
    freq_high: f64,
    amp_low: f64,
    amp_high: f64,
    /// Inharmonic extra partial `(frequency, amplitude, flutter rate)`.
    extra: Option<(f64, f64, f64)>,
    /// Frequency micro-modulation `(rate Hz, depth)`; genuine voices carry
    /// it, over-smooth synthetic renderings do not.
    vibrato: Option<(f64, f64)>,
}

fn render(
    n: usize,
    sample_rate: u32,
    tones: &ToneParams,
    envelope: &[f64],
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let dt = 1.0 / sample_rate as f64;
    let tau = 2.0 * std::f64::consts::PI;
    let mut phase_low = 0.0f64;
    let mut phase_high = 0.0f64;
    let mut phase_extra = 0.0f64;
    (0..n)
        .map(|j| {
            let t = j as f64 * dt;
            let fm = match tones.vibrato {
                Some((rate, depth)) => 1.0 + depth * (tau * rate * t).sin(),
                None => 1.0,
            };
            phase_low += tau * tones.freq_low * fm * dt;
            phase_high += tau * tones.freq_high * fm * dt;
            let mut tone = tones.amp_low * phase_low.sin() + tones.amp_high * phase_high.sin();
            if let Some((freq, amp, flutter)) = tones.extra {
                // The artifact partial flutters at its own faster rate.
                let fm_extra = 1.0 + 0.05 * (tau * flutter * t).sin();
                phase_extra += tau * freq * fm_extra * dt;
                tone += amp * phase_extra.sin();
            }
            let noise = rng.random_range(-0.01..0.01);
            envelope[j] * tone + noise
        })
        .collect()
}

fn generate_one(index: usize, spec: &SynthSpec) -> Result<SynthUtterance> {
    let mut rng = seeded_rng(derive_seed(spec.seed, index as u64));
    let sr = spec.sample_rate;
    let n = sr as usize; // one second per utterance

    // Keep the nuisance variation (tone placement, amplitudes) narrow so the
    // injected anomalies rather than the carrier dominate class differences.
    let freq_low = rng.random_range(240.0..260.0);
    let genuine = ToneParams {
        freq_low,
        freq_high: freq_low * rng.random_range(3.6..4.0),
        amp_low: rng.random_range(0.3..0.4),
        amp_high: rng.random_range(0.25..0.35),
        extra: None,
        vibrato: Some((rng.random_range(4.0..7.0), rng.random_range(0.03..0.05))),
    };
    let envelope = natural_envelope(n, &mut rng);

    let label = if index.is_multiple_of(2) {
        Label::BonaFide
    } else {
        Label::Spoof
    };
    let style = match label {
        Label::BonaFide => None,
        Label::Spoof => Some(match (index / 2) % 3 {
            0 => SpoofStyle::PartialSplice,
            1 => SpoofStyle::FlatEnvelope,
            _ => SpoofStyle::AddedHarmonic,
        }),
    };

    let mut splice = None;
    let mut samples = match style {
        None => render(n, sr, &genuine, &envelope, &mut rng),
        Some(SpoofStyle::FlatEnvelope) => {
            // Over-smooth rendering: constant amplitude and no
            // micro-modulation.
            let smooth = ToneParams {
                vibrato: None,
                ..genuine
            };
            let flat = vec![0.75; n];
            render(n, sr, &smooth, &flat, &mut rng)
        }
        Some(SpoofStyle::AddedHarmonic) => {
            // Inharmonic fluttering partial well above the genuine tones.
            let spiked = ToneParams {
                extra: Some((freq_low * 5.3, 0.3, rng.random_range(11.0..13.0))),
                ..genuine
            };
            render(n, sr, &spiked, &envelope, &mut rng)
        }
        Some(SpoofStyle::PartialSplice) => {
            let mut s = render(n, sr, &genuine, &envelope, &mut rng);
            let splice_len = ((spec.partial_fraction * n as f64).round() as usize).min(n);
            let start = rng.random_range(0..=n - splice_len);
            let shifted = ToneParams {
                freq_high: genuine.freq_high * 1.6,
                vibrato: None,
                ..genuine
            };
            let flat = vec![0.8; n];
            let fake = render(n, sr, &shifted, &flat, &mut rng);
            s[start..start + splice_len].copy_from_slice(&fake[start..start + splice_len]);
            splice = Some((start, splice_len));
            s
        }
    };
    for v in &mut samples {
        *v = (*v * 0.8).clamp(-1.0, 1.0);
    }

    // 60/20/20 split, stratified over the label/style cycle.
    let subset = match index % 10 {
        0..=5 => Subset::Train,
        6 | 7 => Subset::Dev,
        _ => Subset::Eval,
    };

    Ok(SynthUtterance {
        id: format!("utt_{index:05}.wav"),
        buffer: AudioBuffer::new(samples, sr)?,
        label,
        subset,
        style,
        splice,
    })
}

/// Generate the corpus in memory, deterministically from the spec seed.
pub fn synth_corpus(spec: &SynthSpec) -> Result<Vec<SynthUtterance>> {
    if spec.count == 0 {
        return Err(Error::BadConfig("synthesis count must be positive".into()));
    }
    if !(0.0..=1.0).contains(&spec.partial_fraction) {
        return Err(Error::BadConfig(format!(
            "partial fraction {} outside [0, 1]",
            spec.partial_fraction
        )));
    }
    (0..spec.count).map(|i| generate_one(i, spec)).collect()
}

/// Write WAVs plus `manifest.csv` into `out_dir`; returns the generation
/// plan.
pub fn cmd_synth(out_dir: &Path, spec: &SynthSpec) -> Result<Vec<SynthUtterance>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let corpus = synth_corpus(spec)?;
    for utt in &corpus {
        write_wav_pcm16(&out_dir.join(&utt.id), &utt.buffer)?;
    }
    let entries: Vec<ManifestEntry> = corpus
        .iter()
        .map(|u| ManifestEntry {
            path: u.id.clone(),
            label: u.label,
            subset: u.subset,
            attack_tag: u.style.map(|s| s.tag().to_string()),
        })
        .collect();
    write_manifest(&out_dir.join("manifest.csv"), &entries)?;
    Ok(corpus)
}
