//! Training-set augmentations: first-order high/low-pass filters, static
//! dynamic-range compression, circular time shift, resampling pitch shift,
//! and synthetic-impulse reverberation.
//!
//! Every augmentation preserves the input length exactly, is deterministic
//! given its spec (including the reverb seed), and ends with a hard clamp to
//! `[-1, 1]`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::audio::{lerp_at, AudioBuffer};
use crate::error::{Error, Result};
use crate::tensor::seeded_rng;

/// Default filter cutoffs (telephone-band endpoints).
pub const DEFAULT_HIGHPASS_HZ: f64 = 300.0;
pub const DEFAULT_LOWPASS_HZ: f64 = 3_400.0;

/// One augmentation with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum AugmentSpec {
    /// Single-pole high-pass at `cutoff_hz`.
    Highpass { cutoff_hz: f64 },
    /// Single-pole low-pass at `cutoff_hz`.
    Lowpass { cutoff_hz: f64 },
    /// Static compression: gain `(|x|/threshold)^(1/ratio - 1)` above the
    /// threshold.
    Compress { threshold: f64, ratio: f64 },
    /// Circular shift by `shift` samples (negative shifts left).
    TimeShift { shift: i64 },
    /// Resample by `2^(semitones/12)`, then trim or zero-pad back.
    PitchShift { semitones: f64 },
    /// Convolution with an exponentially decaying noise impulse response,
    /// renormalized to the input peak.
    Reverb {
        decay_secs: f64,
        ir_secs: f64,
        seed: u64,
    },
}

impl AugmentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            AugmentSpec::Highpass { .. } => "highpass",
            AugmentSpec::Lowpass { .. } => "lowpass",
            AugmentSpec::Compress { .. } => "compress",
            AugmentSpec::TimeShift { .. } => "time_shift",
            AugmentSpec::PitchShift { .. } => "pitch_shift",
            AugmentSpec::Reverb { .. } => "reverb",
        }
    }

    fn validate(&self, sample_rate: u32) -> Result<()> {
        let bad = |kind: &'static str, detail: String| Err(Error::BadParameter { kind, detail });
        let nyquist = sample_rate as f64 / 2.0;
        match *self {
            AugmentSpec::Highpass { cutoff_hz } | AugmentSpec::Lowpass { cutoff_hz } => {
                if cutoff_hz <= 0.0 || cutoff_hz >= nyquist {
                    return bad(self.kind(), format!("cutoff {cutoff_hz} Hz outside (0, {nyquist})"));
                }
            }
            AugmentSpec::Compress { threshold, ratio } => {
                if threshold <= 0.0 {
                    return bad("compress", format!("threshold {threshold} must be positive"));
                }
                if ratio < 1.0 {
                    return bad("compress", format!("ratio {ratio} must be at least 1"));
                }
            }
            AugmentSpec::TimeShift { .. } => {}
            AugmentSpec::PitchShift { semitones } => {
                if !(-24.0..=24.0).contains(&semitones) {
                    return bad("pitch_shift", format!("{semitones} semitones outside [-24, 24]"));
                }
            }
            AugmentSpec::Reverb {
                decay_secs,
                ir_secs,
                ..
            } => {
                if decay_secs <= 0.0 || ir_secs <= 0.0 {
                    return bad("reverb", "decay and impulse length must be positive".into());
                }
            }
        }
        Ok(())
    }
}

fn one_pole_lowpass(samples: &[f64], cutoff_hz: f64, sample_rate: u32) -> Vec<f64> {
    let alpha = 1.0 - (-2.0 * std::f64::consts::PI * cutoff_hz / sample_rate as f64).exp();
    let mut out = Vec::with_capacity(samples.len());
    let mut state = 0.0;
    for &x in samples {
        state += alpha * (x - state);
        out.push(state);
    }
    out
}

fn one_pole_highpass(samples: &[f64], cutoff_hz: f64, sample_rate: u32) -> Vec<f64> {
    // y[n] = a*(y[n-1] + x[n] - x[n-1]) with a = RC/(RC + dt).
    let rc = 1.0 / (2.0 * std::f64::consts::PI * cutoff_hz);
    let dt = 1.0 / sample_rate as f64;
    let a = rc / (rc + dt);
    let mut out = Vec::with_capacity(samples.len());
    let mut y = 0.0;
    let mut x_prev = 0.0;
    for &x in samples {
        y = a * (y + x - x_prev);
        x_prev = x;
        out.push(y);
    }
    out
}

fn compress(samples: &[f64], threshold: f64, ratio: f64) -> Vec<f64> {
    samples
        .iter()
        .map(|&x| {
            let mag = x.abs();
            if mag <= threshold {
                x
            } else {
                x.signum() * threshold * (mag / threshold).powf(1.0 / ratio)
            }
        })
        .collect()
}

fn time_shift(samples: &[f64], shift: i64) -> Vec<f64> {
    let len = samples.len() as i64;
    let offset = shift.rem_euclid(len) as usize;
    let mut out = Vec::with_capacity(samples.len());
    out.extend_from_slice(&samples[samples.len() - offset..]);
    out.extend_from_slice(&samples[..samples.len() - offset]);
    out
}

fn pitch_shift(samples: &[f64], semitones: f64) -> Vec<f64> {
    let factor = 2.0f64.powf(semitones / 12.0);
    let stretched_len = (samples.len() as f64 / factor).floor().max(1.0) as usize;
    let mut out: Vec<f64> = (0..stretched_len)
        .map(|i| lerp_at(samples, i as f64 * factor))
        .collect();
    out.resize(samples.len(), 0.0);
    out
}

fn reverb(samples: &[f64], decay_secs: f64, ir_secs: f64, seed: u64, sample_rate: u32) -> Vec<f64> {
    let ir_len = ((ir_secs * sample_rate as f64).round() as usize).max(1);
    let tau = decay_secs * sample_rate as f64;
    let mut rng = seeded_rng(seed);
    let mut ir = Vec::with_capacity(ir_len);
    ir.push(1.0);
    for n in 1..ir_len {
        let noise: f64 = rng.random_range(-1.0..1.0);
        ir.push(noise * (-(n as f64) / tau).exp());
    }

    let mut out = vec![0.0; samples.len()];
    for (n, o) in out.iter_mut().enumerate() {
        let k_max = n.min(ir_len - 1);
        let mut acc = 0.0;
        for (k, &h) in ir[..=k_max].iter().enumerate() {
            acc += h * samples[n - k];
        }
        *o = acc;
    }

    // Renormalize to the dry peak so reverberation cannot change loudness.
    let dry_peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let wet_peak = out.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if wet_peak > 0.0 && dry_peak > 0.0 {
        let gain = dry_peak / wet_peak;
        for o in &mut out {
            *o *= gain;
        }
    }
    out
}

/// Apply one augmentation, preserving length and clamping the result to
/// `[-1, 1]`.
pub fn apply_augment(buf: &AudioBuffer, spec: &AugmentSpec) -> Result<AudioBuffer> {
    spec.validate(buf.sample_rate())?;
    let samples = buf.samples();
    let mut out = match *spec {
        AugmentSpec::Highpass { cutoff_hz } => one_pole_highpass(samples, cutoff_hz, buf.sample_rate()),
        AugmentSpec::Lowpass { cutoff_hz } => one_pole_lowpass(samples, cutoff_hz, buf.sample_rate()),
        AugmentSpec::Compress { threshold, ratio } => compress(samples, threshold, ratio),
        AugmentSpec::TimeShift { shift } => time_shift(samples, shift),
        AugmentSpec::PitchShift { semitones } => pitch_shift(samples, semitones),
        AugmentSpec::Reverb {
            decay_secs,
            ir_secs,
            seed,
        } => reverb(samples, decay_secs, ir_secs, seed, buf.sample_rate()),
    };
    for s in &mut out {
        *s = s.clamp(-1.0, 1.0);
    }
    AudioBuffer::new(out, buf.sample_rate())
}

// ---------------------------------------------------------------------------
// Augmentation plan files
// ---------------------------------------------------------------------------

pub const PLAN_HEADER: &str = "utt_id,kind,param1,param2,seed";

/// One row of an augmentation plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanEntry {
    pub utt_id: String,
    pub spec: AugmentSpec,
}

impl fmt::Display for AugmentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            AugmentSpec::Highpass { cutoff_hz } => write!(f, "highpass,{cutoff_hz},,0"),
            AugmentSpec::Lowpass { cutoff_hz } => write!(f, "lowpass,{cutoff_hz},,0"),
            AugmentSpec::Compress { threshold, ratio } => {
                write!(f, "compress,{threshold},{ratio},0")
            }
            AugmentSpec::TimeShift { shift } => write!(f, "time_shift,{shift},,0"),
            AugmentSpec::PitchShift { semitones } => write!(f, "pitch_shift,{semitones},,0"),
            AugmentSpec::Reverb {
                decay_secs,
                ir_secs,
                seed,
            } => write!(f, "reverb,{decay_secs},{ir_secs},{seed}"),
        }
    }
}

impl FromStr for AugmentSpec {
    type Err = Error;

    /// Parse the `kind,param1,param2,seed` tail of a plan row.
    fn from_str(s: &str) -> Result<Self> {
        let fields: Vec<&str> = s.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::BadParameter {
                kind: "plan",
                detail: format!("expected kind,param1,param2,seed - got `{s}`"),
            });
        }
        let parse_f64 = |tok: &str, kind: &'static str| -> Result<f64> {
            tok.parse().map_err(|_| Error::BadParameter {
                kind,
                detail: format!("bad number `{tok}`"),
            })
        };
        match fields[0] {
            "highpass" => Ok(AugmentSpec::Highpass {
                cutoff_hz: parse_f64(fields[1], "highpass")?,
            }),
            "lowpass" => Ok(AugmentSpec::Lowpass {
                cutoff_hz: parse_f64(fields[1], "lowpass")?,
            }),
            "compress" => Ok(AugmentSpec::Compress {
                threshold: parse_f64(fields[1], "compress")?,
                ratio: parse_f64(fields[2], "compress")?,
            }),
            "time_shift" => Ok(AugmentSpec::TimeShift {
                shift: fields[1].parse().map_err(|_| Error::BadParameter {
                    kind: "time_shift",
                    detail: format!("bad shift `{}`", fields[1]),
                })?,
            }),
            "pitch_shift" => Ok(AugmentSpec::PitchShift {
                semitones: parse_f64(fields[1], "pitch_shift")?,
            }),
            "reverb" => Ok(AugmentSpec::Reverb {
                decay_secs: parse_f64(fields[1], "reverb")?,
                ir_secs: parse_f64(fields[2], "reverb")?,
                seed: fields[3].parse().map_err(|_| Error::BadParameter {
                    kind: "reverb",
                    detail: format!("bad seed `{}`", fields[3]),
                })?,
            }),
            other => Err(Error::BadParameter {
                kind: "plan",
                detail: format!("unknown augmentation `{other}`"),
            }),
        }
    }
}

pub fn write_plan(path: &Path, entries: &[PlanEntry]) -> Result<()> {
    let mut text = String::from(PLAN_HEADER);
    text.push('\n');
    for e in entries {
        text.push_str(&format!("{},{}\n", e.utt_id, e.spec));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_plan(path: &Path) -> Result<Vec<PlanEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim_end_matches('\r');
    if header != PLAN_HEADER {
        return Err(Error::BadHeader(header.to_string()));
    }
    let mut entries = Vec::new();
    for raw in lines {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (utt_id, rest) = line.split_once(',').ok_or_else(|| Error::BadParameter {
            kind: "plan",
            detail: format!("malformed row `{line}`"),
        })?;
        entries.push(PlanEntry {
            utt_id: utt_id.to_string(),
            spec: rest.parse()?,
        });
    }
    Ok(entries)
}
