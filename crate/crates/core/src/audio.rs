//! Audio ingestion: WAV parsing, tone synthesis, resampling, and dataset
//! manifests.
//!
//! Everything downstream consumes mono [`AudioBuffer`]s at one canonical
//! sample rate ([`CANONICAL_SAMPLE_RATE`], 16 kHz). Stereo input is averaged
//! to mono and integer PCM is rescaled to `[-1, 1]` on load.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Sample rate every buffer is normalized to before feature extraction.
pub const CANONICAL_SAMPLE_RATE: u32 = 16_000;

/// Mono PCM audio with its sample rate. Immutable once constructed; the
/// constructor rejects empty, non-finite, or zero-rate input.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyAudio("in-memory buffer".into()));
        }
        if sample_rate == 0 {
            return Err(Error::BadConfig("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Linear interpolation of `samples` at fractional position `pos`, clamping
/// to the final sample beyond the right edge.
pub(crate) fn lerp_at(samples: &[f64], pos: f64) -> f64 {
    let i0 = pos.floor() as usize;
    if i0 + 1 >= samples.len() {
        return samples[samples.len() - 1];
    }
    let frac = pos - i0 as f64;
    samples[i0] * (1.0 - frac) + samples[i0 + 1] * frac
}

/// Resample with a linear-interpolation kernel. Equal rates return the input
/// bit-identically; output length is `floor(len * target / source)`.
pub fn resample(buf: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(Error::BadConfig("target rate must be positive".into()));
    }
    if target_rate == buf.sample_rate {
        return Ok(buf.clone());
    }
    let out_len = (buf.len() as u64 * target_rate as u64 / buf.sample_rate as u64) as usize;
    if out_len == 0 {
        return Err(Error::EmptyAudio(format!(
            "resampling {} samples to {} Hz leaves nothing",
            buf.len(),
            target_rate
        )));
    }
    let step = buf.sample_rate as f64 / target_rate as f64;
    let samples = (0..out_len)
        .map(|i| lerp_at(&buf.samples, i as f64 * step))
        .collect();
    AudioBuffer::new(samples, target_rate)
}

/// Synthesize a two-tone test signal
/// `amp_a * sin(2*pi*freq_a*t) + amp_b * sin(2*pi*freq_b*t)`.
pub fn synth_two_tone(
    amp_a: f64,
    amp_b: f64,
    freq_a: f64,
    freq_b: f64,
    duration_secs: f64,
    sample_rate: u32,
) -> Result<AudioBuffer> {
    let nyquist = sample_rate as f64 / 2.0;
    for &freq in &[freq_a, freq_b] {
        if freq >= nyquist {
            return Err(Error::AliasedFrequency { freq, nyquist });
        }
    }
    let n = (duration_secs * sample_rate as f64).round() as usize;
    if n == 0 {
        return Err(Error::EmptyAudio("zero-duration synthesis".into()));
    }
    let w_a = 2.0 * std::f64::consts::PI * freq_a / sample_rate as f64;
    let w_b = 2.0 * std::f64::consts::PI * freq_b / sample_rate as f64;
    let samples = (0..n)
        .map(|i| amp_a * (w_a * i as f64).sin() + amp_b * (w_b * i as f64).sin())
        .collect();
    AudioBuffer::new(samples, sample_rate)
}

// ---------------------------------------------------------------------------
// WAV I/O
// ---------------------------------------------------------------------------

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;

fn read_u16(bytes: &[u8], at: usize) -> Option<u16> {
    Some(u16::from_le_bytes(bytes.get(at..at + 2)?.try_into().ok()?))
}

fn read_u32(bytes: &[u8], at: usize) -> Option<u32> {
    Some(u32::from_le_bytes(bytes.get(at..at + 4)?.try_into().ok()?))
}

/// Load a RIFF/WAVE file as a mono buffer.
///
/// Accepts PCM 16-bit and IEEE float 32-bit, one or two channels. Stereo is
/// averaged per frame; PCM is rescaled by `1/32768`. Chunks other than
/// `fmt ` and `data` are skipped.
pub fn load_wav(path: &Path) -> Result<AudioBuffer> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_wav(&bytes, path)
}

/// Parse WAV bytes already in memory; `path` is only used in error messages.
pub fn parse_wav(bytes: &[u8], path: &Path) -> Result<AudioBuffer> {
    let corrupt = |detail: &str| Error::CorruptHeader {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    };
    let unsupported = |detail: String| Error::UnsupportedFormat {
        path: path.to_path_buf(),
        detail,
    };

    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(corrupt("missing RIFF/WAVE signature"));
    }

    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (code, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4).ok_or_else(|| corrupt("truncated chunk header"))? as usize;
        let body_start = pos + 8;
        let body_end = body_start + size;
        if body_end > bytes.len() {
            return Err(corrupt("chunk overruns file"));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(corrupt("fmt chunk too small"));
                }
                let code = read_u16(bytes, body_start).unwrap();
                let channels = read_u16(bytes, body_start + 2).unwrap();
                let rate = read_u32(bytes, body_start + 4).unwrap();
                let bits = read_u16(bytes, body_start + 14).unwrap();
                fmt = Some((code, channels, rate, bits));
            }
            b"data" => {
                data = Some(&bytes[body_start..body_end]);
            }
            _ => {}
        }
        // Chunk bodies are word-aligned; odd sizes carry a pad byte.
        pos = body_end + (size & 1);
    }

    let (code, channels, rate, bits) = fmt.ok_or_else(|| corrupt("no fmt chunk"))?;
    let data = data.ok_or_else(|| corrupt("no data chunk"))?;
    if channels == 0 || channels > 2 {
        return Err(unsupported(format!("{channels} channels")));
    }
    if rate == 0 {
        return Err(corrupt("zero sample rate"));
    }

    let interleaved: Vec<f64> = match (code, bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
            .collect(),
        (FORMAT_IEEE_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        (code, bits) => {
            return Err(unsupported(format!("format code {code}, {bits} bits")));
        }
    };

    let frames = interleaved.len() / channels as usize;
    if frames == 0 {
        return Err(Error::EmptyAudio(path.display().to_string()));
    }
    let samples: Vec<f64> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(2)
            .map(|c| (c[0] + c[1]) / 2.0)
            .collect()
    };
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    AudioBuffer::new(samples, rate)
}

/// Write a mono 16-bit PCM WAV file. Samples are clamped to `[-1, 1]` before
/// quantization.
pub fn write_wav_pcm16(path: &Path, buf: &AudioBuffer) -> Result<()> {
    let data_len = buf.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&buf.sample_rate().to_le_bytes());
    out.extend_from_slice(&(buf.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in buf.samples() {
        let q = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    BonaFide,
    Spoof,
}

impl Label {
    /// Class index used by the trainable heads (bona fide is the positive
    /// class).
    pub fn class_index(self) -> usize {
        match self {
            Label::Spoof => 0,
            Label::BonaFide => 1,
        }
    }
}

impl FromStr for Label {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s.to_ascii_lowercase().as_str() {
            "bona_fide" | "bonafide" => Ok(Label::BonaFide),
            "spoof" => Ok(Label::Spoof),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::BonaFide => write!(f, "bona_fide"),
            Label::Spoof => write!(f, "spoof"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subset {
    Train,
    Dev,
    Eval,
}

impl FromStr for Subset {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Subset::Train),
            "dev" => Ok(Subset::Dev),
            "eval" => Ok(Subset::Eval),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subset::Train => write!(f, "train"),
            Subset::Dev => write!(f, "dev"),
            Subset::Eval => write!(f, "eval"),
        }
    }
}

/// One dataset row: an audio path (relative to the manifest file), its label,
/// its split, and an optional attack tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub label: Label,
    pub subset: Subset,
    pub attack_tag: Option<String>,
}

pub const MANIFEST_HEADER: &str = "path,label,subset,attack_tag";

/// Parse a manifest CSV. The header must be exactly
/// `path,label,subset,attack_tag`; labels and subsets are case-insensitive;
/// an empty trailing field means no attack tag.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .map(|h| h.trim_start_matches('\u{feff}').trim_end_matches('\r'))
        .unwrap_or("");
    if header != MANIFEST_HEADER {
        return Err(Error::BadHeader(header.to_string()));
    }

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in lines.enumerate() {
        let row = i + 2; // 1-based, counting the header
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut fields = line.splitn(4, ',');
        let file = fields.next().unwrap_or("").to_string();
        let label_tok = fields.next().unwrap_or("");
        let subset_tok = fields.next().unwrap_or("");
        let tag = fields.next().unwrap_or("");

        if file.is_empty() {
            return Err(Error::BadLabel {
                row,
                field: "path",
                token: String::new(),
            });
        }
        let label = label_tok.parse::<Label>().map_err(|_| Error::BadLabel {
            row,
            field: "label",
            token: label_tok.to_string(),
        })?;
        let subset = subset_tok.parse::<Subset>().map_err(|_| Error::BadLabel {
            row,
            field: "subset",
            token: subset_tok.to_string(),
        })?;
        if !seen.insert(file.clone()) {
            return Err(Error::DuplicatePath { row, path: file });
        }
        entries.push(ManifestEntry {
            path: file,
            label,
            subset,
            attack_tag: if tag.is_empty() {
                None
            } else {
                Some(tag.to_string())
            },
        });
    }
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::from(MANIFEST_HEADER);
    text.push('\n');
    for e in entries {
        text.push_str(&format!(
            "{},{},{},{}\n",
            e.path,
            e.label,
            e.subset,
            e.attack_tag.as_deref().unwrap_or("")
        ));
    }
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
