//! Log-Mel spectrogram front end: power spectrum over windowed frames, a
//! peak-normalized triangular mel filterbank, and `log(1 + energy)`
//! compression.
//!
//! The same matrix type also carries the deviation-code and integral maps
//! produced further down the pipeline, with per-kind value invariants
//! enforced on construction.

use crate::error::{Error, Result};
use crate::fft;
use crate::framing::FrameMatrix;

/// What a [`SpectrogramMatrix`] holds, with the invariant each kind implies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrogramKind {
    /// `log(1 + mel energy)`: all entries finite and nonnegative.
    LogMel,
    /// Ternary deviation codes: entries in `{-1, 0, 1}`.
    LdpCode,
    /// Packed 8-bit neighbor codes: integers in `[0, 255]`.
    IntegralMap,
}

/// Dense band-by-frame matrix (rows = mel bands, columns = frames).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramMatrix {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
    kind: SpectrogramKind,
}

impl SpectrogramMatrix {
    pub fn from_values(
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        kind: SpectrogramKind,
    ) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} spectrogram needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        let ok = match kind {
            SpectrogramKind::LogMel => values.iter().all(|v| v.is_finite() && *v >= 0.0),
            SpectrogramKind::LdpCode => values.iter().all(|v| *v == -1.0 || *v == 0.0 || *v == 1.0),
            SpectrogramKind::IntegralMap => values
                .iter()
                .all(|v| v.fract() == 0.0 && (0.0..=255.0).contains(v)),
        };
        if !ok {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self {
            values,
            rows,
            cols,
            kind,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind(&self) -> SpectrogramKind {
        self.kind
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// One frame as a contiguous band vector.
    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    /// Same shape and kind, every entry multiplied by `gain`. Only valid for
    /// kinds whose invariant survives the scaling (log-mel with `gain >= 0`).
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Self::from_values(
            self.rows,
            self.cols,
            self.values.iter().map(|v| v * gain).collect(),
            self.kind,
        )
    }
}

/// Per-frame squared DFT magnitudes over bins `0..=frame_len/2`. The frame
/// length must be a power of two.
pub fn power_spectrum(frames: &FrameMatrix) -> Result<Vec<Vec<f64>>> {
    if !frames.frame_len().is_power_of_two() {
        return Err(Error::BadFrameLength(frames.frame_len()));
    }
    Ok((0..frames.n_frames())
        .map(|k| fft::real_power_spectrum(frames.row(k)))
        .collect())
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10.0f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank, `n_mels x (n_fft/2 + 1)`, peak-normalized
/// (every triangle tops out at 1), centers uniformly spaced on the mel scale
/// between 0 Hz and Nyquist.
pub fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: u32) -> Result<Vec<Vec<f64>>> {
    let bins = n_fft / 2 + 1;
    if n_mels == 0 {
        return Err(Error::BadConfig("n_mels must be positive".into()));
    }
    if n_mels + 2 > bins {
        return Err(Error::TooManyBands { n_mels, bins });
    }
    let mel_max = hz_to_mel(sample_rate as f64 / 2.0);
    let grid: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / n_fft as f64;

    let mut bank = vec![vec![0.0; bins]; n_mels];
    for m in 0..n_mels {
        let (left, center, right) = (grid[m], grid[m + 1], grid[m + 2]);
        for (bin, weight) in bank[m].iter_mut().enumerate() {
            let f = bin as f64 * bin_hz;
            if f > left && f < right {
                *weight = if f <= center {
                    (f - left) / (center - left)
                } else {
                    (right - f) / (right - center)
                };
            }
        }
    }
    Ok(bank)
}

/// `log(1 + sum(power * filter))` per band and frame.
pub fn log_mel(frames: &FrameMatrix, n_mels: usize, sample_rate: u32) -> Result<SpectrogramMatrix> {
    let power = power_spectrum(frames)?;
    let bank = mel_filterbank(n_mels, frames.frame_len(), sample_rate)?;
    let cols = frames.n_frames();
    let mut values = vec![0.0; n_mels * cols];
    for (k, spectrum) in power.iter().enumerate() {
        for (m, filter) in bank.iter().enumerate() {
            let energy: f64 = spectrum.iter().zip(filter).map(|(p, w)| p * w).sum();
            values[m * cols + k] = (1.0 + energy).ln();
        }
    }
    SpectrogramMatrix::from_values(n_mels, cols, values, SpectrogramKind::LogMel)
}
