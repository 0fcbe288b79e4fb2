//! Local deviation coding and the spectral deviation coefficients built on
//! it.
//!
//! Each interior spectrogram cell is compared against its eight neighbors
//! using thresholds `center +/- mu`, where `mu` is the 3x3 window mean. The
//! resulting higher/lower bit planes are packed into 8-bit integers per
//! cell, reduced to one masked sum per band, and projected through a real
//! DFT into a fixed 128-dimensional descriptor.

use crate::error::{Error, Result};
use crate::fft;
use crate::melspec::{SpectrogramKind, SpectrogramMatrix};

/// Length of every spectral deviation vector.
pub const SDC_DIM: usize = 128;

/// DFT length the per-band sums are zero-padded to.
const DFT_LEN: usize = 256;

/// Neighbor offsets in bit order: counter-clockwise from east with the row
/// axis pointing down, so `(row_delta, col_delta)` for
/// `[E, NE, N, NW, W, SW, S, SE]`. Bit `i` carries weight `2^i`.
pub const NEIGHBOR_OFFSETS: [(isize, isize); 8] = [
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// One bit per neighbor per interior cell, in [`NEIGHBOR_OFFSETS`] order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodePlane {
    rows: usize,
    cols: usize,
    bits: Vec<u8>, // rows * cols * 8, each 0 or 1
}

impl CodePlane {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![0; rows * cols * 8],
        }
    }

    /// Build a plane from per-cell neighbor bits (each 0 or 1).
    pub fn from_cells(rows: usize, cols: usize, cells: &[[u8; 8]]) -> Result<Self> {
        if cells.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} plane needs {} cells, got {}",
                rows * cols,
                cells.len()
            )));
        }
        let mut plane = Self::zeros(rows, cols);
        for (i, cell) in cells.iter().enumerate() {
            if cell.iter().any(|&b| b > 1) {
                return Err(Error::NonFiniteInput);
            }
            plane.bits[i * 8..(i + 1) * 8].copy_from_slice(cell);
        }
        Ok(plane)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bit(&self, row: usize, col: usize, neighbor: usize) -> u8 {
        self.bits[(row * self.cols + col) * 8 + neighbor]
    }

    fn set(&mut self, row: usize, col: usize, codes: [u8; 8]) {
        let at = (row * self.cols + col) * 8;
        self.bits[at..at + 8].copy_from_slice(&codes);
    }

    pub fn cell(&self, row: usize, col: usize) -> [u8; 8] {
        let at = (row * self.cols + col) * 8;
        self.bits[at..at + 8].try_into().unwrap()
    }
}

/// Higher and lower bit planes over the interior of a spectrogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdpMaps {
    pub lhs: CodePlane,
    pub lls: CodePlane,
}

/// Packed per-cell integers for the two planes.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralMaps {
    pub hhs_int: SpectrogramMatrix,
    pub lls_int: SpectrogramMatrix,
}

/// Binary selection mask over the integral maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl MaskMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.cols + col] == 1
    }

    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|&&b| b == 1).count()
    }
}

/// Spectral deviation coefficients: always 128 finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct SdcVector {
    coefficients: Vec<f64>,
}

impl SdcVector {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != SDC_DIM {
            return Err(Error::ShapeMismatch(format!(
                "SDC vector must have {SDC_DIM} entries, got {}",
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self { coefficients })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

/// Code one 3x3 window: returns the (higher, lower) bit per neighbor.
///
/// `mu` is the mean of all nine entries. A neighbor codes `+1` when it is at
/// least `center + mu`, else `-1` when it is at most `center - mu`, else
/// `0`; the first matching case wins, which makes ties (such as an all-zero
/// window) code `+1`.
pub fn ldp_code_cell(window: &[[f64; 3]; 3]) -> Result<([u8; 8], [u8; 8])> {
    let mut sum = 0.0;
    for row in window {
        for &v in row {
            if !v.is_finite() {
                return Err(Error::NonFiniteInput);
            }
            sum += v;
        }
    }
    let mu = sum / 9.0;
    let center = window[1][1];
    let mut higher = [0u8; 8];
    let mut lower = [0u8; 8];
    for (i, (dr, dc)) in NEIGHBOR_OFFSETS.iter().enumerate() {
        let neighbor = window[(1 + dr) as usize][(1 + dc) as usize];
        if neighbor >= center + mu {
            higher[i] = 1;
        } else if neighbor <= center - mu {
            lower[i] = 1;
        }
    }
    Ok((higher, lower))
}

/// Slide the 3x3 coder over every interior cell of a log-mel spectrogram.
/// Output planes are `(rows-2) x (cols-2)`.
pub fn ldp_maps(spec: &SpectrogramMatrix) -> Result<LdpMaps> {
    if spec.kind() != SpectrogramKind::LogMel {
        return Err(Error::ShapeMismatch(
            "deviation coding expects a log-mel spectrogram".into(),
        ));
    }
    if spec.rows() < 3 || spec.cols() < 3 {
        return Err(Error::SpectrogramTooSmall {
            rows: spec.rows(),
            cols: spec.cols(),
        });
    }
    let rows = spec.rows() - 2;
    let cols = spec.cols() - 2;
    let mut lhs = CodePlane::zeros(rows, cols);
    let mut lls = CodePlane::zeros(rows, cols);
    let mut window = [[0.0; 3]; 3];
    for r in 0..rows {
        for c in 0..cols {
            for (wr, row) in window.iter_mut().enumerate() {
                for (wc, v) in row.iter_mut().enumerate() {
                    *v = spec.get(r + wr, c + wc);
                }
            }
            let (hi, lo) = ldp_code_cell(&window)?;
            lhs.set(r, c, hi);
            lls.set(r, c, lo);
        }
    }
    Ok(LdpMaps { lhs, lls })
}

fn pack_plane(plane: &CodePlane) -> SpectrogramMatrix {
    let values: Vec<f64> = (0..plane.rows() * plane.cols())
        .map(|i| {
            let at = i * 8;
            plane.bits[at..at + 8]
                .iter()
                .enumerate()
                .map(|(bit, &b)| (b as u32) << bit)
                .sum::<u32>() as f64
        })
        .collect();
    SpectrogramMatrix::from_values(
        plane.rows(),
        plane.cols(),
        values,
        SpectrogramKind::IntegralMap,
    )
    .expect("packed bytes are integers in [0, 255]")
}

/// Pack each cell's 8 neighbor bits into a byte, east bit least significant,
/// separately for the two planes.
pub fn integralize(maps: &LdpMaps) -> IntegralMaps {
    IntegralMaps {
        hhs_int: pack_plane(&maps.lhs),
        lls_int: pack_plane(&maps.lls),
    }
}

/// Unpack one integral value back into its 8 neighbor bits.
pub fn decode_integral(value: u8) -> [u8; 8] {
    std::array::from_fn(|i| (value >> i) & 1)
}

/// Keep cells that clear the central-tendency threshold in *both* planes:
/// per-band means over frames, then the mean of those means, then a strict
/// comparison per cell.
pub fn select_sdc_mask(ints: &IntegralMaps) -> MaskMatrix {
    let rows = ints.hhs_int.rows();
    let cols = ints.hhs_int.cols();
    let ctv = |map: &SpectrogramMatrix| -> f64 {
        let band_means: Vec<f64> = (0..rows)
            .map(|r| map.row(r).iter().sum::<f64>() / cols as f64)
            .collect();
        band_means.iter().sum::<f64>() / rows as f64
    };
    let ctv_h = ctv(&ints.hhs_int);
    let ctv_l = ctv(&ints.lls_int);
    let mut data = vec![0u8; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            if ints.hhs_int.get(r, c) > ctv_h && ints.lls_int.get(r, c) > ctv_l {
                data[r * cols + c] = 1;
            }
        }
    }
    MaskMatrix { rows, cols, data }
}

/// Full descriptor pipeline: code, pack, mask, reduce each band to one
/// masked sum, then take `log(1 + |DFT|)` over the first 128 bins of a
/// 256-point transform.
pub fn sdc_features(spec: &SpectrogramMatrix) -> Result<SdcVector> {
    let maps = ldp_maps(spec)?;
    let ints = integralize(&maps);
    let mask = select_sdc_mask(&ints);

    let rows = ints.hhs_int.rows();
    let cols = ints.hhs_int.cols();
    if rows > DFT_LEN {
        return Err(Error::ShapeMismatch(format!(
            "{rows} bands exceed the {DFT_LEN}-point projection"
        )));
    }
    let mut band_sums = vec![0.0; DFT_LEN];
    for (r, band_sum) in band_sums.iter_mut().take(rows).enumerate() {
        for c in 0..cols {
            if mask.get(r, c) {
                *band_sum += ints.hhs_int.get(r, c) + ints.lls_int.get(r, c);
            }
        }
    }

    let magnitudes = fft::real_magnitudes(&band_sums);
    let coefficients = magnitudes[..SDC_DIM]
        .iter()
        .map(|m| (1.0 + m).ln())
        .collect();
    SdcVector::new(coefficients)
}
