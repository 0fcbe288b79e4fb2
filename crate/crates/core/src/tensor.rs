//! Dense 2-D tensors, the handful of neural-network primitives the trainable
//! stages share, the Adam optimizer, and the binary parameter container.
//!
//! Everything computes in f64; the on-disk container stores f32 little
//! endian. Gradients are written analytically per layer and verified against
//! central finite differences in the test suites.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default training hyperparameters used by every trainable stage.
pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;
pub const DEFAULT_WEIGHT_DECAY: f64 = 1e-3;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_EPOCHS: usize = 50;

/// Row-major 2-D tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} tensor needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Glorot-uniform initialization: `U(-s, s)` with
    /// `s = sqrt(6 / (fan_in + fan_out))`, fan-in = cols, fan-out = rows.
    pub fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let s = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.random_range(-s..s)).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// `self (m x p) * other (p x n)`.
    pub fn matmul(&self, other: &Tensor2) -> Result<Tensor2> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Tensor2::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (k, &a_ik) in a_row.iter().enumerate() {
                if a_ik == 0.0 {
                    continue;
                }
                let b_row = other.row(k);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a_ik * b;
                }
            }
        }
        Ok(out)
    }

    /// `self (m x p) * other^T (p x n)` where `other` is `n x p`.
    pub fn matmul_nt(&self, other: &Tensor2) -> Result<Tensor2> {
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by transposed {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Tensor2::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (j, o) in out_row.iter_mut().enumerate() {
                *o = a_row
                    .iter()
                    .zip(other.row(j))
                    .fold(0.0, |acc, (a, b)| acc + a * b);
            }
        }
        Ok(out)
    }

    /// `self^T (p x m) * other (m x n)` where `self` is `m x p`.
    pub fn matmul_tn(&self, other: &Tensor2) -> Result<Tensor2> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply transposed {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Tensor2::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = out.row_mut(i);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `y = W x` for a column vector `x` of length `cols`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "matvec: {}x{} against vector of {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(0.0, |acc, (w, v)| acc + w * v)
            })
            .collect())
    }

    /// `y = W^T x` for a column vector `x` of length `rows`.
    pub fn matvec_transposed(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::ShapeMismatch(format!(
                "transposed matvec: {}x{} against vector of {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(i)) {
                *o += xi * w;
            }
        }
        Ok(out)
    }

    /// Rank-1 update `self += scale * a b^T`.
    pub fn add_outer(&mut self, a: &[f64], b: &[f64], scale: f64) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            let s = ai * scale;
            for (o, &bj) in self.row_mut(i).iter_mut().zip(b) {
                *o += s * bj;
            }
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Mean cross-entropy over softmaxed logit rows, plus its gradient
/// `(softmax - onehot) / batch`.
pub fn xent_softmax(logits: &Tensor2, labels: &[usize]) -> Result<(f64, Tensor2)> {
    if labels.len() != logits.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} logit rows but {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    let classes = logits.cols();
    let batch = logits.rows();
    let mut grad = Tensor2::zeros(batch, classes);
    let mut loss = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::BadClassLabel { label, classes });
        }
        let row = logits.row(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let exp_sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_norm = max + exp_sum.ln();
        loss += log_norm - row[label];
        let grad_row = grad.row_mut(i);
        for (c, g) in grad_row.iter_mut().enumerate() {
            let p = (row[c] - log_norm).exp();
            *g = (p - if c == label { 1.0 } else { 0.0 }) / batch as f64;
        }
    }
    Ok((loss / batch as f64, grad))
}

/// Adam with decoupled weight decay. One `step` call advances the shared
/// step counter and updates every parameter tensor in order.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Tensor2>,
    second: Vec<Tensor2>,
}

impl Adam {
    pub fn new(learning_rate: f64, weight_decay: f64, shapes: &[(usize, usize)]) -> Self {
        Self {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: shapes.iter().map(|&(r, c)| Tensor2::zeros(r, c)).collect(),
            second: shapes.iter().map(|&(r, c)| Tensor2::zeros(r, c)).collect(),
        }
    }

    pub fn with_defaults(shapes: &[(usize, usize)]) -> Self {
        Self::new(DEFAULT_LEARNING_RATE, DEFAULT_WEIGHT_DECAY, shapes)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Decoupled decay first, then the bias-corrected Adam update.
    pub fn step(&mut self, params: &mut [&mut Tensor2], grads: &[&Tensor2]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::ShapeMismatch(format!(
                "optimizer tracks {} tensors, got {} params / {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), (m, v)) in params
            .iter()
            .zip(grads)
            .zip(self.first.iter().zip(&self.second))
        {
            if p.shape() != m.shape() || g.shape() != m.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "optimizer slot is {:?}, got param {:?} / grad {:?}",
                    m.shape(),
                    p.shape(),
                    g.shape()
                )));
            }
            let _ = v;
        }

        self.step += 1;
        let bias1 = 1.0 - self.beta1.powi(self.step as i32);
        let bias2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            let decay = self.learning_rate * self.weight_decay;
            for (((p, &g), m), v) in param
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *p -= decay * *p;
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

/// Derive an independent stream seed from a base seed (splitmix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Parameter container
// ---------------------------------------------------------------------------

pub const CONTAINER_MAGIC: &[u8; 4] = b"STDC";
pub const CONTAINER_VERSION: u16 = 1;

/// Write named tensors: magic, version u16, then per-tensor records of
/// (name length u16, name bytes, rows u32, cols u32, f32 LE data).
pub fn write_container(path: &Path, entries: &[(&str, &Tensor2)]) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(CONTAINER_MAGIC);
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    for (name, tensor) in entries {
        let bytes = name.as_bytes();
        if bytes.len() > u16::MAX as usize {
            return Err(Error::BadContainer {
                path: path.to_path_buf(),
                detail: format!("tensor name too long ({} bytes)", bytes.len()),
            });
        }
        out.extend_from_slice(&(bytes.len() as u16).to_le_bytes());
        out.extend_from_slice(bytes);
        out.extend_from_slice(&(tensor.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(tensor.cols() as u32).to_le_bytes());
        for &v in tensor.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Read every record of a container, in file order.
pub fn read_container(path: &Path) -> Result<Vec<(String, Tensor2)>> {
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingModel(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    let bad = |detail: &str| Error::BadContainer {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    };
    if bytes.len() < 6 || &bytes[0..4] != CONTAINER_MAGIC {
        return Err(bad("missing STDC magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CONTAINER_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let mut entries = Vec::new();
    let mut pos = 6;
    while pos < bytes.len() {
        if pos + 2 > bytes.len() {
            return Err(bad("truncated record header"));
        }
        let name_len = u16::from_le_bytes([bytes[pos], bytes[pos + 1]]) as usize;
        pos += 2;
        if pos + name_len + 8 > bytes.len() {
            return Err(bad("truncated record"));
        }
        let name = std::str::from_utf8(&bytes[pos..pos + name_len])
            .map_err(|_| bad("tensor name is not UTF-8"))?
            .to_string();
        pos += name_len;
        let rows = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        pos += 8;
        let payload = rows * cols * 4;
        if pos + payload > bytes.len() {
            return Err(bad("truncated tensor payload"));
        }
        let data: Vec<f64> = bytes[pos..pos + payload]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        pos += payload;
        entries.push((name, Tensor2::from_vec(rows, cols, data)?));
    }
    Ok(entries)
}

/// Pull one named tensor out of a record list read back from a container.
pub fn take_tensor(
    entries: &mut Vec<(String, Tensor2)>,
    name: &str,
    path: &Path,
) -> Result<Tensor2> {
    match entries.iter().position(|(n, _)| n == name) {
        Some(i) => Ok(entries.remove(i).1),
        None => Err(Error::BadContainer {
            path: path.to_path_buf(),
            detail: format!("missing tensor `{name}`"),
        }),
    }
}
