//! Fusion of spectral and temporal coefficients: per-dimension z-scoring to
//! put both feature families on a compatible range, then an
//! autoencoder-decoder whose bottleneck is the fused 128-dimensional
//! representation.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ldp::SdcVector;
use crate::tensor::{
    relu, seeded_rng, Adam, Tensor2, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS,
};
use crate::temporal::StcVector;

/// Length of the concatenated input (spectral + temporal halves).
pub const FUSED_DIM: usize = 256;

/// Hidden width on each side of the bottleneck.
pub const AE_HIDDEN: usize = 192;

/// Bottleneck width = fused feature length.
pub const STDC_DIM: usize = 128;

/// Variance floor applied to the per-dimension standard deviations.
pub const STD_FLOOR: f64 = 1e-6;

/// Per-dimension mean and (floored population) standard deviation fitted on
/// the training subset.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::StatsNotFitted {
                stats: self.dim(),
                feature: v.len(),
            });
        }
        Ok(v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }

    pub fn denormalize(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::StatsNotFitted {
                stats: self.dim(),
                feature: v.len(),
            });
        }
        Ok(v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(z, (m, s))| z * s + m)
            .collect())
    }
}

/// Population mean/std per dimension over at least two vectors, stds floored
/// at [`STD_FLOOR`].
pub fn fit_norm(train_vectors: &[Vec<f64>]) -> Result<NormStats> {
    if train_vectors.len() < 2 {
        return Err(Error::TooFewVectors {
            min: 2,
            got: train_vectors.len(),
        });
    }
    let dim = train_vectors[0].len();
    for v in train_vectors {
        if v.len() != dim {
            return Err(Error::ShapeMismatch(format!(
                "inconsistent vector lengths: {dim} vs {}",
                v.len()
            )));
        }
    }
    let n = train_vectors.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in train_vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; dim];
    for v in train_vectors {
        for ((s, x), m) in var.iter_mut().zip(v).zip(&mean) {
            let d = x - m;
            *s += d * d;
        }
    }
    let std = var.iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
    Ok(NormStats { mean, std })
}

/// Encoder `input -> hidden (relu) -> bottleneck (linear)` and the mirrored
/// decoder `bottleneck -> hidden (relu) -> input (linear)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderParams {
    pub enc_w1: Tensor2,
    pub enc_b1: Tensor2,
    pub enc_w2: Tensor2,
    pub enc_b2: Tensor2,
    pub dec_w1: Tensor2,
    pub dec_b1: Tensor2,
    pub dec_w2: Tensor2,
    pub dec_b2: Tensor2,
}

struct AeCache {
    enc_pre: Tensor2,
    enc_act: Tensor2,
    bottleneck: Tensor2,
    dec_pre: Tensor2,
    dec_act: Tensor2,
}

impl AutoencoderParams {
    pub fn init(input: usize, hidden: usize, bottleneck: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            enc_w1: Tensor2::glorot(hidden, input, rng),
            enc_b1: Tensor2::zeros(1, hidden),
            enc_w2: Tensor2::glorot(bottleneck, hidden, rng),
            enc_b2: Tensor2::zeros(1, bottleneck),
            dec_w1: Tensor2::glorot(hidden, bottleneck, rng),
            dec_b1: Tensor2::zeros(1, hidden),
            dec_w2: Tensor2::glorot(input, hidden, rng),
            dec_b2: Tensor2::zeros(1, input),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.enc_w1.cols()
    }

    pub fn bottleneck_dim(&self) -> usize {
        self.enc_w2.rows()
    }

    /// Bottleneck activations for one normalized vector.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "autoencoder expects {} inputs, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let mut h = self.enc_w1.matvec(x)?;
        for (v, &b) in h.iter_mut().zip(self.enc_b1.data()) {
            *v = relu(*v + b);
        }
        let mut z = self.enc_w2.matvec(&h)?;
        for (v, &b) in z.iter_mut().zip(self.enc_b2.data()) {
            *v += b;
        }
        Ok(z)
    }

    /// Decoder output for one bottleneck vector.
    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut h = self.dec_w1.matvec(z)?;
        for (v, &b) in h.iter_mut().zip(self.dec_b1.data()) {
            *v = relu(*v + b);
        }
        let mut x = self.dec_w2.matvec(&h)?;
        for (v, &b) in x.iter_mut().zip(self.dec_b2.data()) {
            *v += b;
        }
        Ok(x)
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.decode(&self.encode(x)?)
    }

    fn forward_batch(&self, x: &Tensor2) -> Result<(Tensor2, AeCache)> {
        let add_bias = |m: &mut Tensor2, b: &Tensor2| {
            for i in 0..m.rows() {
                for (v, &bias) in m.row_mut(i).iter_mut().zip(b.data()) {
                    *v += bias;
                }
            }
        };
        let mut enc_pre = x.matmul_nt(&self.enc_w1)?;
        add_bias(&mut enc_pre, &self.enc_b1);
        let mut enc_act = enc_pre.clone();
        for v in enc_act.data_mut() {
            *v = relu(*v);
        }
        let mut bottleneck = enc_act.matmul_nt(&self.enc_w2)?;
        add_bias(&mut bottleneck, &self.enc_b2);
        let mut dec_pre = bottleneck.matmul_nt(&self.dec_w1)?;
        add_bias(&mut dec_pre, &self.dec_b1);
        let mut dec_act = dec_pre.clone();
        for v in dec_act.data_mut() {
            *v = relu(*v);
        }
        let mut output = dec_act.matmul_nt(&self.dec_w2)?;
        add_bias(&mut output, &self.dec_b2);
        Ok((
            output,
            AeCache {
                enc_pre,
                enc_act,
                bottleneck,
                dec_pre,
                dec_act,
            },
        ))
    }

    /// Mean squared reconstruction error over a batch and its parameter
    /// gradients.
    pub fn loss_and_grads(&self, x: &Tensor2) -> Result<(f64, AutoencoderParams)> {
        let (output, cache) = self.forward_batch(x)?;
        let count = (x.rows() * x.cols()) as f64;
        let mut d_out = Tensor2::zeros(output.rows(), output.cols());
        let mut loss = 0.0;
        for ((d, &o), &t) in d_out
            .data_mut()
            .iter_mut()
            .zip(output.data())
            .zip(x.data())
        {
            let diff = o - t;
            loss += diff * diff;
            *d = 2.0 * diff / count;
        }
        loss /= count;

        let col_sums = |m: &Tensor2| -> Tensor2 {
            let mut out = Tensor2::zeros(1, m.cols());
            for i in 0..m.rows() {
                for (o, &v) in out.data_mut().iter_mut().zip(m.row(i)) {
                    *o += v;
                }
            }
            out
        };

        let d_dec_w2 = d_out.matmul_tn(&cache.dec_act)?;
        let d_dec_b2 = col_sums(&d_out);
        let mut d_dec_act = d_out.matmul(&self.dec_w2)?;
        for (g, &p) in d_dec_act.data_mut().iter_mut().zip(cache.dec_pre.data()) {
            if p <= 0.0 {
                *g = 0.0;
            }
        }
        let d_dec_w1 = d_dec_act.matmul_tn(&cache.bottleneck)?;
        let d_dec_b1 = col_sums(&d_dec_act);
        let d_bottleneck = d_dec_act.matmul(&self.dec_w1)?;
        let d_enc_w2 = d_bottleneck.matmul_tn(&cache.enc_act)?;
        let d_enc_b2 = col_sums(&d_bottleneck);
        let mut d_enc_act = d_bottleneck.matmul(&self.enc_w2)?;
        for (g, &p) in d_enc_act.data_mut().iter_mut().zip(cache.enc_pre.data()) {
            if p <= 0.0 {
                *g = 0.0;
            }
        }
        let d_enc_w1 = d_enc_act.matmul_tn(x)?;
        let d_enc_b1 = col_sums(&d_enc_act);

        Ok((
            loss,
            AutoencoderParams {
                enc_w1: d_enc_w1,
                enc_b1: d_enc_b1,
                enc_w2: d_enc_w2,
                enc_b2: d_enc_b2,
                dec_w1: d_dec_w1,
                dec_b1: d_dec_b1,
                dec_w2: d_dec_w2,
                dec_b2: d_dec_b2,
            },
        ))
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor2> {
        vec![
            &mut self.enc_w1,
            &mut self.enc_b1,
            &mut self.enc_w2,
            &mut self.enc_b2,
            &mut self.dec_w1,
            &mut self.dec_b1,
            &mut self.dec_w2,
            &mut self.dec_b2,
        ]
    }

    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        [
            &self.enc_w1,
            &self.enc_b1,
            &self.enc_w2,
            &self.enc_b2,
            &self.dec_w1,
            &self.dec_b1,
            &self.dec_w2,
            &self.dec_b2,
        ]
        .iter()
        .map(|t| t.shape())
        .collect()
    }

    fn grad_refs(grads: &AutoencoderParams) -> Vec<&Tensor2> {
        vec![
            &grads.enc_w1,
            &grads.enc_b1,
            &grads.enc_w2,
            &grads.enc_b2,
            &grads.dec_w1,
            &grads.dec_b1,
            &grads.dec_w2,
            &grads.dec_b2,
        ]
    }

    pub fn named_tensors(&self) -> Vec<(String, &Tensor2)> {
        vec![
            ("ae.enc_w1".into(), &self.enc_w1),
            ("ae.enc_b1".into(), &self.enc_b1),
            ("ae.enc_w2".into(), &self.enc_w2),
            ("ae.enc_b2".into(), &self.enc_b2),
            ("ae.dec_w1".into(), &self.dec_w1),
            ("ae.dec_b1".into(), &self.dec_b1),
            ("ae.dec_w2".into(), &self.dec_w2),
            ("ae.dec_b2".into(), &self.dec_b2),
        ]
    }
}

/// Fused feature vector: always 128 finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct StdcVector {
    coefficients: Vec<f64>,
}

impl StdcVector {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != STDC_DIM {
            return Err(Error::ShapeMismatch(format!(
                "fused vector must have {STDC_DIM} entries, got {}",
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

/// Normalize `concat(sdc, stc)` and run it through the encoder; the
/// bottleneck is the fused feature.
pub fn encode_stdc(
    sdc: &SdcVector,
    stc: &StcVector,
    stats: &NormStats,
    params: &AutoencoderParams,
) -> Result<StdcVector> {
    let mut fused = Vec::with_capacity(FUSED_DIM);
    fused.extend_from_slice(sdc.coefficients());
    fused.extend_from_slice(stc.coefficients());
    let normalized = stats.normalize(&fused)?;
    StdcVector::new(params.encode(&normalized)?)
}

/// Minimize mean squared reconstruction error with the shared protocol
/// (Adam lr 1e-4, decoupled weight decay 1e-3, batch 32, 50 epochs).
/// Returns the trained parameters and the mean loss per epoch.
pub fn train_autoencoder(
    train_vectors: &[Vec<f64>],
    init: AutoencoderParams,
    seed: u64,
) -> Result<(AutoencoderParams, Vec<f64>)> {
    if train_vectors.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let dim = init.input_dim();
    for v in train_vectors {
        if v.len() != dim {
            return Err(Error::ShapeMismatch(format!(
                "autoencoder input is {dim}-wide, got {}",
                v.len()
            )));
        }
    }
    let mut params = init;
    let mut adam = Adam::with_defaults(&params.param_shapes());
    let mut rng = seeded_rng(seed);
    let mut order: Vec<usize> = (0..train_vectors.len()).collect();
    let mut epoch_losses = Vec::with_capacity(DEFAULT_EPOCHS);

    for _ in 0..DEFAULT_EPOCHS {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for batch in order.chunks(DEFAULT_BATCH_SIZE) {
            let mut x = Tensor2::zeros(batch.len(), dim);
            for (row, &idx) in batch.iter().enumerate() {
                x.row_mut(row).copy_from_slice(&train_vectors[idx]);
            }
            let (loss, grads) = params.loss_and_grads(&x)?;
            adam.step(
                &mut params.params_mut(),
                &AutoencoderParams::grad_refs(&grads),
            )?;
            epoch_loss += loss;
            batches += 1;
        }
        epoch_losses.push(epoch_loss / batches as f64);
    }
    Ok((params, epoch_losses))
}

/// Mean squared reconstruction error of a vector set under fixed parameters.
pub fn reconstruction_mse(params: &AutoencoderParams, vectors: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for v in vectors {
        let r = params.reconstruct(v)?;
        total += r
            .iter()
            .zip(v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        count += v.len();
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradcheck;
    use rand::Rng;

    fn random_vectors(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeded_rng(seed);
        (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect()
    }

    #[test]
    fn fit_norm_two_vector_example() {
        let a = vec![0.0; 4];
        let b = vec![2.0; 4];
        let stats = fit_norm(&[a, b]).unwrap();
        assert!(stats.mean.iter().all(|&m| (m - 1.0).abs() < 1e-12));
        assert!(stats.std.iter().all(|&s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn fit_norm_floors_constant_dimensions() {
        let vectors = vec![vec![5.0, 1.0], vec![5.0, 3.0], vec![5.0, 5.0]];
        let stats = fit_norm(&vectors).unwrap();
        assert_eq!(stats.std[0], STD_FLOOR);
        let z = stats.normalize(&vectors[1]).unwrap();
        assert_eq!(z[0], 0.0);
    }

    #[test]
    fn fit_norm_requires_two_vectors() {
        assert_eq!(
            fit_norm(&[vec![1.0, 2.0]]).unwrap_err().category(),
            "TooFewVectors"
        );
    }

    #[test]
    fn normalized_batch_has_zero_mean_unit_std() {
        let vectors = random_vectors(50, 256, 61);
        let stats = fit_norm(&vectors).unwrap();
        let normalized: Vec<Vec<f64>> = vectors
            .iter()
            .map(|v| stats.normalize(v).unwrap())
            .collect();
        let n = normalized.len() as f64;
        for d in 0..256 {
            let mean: f64 = normalized.iter().map(|v| v[d]).sum::<f64>() / n;
            let var: f64 = normalized.iter().map(|v| v[d] * v[d]).sum::<f64>() / n;
            assert!(mean.abs() < 1e-9, "dim {d} mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-9, "dim {d} std {}", var.sqrt());
        }
    }

    #[test]
    fn normalize_then_denormalize_is_identity() {
        let vectors = random_vectors(20, 32, 62);
        let stats = fit_norm(&vectors).unwrap();
        for v in &vectors {
            let back = stats.denormalize(&stats.normalize(v).unwrap()).unwrap();
            for (a, b) in back.iter().zip(v) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn stats_reject_mismatched_dimensions() {
        let stats = fit_norm(&random_vectors(4, 8, 63)).unwrap();
        assert_eq!(
            stats.normalize(&[0.0; 9]).unwrap_err().category(),
            "StatsNotFitted"
        );
    }

    #[test]
    fn zero_weight_encoder_outputs_zero_at_fixed_width() {
        let params = AutoencoderParams {
            enc_w1: Tensor2::zeros(6, 8),
            enc_b1: Tensor2::zeros(1, 6),
            enc_w2: Tensor2::zeros(4, 6),
            enc_b2: Tensor2::zeros(1, 4),
            dec_w1: Tensor2::zeros(6, 4),
            dec_b1: Tensor2::zeros(1, 6),
            dec_w2: Tensor2::zeros(8, 6),
            dec_b2: Tensor2::zeros(1, 8),
        };
        let z = params.encode(&[0.5; 8]).unwrap();
        assert_eq!(z, vec![0.0; 4]);
    }

    #[test]
    fn training_decreases_loss_on_toy_set() {
        // 100 vectors, batch 32: 4 steps per epoch, 200 steps over 50 epochs.
        let vectors = random_vectors(100, 12, 64);
        let mut rng = seeded_rng(65);
        let init = AutoencoderParams::init(12, 9, 5, &mut rng);
        let initial = reconstruction_mse(&init, &vectors).unwrap();
        let (trained, losses) = train_autoencoder(&vectors, init, 66).unwrap();
        let final_mse = reconstruction_mse(&trained, &vectors).unwrap();
        assert!(
            final_mse < initial,
            "training did not improve: {initial} -> {final_mse}"
        );
        assert!(losses.last().unwrap() < losses.first().unwrap());
    }

    #[test]
    fn identical_vectors_are_reconstructed_closely() {
        // 2560 copies give 80 batches per epoch, enough optimizer steps for
        // the pinned 50-epoch protocol to drive the bias path to the target.
        let v: Vec<f64> = (0..10).map(|i| 0.05 * i as f64 - 0.2).collect();
        let vectors = vec![v.clone(); 2560];
        let mut rng = seeded_rng(67);
        let init = AutoencoderParams::init(10, 8, 4, &mut rng);
        let (trained, _) = train_autoencoder(&vectors, init, 68).unwrap();
        let mse_total: f64 = {
            let r = trained.reconstruct(&v).unwrap();
            r.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum()
        };
        let norm_sq: f64 = v.iter().map(|x| x * x).sum();
        assert!(
            mse_total < 1e-2 * norm_sq,
            "reconstruction error {mse_total} vs bound {}",
            1e-2 * norm_sq
        );
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let vectors = random_vectors(40, 6, 69);
        let mut rng = seeded_rng(70);
        let init = AutoencoderParams::init(6, 5, 3, &mut rng);
        let (a, _) = train_autoencoder(&vectors, init.clone(), 71).unwrap();
        let (b, _) = train_autoencoder(&vectors, init, 71).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let mut rng = seeded_rng(72);
        let init = AutoencoderParams::init(4, 3, 2, &mut rng);
        assert_eq!(
            train_autoencoder(&[], init, 0).unwrap_err().category(),
            "EmptyTrainingSet"
        );
    }

    #[test]
    fn autoencoder_gradients_match_finite_differences() {
        let mut rng = seeded_rng(73);
        let params = AutoencoderParams::init(6, 5, 3, &mut rng);
        let mut x = Tensor2::zeros(4, 6);
        for v in x.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let (_, grads) = params.loss_and_grads(&x).unwrap();
        let analytic = AutoencoderParams::grad_refs(&grads);
        let starts: Vec<Tensor2> = {
            let mut p = params.clone();
            p.params_mut().iter().map(|t| (**t).clone()).collect()
        };
        for (idx, start) in starts.iter().enumerate() {
            let mut probe = start.clone();
            gradcheck::assert_grad_matches(
                |t| {
                    let mut p = params.clone();
                    *p.params_mut()[idx] = t.clone();
                    p.loss_and_grads(&x).unwrap().0
                },
                &mut probe,
                analytic[idx],
                &format!("autoencoder tensor {idx}"),
            );
        }
    }

    #[test]
    fn encode_stdc_is_shape_stable() {
        let mut rng = seeded_rng(74);
        let params = AutoencoderParams::init(FUSED_DIM, AE_HIDDEN, STDC_DIM, &mut rng);
        let vectors = random_vectors(8, FUSED_DIM, 75);
        let stats = fit_norm(&vectors).unwrap();
        let sdc = SdcVector::new(vectors[0][..128].to_vec()).unwrap();
        let stc = StcVector::new(vectors[0][128..].to_vec()).unwrap();
        let fused = encode_stdc(&sdc, &stc, &stats, &params).unwrap();
        assert_eq!(fused.coefficients().len(), STDC_DIM);
        assert_eq!(
            fused,
            encode_stdc(&sdc, &stc, &stats, &params).unwrap()
        );
    }
}
