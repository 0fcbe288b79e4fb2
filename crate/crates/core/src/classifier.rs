//! Trainable decision heads over the fused (or raw spectral) features:
//! logistic regression and a small MLP, scored as the bona-fide/spoof logit
//! difference.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::audio::Label;
use crate::error::{Error, Result};
use crate::tensor::{
    relu, seeded_rng, xent_softmax, Adam, Tensor2, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS,
};

/// Hidden width of the MLP variant.
pub const MLP_HIDDEN: usize = 64;

pub const N_CLASSES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadVariant {
    Logistic,
    Mlp,
}

/// Head parameters. `Logistic` maps features straight to two logits; `Mlp`
/// inserts one relu layer.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadParams {
    Logistic {
        w: Tensor2, // 2 x d
        b: Tensor2, // 1 x 2
    },
    Mlp {
        w1: Tensor2, // hidden x d
        b1: Tensor2, // 1 x hidden
        w2: Tensor2, // 2 x hidden
        b2: Tensor2, // 1 x 2
    },
}

/// Gradients in the same layout as [`HeadParams`].
pub type HeadGrads = HeadParams;

/// Intermediate activations reused by the backward pass.
pub struct HeadCache {
    hidden_pre: Option<Tensor2>,
    hidden_act: Option<Tensor2>,
}

impl HeadParams {
    pub fn init(variant: HeadVariant, input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        match variant {
            HeadVariant::Logistic => HeadParams::Logistic {
                w: Tensor2::glorot(N_CLASSES, input_dim, rng),
                b: Tensor2::zeros(1, N_CLASSES),
            },
            HeadVariant::Mlp => HeadParams::Mlp {
                w1: Tensor2::glorot(hidden, input_dim, rng),
                b1: Tensor2::zeros(1, hidden),
                w2: Tensor2::glorot(N_CLASSES, hidden, rng),
                b2: Tensor2::zeros(1, N_CLASSES),
            },
        }
    }

    pub fn variant(&self) -> HeadVariant {
        match self {
            HeadParams::Logistic { .. } => HeadVariant::Logistic,
            HeadParams::Mlp { .. } => HeadVariant::Mlp,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            HeadParams::Logistic { w, .. } => w.cols(),
            HeadParams::Mlp { w1, .. } => w1.cols(),
        }
    }

    /// Logits for a batch of feature rows.
    pub fn forward(&self, features: &Tensor2) -> Result<(Tensor2, HeadCache)> {
        match self {
            HeadParams::Logistic { w, b } => {
                let mut logits = features.matmul_nt(w)?;
                for i in 0..logits.rows() {
                    for (v, &bias) in logits.row_mut(i).iter_mut().zip(b.data()) {
                        *v += bias;
                    }
                }
                Ok((
                    logits,
                    HeadCache {
                        hidden_pre: None,
                        hidden_act: None,
                    },
                ))
            }
            HeadParams::Mlp { w1, b1, w2, b2 } => {
                let mut pre = features.matmul_nt(w1)?;
                for i in 0..pre.rows() {
                    for (v, &bias) in pre.row_mut(i).iter_mut().zip(b1.data()) {
                        *v += bias;
                    }
                }
                let mut act = pre.clone();
                for v in act.data_mut() {
                    *v = relu(*v);
                }
                let mut logits = act.matmul_nt(w2)?;
                for i in 0..logits.rows() {
                    for (v, &bias) in logits.row_mut(i).iter_mut().zip(b2.data()) {
                        *v += bias;
                    }
                }
                Ok((
                    logits,
                    HeadCache {
                        hidden_pre: Some(pre),
                        hidden_act: Some(act),
                    },
                ))
            }
        }
    }

    /// Parameter gradients and the gradient w.r.t. the feature rows.
    pub fn backward(
        &self,
        features: &Tensor2,
        cache: &HeadCache,
        d_logits: &Tensor2,
    ) -> Result<(HeadGrads, Tensor2)> {
        let col_sums = |m: &Tensor2| -> Tensor2 {
            let mut out = Tensor2::zeros(1, m.cols());
            for i in 0..m.rows() {
                for (o, &v) in out.data_mut().iter_mut().zip(m.row(i)) {
                    *o += v;
                }
            }
            out
        };
        match self {
            HeadParams::Logistic { w, .. } => {
                let d_w = d_logits.matmul_tn(features)?;
                let d_b = col_sums(d_logits);
                let d_features = d_logits.matmul(w)?;
                Ok((HeadParams::Logistic { w: d_w, b: d_b }, d_features))
            }
            HeadParams::Mlp { w1, w2, .. } => {
                let act = cache.hidden_act.as_ref().expect("mlp cache");
                let pre = cache.hidden_pre.as_ref().expect("mlp cache");
                let d_w2 = d_logits.matmul_tn(act)?;
                let d_b2 = col_sums(d_logits);
                let mut d_hidden = d_logits.matmul(w2)?;
                for (g, &p) in d_hidden.data_mut().iter_mut().zip(pre.data()) {
                    if p <= 0.0 {
                        *g = 0.0;
                    }
                }
                let d_w1 = d_hidden.matmul_tn(features)?;
                let d_b1 = col_sums(&d_hidden);
                let d_features = d_hidden.matmul(w1)?;
                Ok((
                    HeadParams::Mlp {
                        w1: d_w1,
                        b1: d_b1,
                        w2: d_w2,
                        b2: d_b2,
                    },
                    d_features,
                ))
            }
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor2> {
        match self {
            HeadParams::Logistic { w, b } => vec![w, b],
            HeadParams::Mlp { w1, b1, w2, b2 } => vec![w1, b1, w2, b2],
        }
    }

    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        match self {
            HeadParams::Logistic { w, b } => vec![w.shape(), b.shape()],
            HeadParams::Mlp { w1, b1, w2, b2 } => {
                vec![w1.shape(), b1.shape(), w2.shape(), b2.shape()]
            }
        }
    }

    pub fn grad_refs(grads: &HeadGrads) -> Vec<&Tensor2> {
        match grads {
            HeadParams::Logistic { w, b } => vec![w, b],
            HeadParams::Mlp { w1, b1, w2, b2 } => vec![w1, b1, w2, b2],
        }
    }

    /// Container records. The variant is stored as a 1x1 meta tensor so a
    /// load can rebuild the right shape.
    pub fn named_tensors(&self) -> Vec<(String, Tensor2)> {
        let meta = |v: f64| Tensor2::from_vec(1, 1, vec![v]).unwrap();
        match self {
            HeadParams::Logistic { w, b } => vec![
                ("head.variant".into(), meta(0.0)),
                ("head.w".into(), w.clone()),
                ("head.b".into(), b.clone()),
            ],
            HeadParams::Mlp { w1, b1, w2, b2 } => vec![
                ("head.variant".into(), meta(1.0)),
                ("head.w1".into(), w1.clone()),
                ("head.b1".into(), b1.clone()),
                ("head.w2".into(), w2.clone()),
                ("head.b2".into(), b2.clone()),
            ],
        }
    }
}

/// Score = bona-fide logit minus spoof logit, one per feature row.
pub fn score(features: &Tensor2, params: &HeadParams) -> Result<Vec<f64>> {
    let (logits, _) = params.forward(features)?;
    Ok((0..logits.rows())
        .map(|i| logits.get(i, Label::BonaFide.class_index()) - logits.get(i, Label::Spoof.class_index()))
        .collect())
}

/// Train a head with the shared protocol: Adam (lr 1e-4, decoupled weight
/// decay 1e-3), batch size 32, 50 epochs, cross-entropy, deterministic for a
/// given seed.
pub fn train_head(
    features: &Tensor2,
    labels: &[usize],
    variant: HeadVariant,
    seed: u64,
) -> Result<HeadParams> {
    if labels.len() != features.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows but {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if labels.iter().all(|&l| l == 0) || labels.iter().all(|&l| l == 1) {
        return Err(Error::SingleClassData);
    }

    let mut rng = seeded_rng(seed);
    let mut params = HeadParams::init(variant, features.cols(), MLP_HIDDEN, &mut rng);
    let mut adam = Adam::with_defaults(&params.param_shapes());

    let mut order: Vec<usize> = (0..features.rows()).collect();
    for _ in 0..DEFAULT_EPOCHS {
        order.shuffle(&mut rng);
        for batch in order.chunks(DEFAULT_BATCH_SIZE) {
            let mut x = Tensor2::zeros(batch.len(), features.cols());
            let mut y = Vec::with_capacity(batch.len());
            for (row, &idx) in batch.iter().enumerate() {
                x.row_mut(row).copy_from_slice(features.row(idx));
                y.push(labels[idx]);
            }
            let (logits, cache) = params.forward(&x)?;
            let (_, d_logits) = xent_softmax(&logits, &y)?;
            let (grads, _) = params.backward(&x, &cache, &d_logits)?;
            adam.step(&mut params.params_mut(), &HeadParams::grad_refs(&grads))?;
        }
    }
    Ok(params)
}

/// Fraction of rows whose argmax logit matches the label.
pub fn training_accuracy(features: &Tensor2, labels: &[usize], params: &HeadParams) -> Result<f64> {
    let (logits, _) = params.forward(features)?;
    let correct = (0..logits.rows())
        .filter(|&i| {
            let row = logits.row(i);
            let predicted = if row[1] > row[0] { 1 } else { 0 };
            predicted == labels[i]
        })
        .count();
    Ok(correct as f64 / labels.len() as f64)
}
