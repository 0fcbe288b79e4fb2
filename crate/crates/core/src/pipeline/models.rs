//! Model artifact files and their save/load plumbing. Every artifact is one
//! parameter container; a missing file surfaces as `MissingModel`.

use std::path::{Path, PathBuf};

use crate::classifier::HeadParams;
use crate::error::{Error, Result};
use crate::fusion::{AutoencoderParams, NormStats};
use crate::temporal::{BiLayer, BiLstm, LstmCellParams};
use crate::tensor::{read_container, take_tensor, write_container, Tensor2};

/// Well-known artifact names inside a model directory.
#[derive(Debug, Clone)]
pub struct ModelPaths {
    pub dir: PathBuf,
}

impl ModelPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn bilstm(&self) -> PathBuf {
        self.dir.join("bilstm.stdc")
    }

    pub fn stc_head(&self) -> PathBuf {
        self.dir.join("stc_head.stdc")
    }

    pub fn sdc_head(&self) -> PathBuf {
        self.dir.join("sdc_head.stdc")
    }

    pub fn fusion(&self) -> PathBuf {
        self.dir.join("fusion.stdc")
    }

    pub fn stdc_head(&self) -> PathBuf {
        self.dir.join("stdc_head.stdc")
    }
}

pub fn save_bilstm(path: &Path, net: &BiLstm) -> Result<()> {
    let named = net.named_tensors();
    let entries: Vec<(&str, &Tensor2)> = named.iter().map(|(n, t)| (n.as_str(), *t)).collect();
    write_container(path, &entries)
}

pub fn load_bilstm(path: &Path) -> Result<BiLstm> {
    let mut entries = read_container(path)?;
    let n_layers = entries
        .iter()
        .filter(|(n, _)| n.ends_with(".fwd.w_x"))
        .count();
    if n_layers == 0 {
        return Err(Error::BadContainer {
            path: path.to_path_buf(),
            detail: "no recurrent layers found".into(),
        });
    }
    let mut layers = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let mut cell = |dir: &str| -> Result<LstmCellParams> {
            Ok(LstmCellParams {
                w_x: take_tensor(&mut entries, &format!("lstm.l{l}.{dir}.w_x"), path)?,
                w_h: take_tensor(&mut entries, &format!("lstm.l{l}.{dir}.w_h"), path)?,
                b: take_tensor(&mut entries, &format!("lstm.l{l}.{dir}.b"), path)?,
            })
        };
        let fwd = cell("fwd")?;
        let bwd = cell("bwd")?;
        layers.push(BiLayer { fwd, bwd });
    }
    BiLstm::from_layers(layers).map_err(|e| Error::BadContainer {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

pub fn save_head(path: &Path, head: &HeadParams) -> Result<()> {
    let named = head.named_tensors();
    let entries: Vec<(&str, &Tensor2)> = named.iter().map(|(n, t)| (n.as_str(), t)).collect();
    write_container(path, &entries)
}

pub fn load_head(path: &Path) -> Result<HeadParams> {
    let mut entries = read_container(path)?;
    let variant = take_tensor(&mut entries, "head.variant", path)?.get(0, 0);
    if variant == 0.0 {
        Ok(HeadParams::Logistic {
            w: take_tensor(&mut entries, "head.w", path)?,
            b: take_tensor(&mut entries, "head.b", path)?,
        })
    } else {
        Ok(HeadParams::Mlp {
            w1: take_tensor(&mut entries, "head.w1", path)?,
            b1: take_tensor(&mut entries, "head.b1", path)?,
            w2: take_tensor(&mut entries, "head.w2", path)?,
            b2: take_tensor(&mut entries, "head.b2", path)?,
        })
    }
}

pub fn save_fusion(path: &Path, stats: &NormStats, ae: &AutoencoderParams) -> Result<()> {
    let mean = Tensor2::from_vec(1, stats.mean.len(), stats.mean.clone())?;
    let std = Tensor2::from_vec(1, stats.std.len(), stats.std.clone())?;
    let mut entries: Vec<(&str, &Tensor2)> = vec![("norm.mean", &mean), ("norm.std", &std)];
    let named = ae.named_tensors();
    entries.extend(named.iter().map(|(n, t)| (n.as_str(), *t)));
    write_container(path, &entries)
}

pub fn load_fusion(path: &Path) -> Result<(NormStats, AutoencoderParams)> {
    let mut entries = read_container(path)?;
    let mean = take_tensor(&mut entries, "norm.mean", path)?;
    let std = take_tensor(&mut entries, "norm.std", path)?;
    let stats = NormStats {
        mean: mean.data().to_vec(),
        std: std.data().to_vec(),
    };
    let ae = AutoencoderParams {
        enc_w1: take_tensor(&mut entries, "ae.enc_w1", path)?,
        enc_b1: take_tensor(&mut entries, "ae.enc_b1", path)?,
        enc_w2: take_tensor(&mut entries, "ae.enc_w2", path)?,
        enc_b2: take_tensor(&mut entries, "ae.enc_b2", path)?,
        dec_w1: take_tensor(&mut entries, "ae.dec_w1", path)?,
        dec_b1: take_tensor(&mut entries, "ae.dec_b1", path)?,
        dec_w2: take_tensor(&mut entries, "ae.dec_w2", path)?,
        dec_b2: take_tensor(&mut entries, "ae.dec_b2", path)?,
    };
    Ok((stats, ae))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::HeadVariant;
    use crate::fusion;
    use crate::tensor::seeded_rng;

    #[test]
    fn bilstm_roundtrip_preserves_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bilstm.stdc");
        let mut rng = seeded_rng(1);
        let net = BiLstm::new(16, 8, 2, &mut rng);
        save_bilstm(&path, &net).unwrap();
        let back = load_bilstm(&path).unwrap();
        assert_eq!(back.input_dim(), 16);
        assert_eq!(back.hidden(), 8);
        assert_eq!(back.layers.len(), 2);
        assert_eq!(back.layers[1].fwd.input_dim(), 16);
    }

    #[test]
    fn missing_model_is_a_distinct_error() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(
            load_bilstm(&dir.path().join("absent.stdc"))
                .unwrap_err()
                .category(),
            "MissingModel"
        );
    }

    #[test]
    fn head_roundtrip_both_variants() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = seeded_rng(2);
        for variant in [HeadVariant::Logistic, HeadVariant::Mlp] {
            let head = HeadParams::init(variant, 12, 6, &mut rng);
            let path = dir.path().join(format!("{variant:?}.stdc"));
            save_head(&path, &head).unwrap();
            let back = load_head(&path).unwrap();
            assert_eq!(back.variant(), variant);
            assert_eq!(back.input_dim(), 12);
        }
    }

    #[test]
    fn fusion_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fusion.stdc");
        let mut rng = seeded_rng(3);
        let vectors: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..6).map(|d| (i + d) as f64 * 0.3).collect())
            .collect();
        let stats = fusion::fit_norm(&vectors).unwrap();
        let ae = AutoencoderParams::init(6, 5, 3, &mut rng);
        save_fusion(&path, &stats, &ae).unwrap();
        let (stats_back, ae_back) = load_fusion(&path).unwrap();
        assert_eq!(stats_back.dim(), 6);
        assert_eq!(ae_back.input_dim(), 6);
        assert_eq!(ae_back.bottleneck_dim(), 3);
        for (a, b) in stats.mean.iter().zip(&stats_back.mean) {
            assert_eq!(*a as f32, *b as f32);
        }
    }
}
