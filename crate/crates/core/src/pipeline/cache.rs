//! Content-addressed cache for extracted spectral vectors, keyed by the
//! audio bytes and the feature-relevant config fields. Values are stored
//! losslessly (f64) so cache hits reproduce cold runs bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn sdc_cache_key(wav_bytes: &[u8], feature_signature: &str) -> u64 {
    let mut keyed = Vec::with_capacity(wav_bytes.len() + feature_signature.len() + 4);
    keyed.extend_from_slice(wav_bytes);
    keyed.extend_from_slice(feature_signature.as_bytes());
    keyed.extend_from_slice(b"sdc");
    fnv1a64(&keyed)
}

fn entry_path(dir: &Path, key: u64) -> PathBuf {
    dir.join(format!("{key:016x}.vec"))
}

pub fn load(dir: &Path, key: u64, dim: usize) -> Option<Vec<f64>> {
    let bytes = fs::read(entry_path(dir, key)).ok()?;
    if bytes.len() != dim * 8 {
        return None;
    }
    Some(
        bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    )
}

/// Store via write-then-rename; concurrent writers of the same key are
/// last-writer-wins over identical contents.
pub fn store(dir: &Path, key: u64, vector: &[f64]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut bytes = Vec::with_capacity(vector.len() * 8);
    for &v in vector {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let final_path = entry_path(dir, key);
    let tmp_path = dir.join(format!("{key:016x}.{}.tmp", std::process::id()));
    fs::write(&tmp_path, &bytes).map_err(|e| Error::io(&tmp_path, e))?;
    fs::rename(&tmp_path, &final_path).map_err(|e| Error::io(&final_path, e))
}
