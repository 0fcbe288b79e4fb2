//! On-disk feature files: magic `SDCF`, version, feature kind, then the
//! packed f32 vectors followed by length-prefixed utterance ids.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"SDCF";
pub const FEATURE_VERSION: u16 = 1;
pub const FEATURE_DIM: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Sdc = 1,
    Stc = 2,
    Stdc = 3,
}

impl FeatureKind {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(FeatureKind::Sdc),
            2 => Some(FeatureKind::Stc),
            3 => Some(FeatureKind::Stdc),
            _ => None,
        }
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sdc" => Ok(FeatureKind::Sdc),
            "stc" => Ok(FeatureKind::Stc),
            "stdc" => Ok(FeatureKind::Stdc),
            other => Err(Error::BadConfig(format!("unknown feature kind `{other}`"))),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKind::Sdc => write!(f, "sdc"),
            FeatureKind::Stc => write!(f, "stc"),
            FeatureKind::Stdc => write!(f, "stdc"),
        }
    }
}

pub fn write_feature_file(
    path: &Path,
    kind: FeatureKind,
    ids: &[String],
    vectors: &[Vec<f64>],
) -> Result<()> {
    if ids.len() != vectors.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} ids against {} vectors",
            ids.len(),
            vectors.len()
        )));
    }
    for v in vectors {
        if v.len() != FEATURE_DIM {
            return Err(Error::ShapeMismatch(format!(
                "feature vectors must be {FEATURE_DIM}-wide, got {}",
                v.len()
            )));
        }
    }
    let mut out = Vec::new();
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.push(kind.as_u8());
    out.extend_from_slice(&(ids.len() as u32).to_le_bytes());
    out.extend_from_slice(&(FEATURE_DIM as u32).to_le_bytes());
    for v in vectors {
        for &x in v {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    for id in ids {
        let bytes = id.as_bytes();
        if bytes.len() > u16::MAX as usize {
            return Err(Error::BadFeatureFile {
                path: path.to_path_buf(),
                detail: format!("utterance id too long ({} bytes)", bytes.len()),
            });
        }
        out.extend_from_slice(&(bytes.len() as u16).to_le_bytes());
        out.extend_from_slice(bytes);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_feature_file(path: &Path) -> Result<(FeatureKind, Vec<String>, Vec<Vec<f64>>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |detail: String| Error::BadFeatureFile {
        path: path.to_path_buf(),
        detail,
    };
    if bytes.len() < 15 || &bytes[0..4] != FEATURE_MAGIC {
        return Err(bad("missing SDCF magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FEATURE_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let kind = FeatureKind::from_u8(bytes[6]).ok_or_else(|| bad(format!("bad kind {}", bytes[6])))?;
    let count = u32::from_le_bytes(bytes[7..11].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[11..15].try_into().unwrap()) as usize;
    if dim != FEATURE_DIM {
        return Err(bad(format!("dimension {dim} is not {FEATURE_DIM}")));
    }
    let mut pos = 15;
    let payload = count * dim * 4;
    if pos + payload > bytes.len() {
        return Err(bad("truncated vector payload".into()));
    }
    let mut vectors = Vec::with_capacity(count);
    for _ in 0..count {
        let v: Vec<f64> = bytes[pos..pos + dim * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        vectors.push(v);
        pos += dim * 4;
    }
    let mut ids = Vec::with_capacity(count);
    for _ in 0..count {
        if pos + 2 > bytes.len() {
            return Err(bad("truncated id table".into()));
        }
        let len = u16::from_le_bytes([bytes[pos], bytes[pos + 1]]) as usize;
        pos += 2;
        if pos + len > bytes.len() {
            return Err(bad("truncated id".into()));
        }
        let id = std::str::from_utf8(&bytes[pos..pos + len])
            .map_err(|_| bad("id is not UTF-8".into()))?
            .to_string();
        ids.push(id);
        pos += len;
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes after id table".into()));
    }
    Ok((kind, ids, vectors))
}
