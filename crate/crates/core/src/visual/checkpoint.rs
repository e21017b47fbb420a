//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! "XMCK" | u32 version | u32 tensor count
//! per tensor: u16 name length | name bytes | u8 rank | u32 dims[rank] | f32 values
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{EncoderConfig, Network};
use crate::grad::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"XMCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad magic {found:?}, expected \"XMCK\"")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported checkpoint version {0}, expected {CHECKPOINT_VERSION}")]
    Version(u32),
    #[error("truncated checkpoint while reading {what}: need {expected} bytes, file has {actual}")]
    Truncated {
        what: String,
        expected: usize,
        actual: usize,
    },
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(usize),
    #[error("tensor name is not UTF-8")]
    BadName,
    #[error("tensor {name}: {reason}")]
    BadTensor { name: String, reason: String },
    #[error("checkpoint does not fit the encoder config: {0}")]
    ConfigMismatch(String),
}

pub fn encode_checkpoint(net: &Network<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + net.parameter_count() * 4);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.params().len() as u32).to_le_bytes());
    for (name, tensor) in net.named_params() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(tensor.rank() as u8);
        for &d in tensor.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: impl FnOnce() -> String) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(CheckpointError::Truncated {
                what: what(),
                expected: end,
                actual: self.bytes.len(),
            });
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self, what: impl FnOnce() -> String) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Network<f32>, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, || "magic".into())?;
    if magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic {
            found: magic.to_vec(),
        });
    }
    let version = r.u32(|| "version".into())?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let count = r.u32(|| "tensor count".into())?;
    let mut named = Vec::new();
    for i in 0..count {
        let len = u16::from_le_bytes(r.take(2, || format!("name length of tensor {i}"))?.try_into().unwrap());
        let name = std::str::from_utf8(r.take(len as usize, || format!("name of tensor {i}"))?)
            .map_err(|_| CheckpointError::BadName)?
            .to_string();
        let rank = r.take(1, || format!("rank of {name}"))?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for d in 0..rank {
            shape.push(r.u32(|| format!("dim {d} of {name}"))? as usize);
        }
        let numel = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let Some(numel) = numel.filter(|n| n.checked_mul(4).is_some()) else {
            return Err(CheckpointError::BadTensor {
                name,
                reason: format!("shape {shape:?} overflows"),
            });
        };
        let raw = r.take(numel * 4, || format!("values of {name}"))?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = Tensor::from_vec(&shape, values).expect("length checked");
        named.push((name, tensor));
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
    }
    Network::from_named(named).map_err(|e| CheckpointError::BadTensor {
        name: "network".into(),
        reason: e.to_string(),
    })
}

pub fn save_checkpoint(net: &Network<f32>, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, encode_checkpoint(net)).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Network<f32>, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_checkpoint(&bytes)
}

/// Load and check the architecture against `config`.
pub fn load_checkpoint_for(path: &Path, config: &EncoderConfig) -> Result<Network<f32>, CheckpointError> {
    let net = load_checkpoint(path)?;
    if !net.matches(config) {
        return Err(CheckpointError::ConfigMismatch(format!(
            "checkpoint has {} clusters and widths {:?}, config has {} and {:?}",
            net.n_clusters(),
            net.channels(),
            config.n_clusters,
            config.channels
        )));
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> Network<f32> {
        let config = EncoderConfig {
            n_clusters: 3,
            image_size: 8,
            channels: vec![2, 4],
            ..Default::default()
        };
        Network::new(&config, 5).unwrap()
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let bytes = encode_checkpoint(&net());
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back, net());
        assert_eq!(encode_checkpoint(&back), bytes);
    }

    #[test]
    fn truncation_names_lengths() {
        let bytes = encode_checkpoint(&net());
        let cut = &bytes[..bytes.len() - 3];
        match decode_checkpoint(cut) {
            Err(CheckpointError::Truncated { expected, actual, .. }) => {
                assert_eq!(expected, bytes.len());
                assert_eq!(actual, bytes.len() - 3);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_magic_and_version() {
        let mut bytes = encode_checkpoint(&net());
        bytes[0] = b'Y';
        assert!(matches!(decode_checkpoint(&bytes), Err(CheckpointError::BadMagic { .. })));
        let mut bytes = encode_checkpoint(&net());
        bytes[4] = 2;
        assert!(matches!(decode_checkpoint(&bytes), Err(CheckpointError::Version(2))));
    }

    #[test]
    fn config_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.xmck");
        save_checkpoint(&net(), &path).unwrap();
        let other = EncoderConfig {
            n_clusters: 4,
            image_size: 8,
            channels: vec![2, 4],
            ..Default::default()
        };
        assert!(matches!(
            load_checkpoint_for(&path, &other),
            Err(CheckpointError::ConfigMismatch(_))
        ));
    }
}
