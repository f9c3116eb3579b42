//! Versioned binary checkpoints.
//!
//! Layout: 8-byte magic, `u32` version, `u32` header length, a JSON header
//! (network config, tensor manifest and free-form metadata), then every
//! parameter as a little-endian `f32`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ParamSpec;
use super::policy::{Policy, PolicyConfig};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TNDMCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub config: PolicyConfig,
    pub tensors: Vec<ParamSpec>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

pub fn to_bytes(policy: &Policy<f32>, meta: serde_json::Value) -> Result<Vec<u8>> {
    let header = Header { config: *policy.config(), tensors: policy.layout().specs().to_vec(), meta };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + 4 * policy.params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in &policy.params {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<(Policy<f32>, serde_json::Value)> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(body)?;
    let data = &bytes[16 + hlen..];
    if !data.len().is_multiple_of(4) {
        return Err(bad("parameter block is not a whole number of floats"));
    }
    let params: Vec<f32> = data.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    let policy = Policy::from_params(header.config, params)?;
    if policy.layout().specs() != header.tensors.as_slice() {
        return Err(bad("tensor manifest does not match the network config"));
    }
    Ok((policy, header.meta))
}

pub fn save(path: &Path, policy: &Policy<f32>, meta: serde_json::Value) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, to_bytes(policy, meta)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(Policy<f32>, serde_json::Value)> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::obs::ObsMode;
    use crate::nn::Trunk;

    #[test]
    fn round_trip_is_bit_exact() {
        let p = Policy::<f32>::new(PolicyConfig::coingame(ObsMode::Full, Trunk::Gru), 11).unwrap();
        let bytes = to_bytes(&p, serde_json::json!({"update": 3})).unwrap();
        let (q, meta) = from_bytes(&bytes).unwrap();
        assert_eq!(meta["update"], 3);
        assert_eq!(p.params.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), q.params.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let p = Policy::<f32>::new(PolicyConfig::coingame(ObsMode::Blind, Trunk::Mlp), 1).unwrap();
        let mut bytes = to_bytes(&p, serde_json::Value::Null).unwrap();
        assert!(from_bytes(&bytes[..10]).is_err());
        bytes.pop();
        assert!(from_bytes(&bytes).is_err());
        bytes[0] = b'X';
        assert!(from_bytes(&bytes).is_err());
    }

    #[test]
    fn missing_file_is_a_missing_artifact() {
        let e = load(Path::new("/nonexistent/ckpt.bin")).unwrap_err();
        assert_eq!(e.exit_code(), 3);
    }
}
