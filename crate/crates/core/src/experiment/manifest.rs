//! Run manifests: what was run, with which seeds, and hashes of everything written.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the run directory.
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub condition: String,
    pub layout: String,
    pub seed: u64,
    pub config_hash: String,
    pub code_version: String,
    /// Named seeds derived for this run.
    pub seeds: BTreeMap<String, u64>,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    /// The fully resolved configuration.
    pub config: serde_json::Value,
    pub artifacts: Vec<Artifact>,
    pub summary: BTreeMap<String, f64>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the canonical JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(&serde_json::to_value(value)?)?))
}

pub fn hash_file(path: &Path) -> Result<Artifact> {
    let bytes = std::fs::read(path)?;
    Ok(Artifact { path: path.to_path_buf(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 })
}

impl RunManifest {
    /// Hashes every file under `dir` except the manifest itself.
    pub fn collect_artifacts(&mut self, dir: &Path) -> Result<()> {
        let mut files = Vec::new();
        walk(dir, &mut files)?;
        files.sort();
        self.artifacts = files
            .into_iter()
            .filter(|p| p.file_name().is_some_and(|n| n != MANIFEST_FILE))
            .map(|p| {
                let mut a = hash_file(&p)?;
                a.path = p.strip_prefix(dir).unwrap_or(&p).to_path_buf();
                Ok(a)
            })
            .collect::<Result<_>>()?;
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<RunManifest> {
        let p = dir.join(MANIFEST_FILE);
        if !p.exists() {
            return Err(Error::MissingArtifact(p));
        }
        Ok(serde_json::from_slice(&std::fs::read(p)?)?)
    }

    /// Re-hashes every listed artifact and reports the first mismatch.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for a in &self.artifacts {
            let p = dir.join(&a.path);
            if !p.exists() {
                return Err(Error::MissingArtifact(p));
            }
            let h = hash_file(&p)?;
            if h.sha256 != a.sha256 {
                return Err(Error::Analysis(format!("artifact {} changed since the run", a.path.display())));
            }
        }
        Ok(())
    }
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for e in std::fs::read_dir(dir)? {
        let p = e?.path();
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_are_stable_and_verified() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("sub")).unwrap();
        std::fs::write(dir.path().join("sub/a.txt"), "hello").unwrap();
        let mut m = RunManifest {
            experiment: "exp1".into(),
            condition: "multi".into(),
            layout: "cramped_room".into(),
            seed: 0,
            config_hash: config_hash(&serde_json::json!({"a": 1})).unwrap(),
            code_version: "0".into(),
            seeds: BTreeMap::new(),
            started: 0.0,
            finished: 1.0,
            config: serde_json::Value::Null,
            artifacts: vec![],
            summary: BTreeMap::new(),
        };
        m.collect_artifacts(dir.path()).unwrap();
        m.save(dir.path()).unwrap();
        assert_eq!(m.artifacts.len(), 1);
        assert_eq!(m.artifacts[0].path, PathBuf::from("sub/a.txt"));
        let back = RunManifest::load(dir.path()).unwrap();
        assert_eq!(back, m);
        back.verify(dir.path()).unwrap();
        std::fs::write(dir.path().join("sub/a.txt"), "changed").unwrap();
        assert!(back.verify(dir.path()).is_err());
    }
}
