//! Hidden-state traces and their on-disk format.
//!
//! A trace file is a sequence of episodes. Each episode is one line of JSON
//! (a [`TraceHeader`]) ending in `\n`, immediately followed by
//! `(horizon + 1) * hidden_dim` little-endian `f32` values, `h_0` first.
//! The float block of episode `k` therefore starts right after the newline
//! of its header, at the byte offset recorded by [`TraceIndex`].

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{EnvOptions, EnvSpec};
use crate::error::{Error, Result};
use crate::nn::Policy;
use crate::par::Lanes;
use crate::partner::Profile;
use crate::ppo::eval::{evaluate, EpisodePlan, EpisodeRecord};

/// Recorded hidden states of one evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenTrace {
    pub header: TraceHeader,
    /// `(horizon + 1) x hidden_dim`, row `t` is `h_t`.
    pub hidden: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub episode: usize,
    /// Environment seed of the rollout; probe splits are keyed on it.
    pub seed: u64,
    pub condition: String,
    pub layout: String,
    pub profile: Profile,
    pub horizon: u32,
    pub hidden_dim: usize,
    pub task_return: f64,
}

impl HiddenTrace {
    pub fn from_record(episode: usize, rec: &EpisodeRecord, condition: &str, layout: &str, hidden_dim: usize) -> Result<Self> {
        let horizon = rec.rewards.len();
        if rec.hidden.len() != (horizon + 1) * hidden_dim {
            return Err(Error::Shape(format!(
                "episode {episode}: {} hidden values for horizon {horizon} and width {hidden_dim}",
                rec.hidden.len()
            )));
        }
        Ok(HiddenTrace {
            header: TraceHeader {
                episode,
                seed: rec.seed,
                condition: condition.to_string(),
                layout: layout.to_string(),
                profile: rec.partner,
                horizon: horizon as u32,
                hidden_dim,
                task_return: rec.task_return,
            },
            hidden: rec.hidden.clone(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.header.horizon as usize
    }

    pub fn dim(&self) -> usize {
        self.header.hidden_dim
    }

    /// `h_t`.
    pub fn state(&self, t: usize) -> &[f32] {
        let d = self.dim();
        &self.hidden[t * d..(t + 1) * d]
    }
}

/// Runs the planned episodes and keeps their hidden states.
#[allow(clippy::too_many_arguments)]
pub fn capture(
    policy: &Policy<f32>,
    spec: &EnvSpec,
    opts: EnvOptions,
    plan: &[EpisodePlan],
    action_seed: u64,
    condition: &str,
    horizon: u32,
    par: Lanes,
) -> Result<Vec<HiddenTrace>> {
    if spec.horizon() != horizon {
        return Err(Error::Config(format!("requested horizon {horizon} but the environment runs {} steps", spec.horizon())));
    }
    let recs = evaluate(policy, spec, opts, plan, action_seed, true, par)?;
    let hd = policy.hidden_dim();
    recs.iter().enumerate().map(|(i, r)| HiddenTrace::from_record(i, r, condition, &spec.name(), hd)).collect()
}

pub fn write_traces(path: &Path, traces: &[HiddenTrace]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    for tr in traces {
        serde_json::to_writer(&mut w, &tr.header)?;
        w.write_all(b"\n")?;
        for v in &tr.hidden {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Byte offsets of each episode's float block.
pub type TraceIndex = Vec<u64>;

/// Reads every trace, returning them with the offset of each float block.
pub fn read_traces_indexed(path: &Path) -> Result<(Vec<HiddenTrace>, TraceIndex)> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let mut index = Vec::new();
    let mut offset = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let n = r.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        offset += n as u64;
        let header: TraceHeader = serde_json::from_str(line.trim_end())?;
        let count = (header.horizon as usize + 1) * header.hidden_dim;
        let mut bytes = vec![0u8; count * 4];
        r.read_exact(&mut bytes).map_err(|e| Error::Shape(format!("truncated trace for episode {}: {e}", header.episode)))?;
        index.push(offset);
        offset += bytes.len() as u64;
        let hidden = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        out.push(HiddenTrace { header, hidden });
    }
    Ok((out, index))
}

pub fn read_traces(path: &Path) -> Result<Vec<HiddenTrace>> {
    Ok(read_traces_indexed(path)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(ep: usize, horizon: u32, dim: usize) -> HiddenTrace {
        let n = (horizon as usize + 1) * dim;
        HiddenTrace {
            header: TraceHeader {
                episode: ep,
                seed: 10 + ep as u64,
                condition: "multi".into(),
                layout: "coingame".into(),
                profile: Profile::Skill { s: [0.3, 0.7] },
                horizon,
                hidden_dim: dim,
                task_return: 1.5,
            },
            hidden: (0..n).map(|i| i as f32 * 0.25 - 3.0).collect(),
        }
    }

    #[test]
    fn file_round_trip_and_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.trace");
        let ts = vec![trace(0, 4, 3), trace(1, 6, 2)];
        write_traces(&p, &ts).unwrap();
        let (back, idx) = read_traces_indexed(&p).unwrap();
        assert_eq!(back, ts);
        let bytes = std::fs::read(&p).unwrap();
        let at = idx[1] as usize;
        let first = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        assert_eq!(first, ts[1].hidden[0]);
        assert_eq!(bytes[at - 1], b'\n');
    }

    #[test]
    fn missing_file_is_reported() {
        assert!(matches!(read_traces(Path::new("/nonexistent/x.trace")), Err(Error::MissingArtifact(_))));
    }
}
