//! Cross-condition comparison with bootstrap intervals.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::MANIFEST_FILE;
use super::runner::read_episodes;
use crate::error::{Error, Result};
use crate::partner::Profile;
use crate::stats::{self, Interval};

/// Evaluation outcome of one trained agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub condition: String,
    pub layout: String,
    pub seed: u64,
    /// `(partner, environment seed)` of every episode, in order.
    pub episodes: Vec<(Profile, u64)>,
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub condition: String,
    /// `None` for the pool over all layouts.
    pub layout: Option<String>,
    pub mean: Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    FirstHigher,
    SecondHigher,
    NoSeparation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ordering {
    pub layout: Option<String>,
    pub first: String,
    pub second: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub groups: Vec<GroupStat>,
    pub orderings: Vec<Ordering>,
}

impl ComparisonReport {
    pub fn group(&self, condition: &str, layout: Option<&str>) -> Option<&GroupStat> {
        self.groups.iter().find(|g| g.condition == condition && g.layout.as_deref() == layout)
    }

    pub fn verdict(&self, first: &str, second: &str, layout: Option<&str>) -> Option<Verdict> {
        self.orderings.iter().find_map(|o| {
            if o.layout.as_deref() != layout {
                return None;
            }
            if o.first == first && o.second == second {
                Some(o.verdict)
            } else if o.first == second && o.second == first {
                Some(match o.verdict {
                    Verdict::FirstHigher => Verdict::SecondHigher,
                    Verdict::SecondHigher => Verdict::FirstHigher,
                    Verdict::NoSeparation => Verdict::NoSeparation,
                })
            } else {
                None
            }
        })
    }
}

/// Declares an ordering only when the two intervals do not overlap.
pub fn verdict(a: &Interval, b: &Interval) -> Verdict {
    if a.above(b) {
        Verdict::FirstHigher
    } else if b.above(a) {
        Verdict::SecondHigher
    } else {
        Verdict::NoSeparation
    }
}

/// Per-layout and pooled mean returns of each condition, pooling episodes
/// over training seeds, with pairwise orderings.
pub fn compare_conditions(results: &[CellResult]) -> Result<ComparisonReport> {
    let conditions: Vec<String> = results.iter().map(|r| r.condition.clone()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    if conditions.len() < 2 {
        return Err(Error::Analysis("comparison needs at least two conditions".into()));
    }
    let mut reference: BTreeMap<&str, &Vec<(Profile, u64)>> = BTreeMap::new();
    for r in results {
        if r.episodes.len() != r.returns.len() {
            return Err(Error::Analysis(format!("{} {} seed {}: episode and return counts differ", r.condition, r.layout, r.seed)));
        }
        match reference.get(r.layout.as_str()) {
            Some(eps) if **eps != r.episodes => {
                return Err(Error::Analysis(format!("mismatched evaluation partner sets on layout {} ({} seed {})", r.layout, r.condition, r.seed)))
            }
            Some(_) => {}
            None => {
                reference.insert(&r.layout, &r.episodes);
            }
        }
    }
    let layouts: Vec<String> = reference.keys().map(|s| s.to_string()).collect();
    let mut scopes: Vec<Option<String>> = layouts.iter().cloned().map(Some).collect();
    scopes.push(None);

    let mut groups = Vec::new();
    let mut orderings = Vec::new();
    for (si, scope) in scopes.iter().enumerate() {
        let mut cis: Vec<(String, Interval)> = Vec::new();
        for (ci, c) in conditions.iter().enumerate() {
            let xs: Vec<f64> = results
                .iter()
                .filter(|r| &r.condition == c && scope.as_ref().is_none_or(|l| &r.layout == l))
                .flat_map(|r| r.returns.iter().copied())
                .collect();
            if xs.is_empty() {
                continue;
            }
            let mean = stats::mean_ci(&xs, (si * 1000 + ci) as u64)?;
            groups.push(GroupStat { condition: c.clone(), layout: scope.clone(), mean });
            cis.push((c.clone(), mean));
        }
        for i in 0..cis.len() {
            for j in i + 1..cis.len() {
                orderings.push(Ordering { layout: scope.clone(), first: cis[i].0.clone(), second: cis[j].0.clone(), verdict: verdict(&cis[i].1, &cis[j].1) });
            }
        }
    }
    Ok(ComparisonReport { groups, orderings })
}

/// Reads every completed cell under `<root>/<experiment>`.
pub fn load_results(exp_dir: &Path) -> Result<Vec<CellResult>> {
    let mut out = Vec::new();
    if !exp_dir.exists() {
        return Err(Error::MissingArtifact(exp_dir.to_path_buf()));
    }
    for cond in sorted_dirs(exp_dir)? {
        for layout in sorted_dirs(&cond)? {
            for seed in sorted_dirs(&layout)? {
                if !seed.join(MANIFEST_FILE).exists() {
                    continue;
                }
                let recs = read_episodes(&seed)?;
                let name = |p: &Path| p.file_name().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
                out.push(CellResult {
                    condition: name(&cond),
                    layout: name(&layout),
                    seed: name(&seed).parse().map_err(|_| Error::Analysis(format!("bad seed directory {}", seed.display())))?,
                    episodes: recs.iter().map(|r| (r.partner, r.seed)).collect(),
                    returns: recs.iter().map(|r| r.task_return).collect(),
                });
            }
        }
    }
    if out.is_empty() {
        return Err(Error::MissingArtifact(exp_dir.join("*").join(MANIFEST_FILE)));
    }
    Ok(out)
}

fn sorted_dirs(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut v: Vec<_> = fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
    v.sort();
    Ok(v)
}

/// Writes `comparison.json` and `comparison.csv` into `dir`.
pub fn write_report(dir: &Path, report: &ComparisonReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("comparison.json"), serde_json::to_vec_pretty(report)?)?;
    let mut w = csv::Writer::from_path(dir.join("comparison.csv")).map_err(|e| Error::Analysis(e.to_string()))?;
    w.write_record(["condition", "layout", "mean", "ci_lo", "ci_hi", "episodes"]).map_err(|e| Error::Analysis(e.to_string()))?;
    for g in &report.groups {
        w.write_record([
            g.condition.clone(),
            g.layout.clone().unwrap_or_else(|| "pooled".into()),
            format!("{:.4}", g.mean.estimate),
            format!("{:.4}", g.mean.lo),
            format!("{:.4}", g.mean.hi),
            g.mean.n.to_string(),
        ])
        .map_err(|e| Error::Analysis(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
