//! Train, evaluate, probe and summarise one (condition, layout, seed) cell,
//! and whole experiments as a queue of cells.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentId, ExperimentSpec};
use super::manifest::{self, RunManifest};
use super::plots::export_plots;
use crate::error::{Error, Result};
use crate::nn::{checkpoint, Policy};
use crate::par::Lanes;
use crate::ppo::eval::{evaluate, grid, EpisodeRecord};
use crate::ppo::{train, Condition, TrainOutcome};
use crate::probe::analysis::{self, allocation_points, correct_colour_fraction, mean_throughput, task1_fraction};
use crate::probe::dataset::{FeatureMode, Label, ProbeDataset};
use crate::probe::linear::{permutation_null, random_feature_probe, train_probe};
use crate::probe::pca::pca_project;
use crate::probe::trace::{read_traces, write_traces, HiddenTrace};
use crate::rng::{self, Purpose};
use crate::stats;

/// Coordinates of one cell in the output tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub condition: Condition,
    pub layout: String,
    pub seed: u64,
}

impl Cell {
    /// `<root>/<experiment>/<condition>/<layout>/<seed>`.
    pub fn dir(&self, root: &Path, spec: &ExperimentSpec) -> PathBuf {
        root.join(spec.id.name()).join(self.condition.name()).join(&self.layout).join(self.seed.to_string())
    }
}

pub fn cells(spec: &ExperimentSpec) -> Vec<Cell> {
    let mut out = Vec::new();
    for &condition in &spec.conditions {
        for layout in &spec.layouts {
            for seed in spec.train_seed_list() {
                out.push(Cell { condition, layout: layout.clone(), seed });
            }
        }
    }
    out
}

pub const EPISODES_FILE: &str = "eval/episodes.json";
pub const TRACE_FILE: &str = "traces/eval.trace";
pub const PROBES_FILE: &str = "probes/probes.csv";
pub const UNITS_FILE: &str = "probes/units.csv";
pub const PCA_FILE: &str = "probes/pca.csv";
pub const CHECKPOINT_FILE: &str = "checkpoints/final.ckpt";

/// Trains the cell's agent, writing `metrics.csv` and checkpoints into `dir`.
pub fn train_cell(spec: &ExperimentSpec, cell: &Cell, dir: &Path, par: Lanes) -> Result<TrainOutcome> {
    let ts = spec.train_spec(cell.condition, &cell.layout, cell.seed);
    train(&ts, Some(dir), par)
}

/// Seed for evaluation action sampling.
pub fn eval_action_seed(cell: &Cell) -> u64 {
    rng::child_seed(cell.seed, Purpose::Actions as u64)
}

/// Evaluates the cell's final checkpoint on the experiment's held-out partners.
/// Captures hidden states for recurrent agents when `capture` is set.
pub fn eval_cell(spec: &ExperimentSpec, cell: &Cell, dir: &Path, par: Lanes) -> Result<Vec<EpisodeRecord>> {
    let (policy, _) = checkpoint::load(&dir.join(CHECKPOINT_FILE))?;
    let records = eval_policy(spec, cell, &policy, par)?;
    write_eval(spec, cell, dir, policy.hidden_dim(), &records)?;
    Ok(records)
}

pub fn eval_policy(spec: &ExperimentSpec, cell: &Cell, policy: &Policy<f32>, par: Lanes) -> Result<Vec<EpisodeRecord>> {
    let ts = spec.train_spec(cell.condition, &cell.layout, cell.seed);
    let plan = grid(&spec.eval_partners()?, &spec.eval_env_seeds());
    let capture = spec.capture && policy.is_recurrent();
    evaluate(policy, &ts.env, ts.env_options(), &plan, eval_action_seed(cell), capture, par)
}

fn write_eval(spec: &ExperimentSpec, cell: &Cell, dir: &Path, hidden_dim: usize, records: &[EpisodeRecord]) -> Result<()> {
    fs::create_dir_all(dir.join("eval"))?;
    if records.first().is_some_and(|r| !r.hidden.is_empty()) {
        let layout = spec.env_spec(&cell.layout)?.name();
        let traces: Vec<HiddenTrace> = records
            .iter()
            .enumerate()
            .map(|(i, r)| HiddenTrace::from_record(i, r, cell.condition.name(), &layout, hidden_dim))
            .collect::<Result<_>>()?;
        write_traces(&dir.join(TRACE_FILE), &traces)?;
    }
    let slim: Vec<EpisodeRecord> = records.iter().map(|r| EpisodeRecord { hidden: Vec::new(), ..r.clone() }).collect();
    fs::write(dir.join(EPISODES_FILE), serde_json::to_vec(&slim)?)?;
    Ok(())
}

pub fn read_episodes(dir: &Path) -> Result<Vec<EpisodeRecord>> {
    let p = dir.join(EPISODES_FILE);
    if !p.exists() {
        return Err(Error::MissingArtifact(p));
    }
    Ok(serde_json::from_slice(&fs::read(p)?)?)
}

/// One probe fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub t: usize,
    /// 1 or 2: which task's (or colour's) trait value is decoded.
    pub label: u8,
    pub probe_seed: u64,
    pub accuracy: f64,
    pub random_accuracy: f64,
    pub test_mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct UnitRow {
    unit: usize,
    r: f64,
    zero_variance: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct PcaRow {
    episode: usize,
    x: f64,
    y: f64,
    advantage: f64,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(d) = path.parent() {
        fs::create_dir_all(d)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Analysis(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Analysis(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Analysis(e.to_string()))?;
    r.deserialize().map(|x| x.map_err(|e| Error::Analysis(e.to_string()))).collect()
}

/// Probe accuracy against time plus matched random-feature baselines.
pub fn probe_traces(spec: &ExperimentSpec, traces: &[HiddenTrace]) -> Result<Vec<ProbeRow>> {
    let labels: &[(Label, u8)] = if spec.family.starts_with("kitchen") { &[(Label::First, 1), (Label::Second, 2)] } else { &[(Label::First, 1)] };
    let mut rows = Vec::new();
    for &(label, li) in labels {
        for t in spec.probe_time_list() {
            let ds = ProbeDataset::build(traces, FeatureMode::Prefix { t }, label)?;
            for k in 0..spec.probe_seeds as u64 {
                let p = train_probe(&ds, k)?;
                let r = random_feature_probe(&ds, k)?;
                rows.push(ProbeRow { t, label: li, probe_seed: k, accuracy: p.accuracy, random_accuracy: r.accuracy, test_mse: p.test_mse });
            }
        }
    }
    Ok(rows)
}

/// Probes, unit correlations and a PCA map from the cell's captured traces.
pub fn probe_cell(spec: &ExperimentSpec, dir: &Path) -> Result<BTreeMap<String, f64>> {
    let traces = read_traces(&dir.join(TRACE_FILE))?;
    let mut summary = BTreeMap::new();
    let rows = probe_traces(spec, &traces)?;
    write_csv(&dir.join(PROBES_FILE), &rows)?;
    let h = spec.horizon as usize;
    let at = |t: usize, f: fn(&ProbeRow) -> f64| stats::mean(&rows.iter().filter(|r| r.t == t && r.label == 1).map(f).collect::<Vec<_>>());
    summary.insert("probe_acc_final".into(), at(h, |r| r.accuracy));
    summary.insert("probe_acc_t0".into(), at(0, |r| r.accuracy));
    summary.insert("random_acc_final".into(), at(h, |r| r.random_accuracy));

    let ds = ProbeDataset::build(&traces, FeatureMode::Prefix { t: h }, Label::First)?;
    let mut noise_rng = rng::stream(0, Purpose::Probe, 4);
    let noise: Vec<f64> = (0..ds.features.len()).map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut noise_rng)).collect();
    let null = permutation_null(&noise, &ds, 20, 0)?;
    summary.insert("null_lo".into(), null.lo);
    summary.insert("null_hi".into(), null.hi);

    if traces.len() >= analysis::MIN_CORRELATION_EPISODES {
        let units = analysis::per_unit_correlation(&traces, |t| t.header.profile.advantage())?;
        summary.insert("units_abs_r_ge_0_5".into(), units.iter().filter(|u| u.r.abs() >= 0.5).count() as f64);
        let rows: Vec<UnitRow> = units.iter().map(|u| UnitRow { unit: u.unit, r: u.r, zero_variance: u.zero_variance }).collect();
        write_csv(&dir.join(UNITS_FILE), &rows)?;
    }
    if let Ok(p) = pca_project(&ds.features, ds.len(), ds.dim, 2) {
        let rows: Vec<PcaRow> = traces
            .iter()
            .enumerate()
            .map(|(i, t)| PcaRow { episode: i, x: p.coords[2 * i], y: p.coords[2 * i + 1], advantage: t.header.profile.advantage() })
            .collect();
        write_csv(&dir.join(PCA_FILE), &rows)?;
        summary.insert("pca_explained_2".into(), (p.explained_variance[0] + p.explained_variance[1]) / p.total_variance);
    }
    Ok(summary)
}

/// Scalar summaries of an evaluation.
pub fn summarise_eval(spec: &ExperimentSpec, records: &[EpisodeRecord]) -> BTreeMap<String, f64> {
    let mut s = BTreeMap::new();
    let returns: Vec<f64> = records.iter().map(|r| r.task_return).collect();
    s.insert("mean_return".into(), stats::mean(&returns));
    s.insert("episodes".into(), records.len() as f64);
    if spec.id == ExperimentId::CoinGame {
        let cf: Vec<f64> = records.iter().filter_map(correct_colour_fraction).collect();
        s.insert("correct_colour".into(), stats::mean(&cf));
    }
    if spec.family.starts_with("kitchen") {
        if let Ok(ci) = analysis::task_allocation_correlation(&allocation_points(records), 0) {
            s.insert("allocation_slope".into(), ci.estimate);
        }
    }
    if spec.id == ExperimentId::Exp2 {
        let h = spec.horizon as usize;
        let window = |a: usize, b: usize| {
            let xs: Vec<f64> = records.iter().filter_map(|r| mean_throughput(&r.cumulative(), a, b).ok()).collect();
            stats::mean(&xs)
        };
        s.insert("throughput_pre".into(), window(250, 300));
        s.insert("throughput_dip".into(), window(300, 350));
        s.insert("throughput_late".into(), window(h - 100, h));
        s.insert("task1_pre".into(), task1_fraction(records, 0, 300));
        s.insert("task1_post".into(), task1_fraction(records, 300, h));
    }
    s
}

/// Runs one cell end to end and writes its manifest.
pub fn run_cell(spec: &ExperimentSpec, cell: &Cell, root: &Path, par: Lanes) -> Result<RunManifest> {
    let dir = cell.dir(root, spec);
    let hash = manifest::config_hash(&(spec, cell))?;
    if let Ok(m) = RunManifest::load(&dir) {
        if m.config_hash == hash && m.verify(&dir).is_ok() {
            log::info!("{}: up to date", dir.display());
            return Ok(m);
        }
    }
    fs::create_dir_all(&dir)?;
    let started = manifest::now();
    let outcome = train_cell(spec, cell, &dir, par)?;
    let records = eval_policy(spec, cell, &outcome.policy, par)?;
    write_eval(spec, cell, &dir, outcome.policy.hidden_dim(), &records)?;
    let mut summary = summarise_eval(spec, &records);
    summary.insert("final_train_return".into(), outcome.final_return(10));
    if dir.join(TRACE_FILE).exists() {
        summary.extend(probe_cell(spec, &dir)?);
    }
    if let Err(e) = export_plots(&dir) {
        log::warn!("{}: {e}", dir.display());
    }
    let mut seeds = BTreeMap::new();
    seeds.insert("train".to_string(), cell.seed);
    seeds.insert("init".to_string(), rng::child_seed(cell.seed, Purpose::Init as u64));
    seeds.insert("eval_actions".to_string(), eval_action_seed(cell));
    let mut m = RunManifest {
        experiment: spec.id.name().into(),
        condition: cell.condition.name().into(),
        layout: cell.layout.clone(),
        seed: cell.seed,
        config_hash: hash,
        code_version: env!("CARGO_PKG_VERSION").into(),
        seeds,
        started,
        finished: manifest::now(),
        config: serde_json::to_value((spec, cell))?,
        artifacts: Vec::new(),
        summary,
    };
    m.collect_artifacts(&dir)?;
    m.save(&dir)?;
    Ok(m)
}

/// Runs every cell of the experiment, then compares conditions.
pub fn run_experiment(spec: &ExperimentSpec, root: &Path, par: Lanes) -> Result<Vec<RunManifest>> {
    spec.validate()?;
    let mut out = Vec::new();
    for cell in cells(spec) {
        log::info!("{} {} {} seed {}", spec.id.name(), cell.condition, cell.layout, cell.seed);
        out.push(run_cell(spec, &cell, root, par)?);
    }
    if spec.conditions.len() >= 2 {
        let results = super::compare::load_results(&root.join(spec.id.name()))?;
        let report = super::compare::compare_conditions(&results)?;
        super::compare::write_report(&root.join(spec.id.name()), &report)?;
    }
    Ok(out)
}
