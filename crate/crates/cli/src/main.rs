//! `tandem`: train, evaluate, probe and compare agents from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tandem_core::experiment::compare::{compare_conditions, load_results, write_report, Verdict};
use tandem_core::experiment::runner::{self, eval_cell, probe_cell, summarise_eval, train_cell};
use tandem_core::experiment::{cells, export_plots, load_config, run_experiment, Cell, ExperimentId, ExperimentSpec, Scale};
use tandem_core::par::Lanes;
use tandem_core::ppo::Condition;
use tandem_core::{Error, Result};

#[derive(Parser)]
#[command(name = "tandem", version, about = "Ad hoc teamwork experiments with recurrent PPO agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// desk or paper
    #[arg(long, global = true, default_value = "desk")]
    scale: String,
    /// Number of training seeds per condition and layout.
    #[arg(long, global = true)]
    seeds: Option<usize>,
    /// Restrict to one layout.
    #[arg(long, global = true)]
    layout: Option<String>,
    /// Restrict to one condition: multi, single, noninfluence, mlp or blind.
    #[arg(long, global = true)]
    condition: Option<String>,
    /// Config file; keys override the experiment preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root of the output tree.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Experiment for the single-stage verbs.
    #[arg(long, global = true, default_value = "exp1")]
    experiment: String,
    /// Run lanes one after another instead of on the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train agents and write metrics and checkpoints.
    Train,
    /// Evaluate trained checkpoints on held-out partners.
    Eval,
    /// Fit probes and unit correlations on captured hidden states.
    Probe,
    /// Compare conditions with bootstrap intervals.
    Analyse,
    /// Render SVG figures for every run.
    Plot,
    /// Run a whole experiment: train, evaluate, probe, plot and compare.
    Reproduce {
        /// exp1, exp2, exp3 or coingame
        experiment: String,
    },
}

fn resolve(common: &Common, experiment: &str) -> Result<ExperimentSpec> {
    let id: ExperimentId = experiment.parse()?;
    let scale: Scale = common.scale.parse()?;
    let mut spec = match &common.config {
        Some(p) => {
            let s = load_config(p)?;
            if s.id != id {
                return Err(Error::Config(format!("config file is for {} but {} was requested", s.id.name(), id.name())));
            }
            s
        }
        None => ExperimentSpec::preset(id, scale),
    };
    if let Some(n) = common.seeds {
        spec.train_seeds = n;
    }
    if let Some(l) = &common.layout {
        spec.layouts = vec![l.clone()];
    }
    if let Some(c) = &common.condition {
        spec.conditions = vec![c.parse::<Condition>()?];
    }
    let spec = spec.forced();
    spec.validate()?;
    Ok(spec)
}

fn for_cells(spec: &ExperimentSpec, root: &Path, mut f: impl FnMut(&Cell, &Path) -> Result<()>) -> Result<()> {
    for cell in cells(spec) {
        let dir = cell.dir(root, spec);
        f(&cell, &dir)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    let par = if c.sequential { Lanes::Sequential } else { Lanes::Parallel };
    match &cli.command {
        Command::Reproduce { experiment } => {
            let spec = resolve(c, experiment)?;
            let manifests = run_experiment(&spec, &c.out, par)?;
            for m in &manifests {
                println!("{} {} {} seed {}: mean return {:.3}", m.experiment, m.condition, m.layout, m.seed, m.summary.get("mean_return").copied().unwrap_or(f64::NAN));
            }
            if spec.conditions.len() >= 2 {
                print_report(&c.out.join(spec.id.name()))?;
            }
        }
        Command::Train => {
            let spec = resolve(c, &c.experiment)?;
            for_cells(&spec, &c.out, |cell, dir| {
                let o = train_cell(&spec, cell, dir, par)?;
                println!("{}: final training return {:.3}", dir.display(), o.final_return(10));
                Ok(())
            })?;
        }
        Command::Eval => {
            let spec = resolve(c, &c.experiment)?;
            for_cells(&spec, &c.out, |cell, dir| {
                let recs = eval_cell(&spec, cell, dir, par)?;
                let s = summarise_eval(&spec, &recs);
                println!("{}: mean return {:.3} over {} episodes", dir.display(), s["mean_return"], recs.len());
                Ok(())
            })?;
        }
        Command::Probe => {
            let spec = resolve(c, &c.experiment)?;
            for_cells(&spec, &c.out, |_, dir| {
                if !dir.join(runner::TRACE_FILE).exists() {
                    log::warn!("{}: no hidden-state trace, skipping", dir.display());
                    return Ok(());
                }
                let s = probe_cell(&spec, dir)?;
                println!(
                    "{}: probe accuracy {:.3} at t=0, {:.3} at the horizon (random features {:.3})",
                    dir.display(),
                    s["probe_acc_t0"],
                    s["probe_acc_final"],
                    s["random_acc_final"]
                );
                Ok(())
            })?;
        }
        Command::Analyse => {
            let spec = resolve(c, &c.experiment)?;
            let dir = c.out.join(spec.id.name());
            let report = compare_conditions(&load_results(&dir)?)?;
            write_report(&dir, &report)?;
            print_report(&dir)?;
        }
        Command::Plot => {
            let spec = resolve(c, &c.experiment)?;
            let mut any = false;
            for_cells(&spec, &c.out, |_, dir| {
                if dir.exists() {
                    for p in export_plots(dir)? {
                        println!("{}", p.display());
                        any = true;
                    }
                }
                Ok(())
            })?;
            if !any {
                return Err(Error::MissingArtifact(c.out.join(spec.id.name())));
            }
        }
    }
    Ok(())
}

fn print_report(dir: &Path) -> Result<()> {
    let report = compare_conditions(&load_results(dir)?)?;
    println!("{:<14} {:<16} {:>9} {:>20}", "condition", "layout", "mean", "95% CI");
    for g in &report.groups {
        println!(
            "{:<14} {:<16} {:>9.3} {:>20}",
            g.condition,
            g.layout.as_deref().unwrap_or("pooled"),
            g.mean.estimate,
            format!("[{:.3}, {:.3}]", g.mean.lo, g.mean.hi)
        );
    }
    for o in report.orderings.iter().filter(|o| o.layout.is_none()) {
        let v = match o.verdict {
            Verdict::FirstHigher => format!("{} > {}", o.first, o.second),
            Verdict::SecondHigher => format!("{} > {}", o.second, o.first),
            Verdict::NoSeparation => format!("{} vs {}: no separation", o.first, o.second),
        };
        println!("{v}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
