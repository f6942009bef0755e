//! `swarm-lattice`: run single trials, experiment suites, and offline metric
//! evaluation of snapshot files.
//!
//! Exit codes: 0 success, 1 error (including usage errors), 2 the simulated
//! trial finished without meeting the success criterion.

mod manifest;
mod suite;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use swarm_lattice::config;
use swarm_lattice::geometry::{build_links, SwarmState};
use swarm_lattice::metrics::{compactness, regularity};
use swarm_lattice::output;
use swarm_lattice::{run_trial, ScenarioSpec};

use manifest::Manifest;

#[derive(Debug, Parser)]
#[command(name = "swarm-lattice", version, about = "Distributed lattice formation for planar swarms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one trial and write its trace, snapshots and manifest.
    Simulate(SimulateArgs),
    /// Run an experiment suite and write per-trial, aggregate and figure tables.
    Suite(suite::SuiteArgs),
    /// Evaluate the regularity and compactness metrics of a snapshot file.
    Metrics(MetricsArgs),
}

/// Scenario source shared by every subcommand.
#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario file (TOML with flat parameter keys).
    #[arg(long)]
    config: PathBuf,
    /// Override a scenario key, e.g. `--set L=6`. May be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed; overrides the `seed` key of the scenario.
    #[arg(long, value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioSpec> {
        let mut spec = config::load(&self.config, &self.overrides)?;
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        Ok(spec)
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// Snapshot CSV with columns trial_id,t,agent_id,x,y,G_n_i.
    snapshots: PathBuf,
    /// Scenario file supplying L, R_min, R_max, R_s and the orientation
    /// offset; the built-in defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Suite(args) => suite::run(&args).map(|()| ExitCode::SUCCESS),
        Command::Metrics(args) => metrics(&args).map(|()| ExitCode::SUCCESS),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Creates `dir/name`, runs `write` into it and records the file.
pub(crate) fn write_output(
    manifest: &mut Manifest,
    dir: &Path,
    name: &str,
    write: impl FnOnce(&mut BufWriter<File>) -> swarm_lattice::Result<()>,
) -> Result<()> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write(&mut w)?;
    w.flush()?;
    manifest.add_output(dir, name)
}

fn simulate(args: &SimulateArgs) -> Result<ExitCode> {
    let spec = args.scenario.load()?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let mut manifest = Manifest::start("simulate", spec.seed, &spec);
    let out = run_trial(&spec)?;

    write_output(&mut manifest, &args.out, "trace.csv", |w| output::write_trace(w, &out.trace))?;
    write_output(&mut manifest, &args.out, "snapshots.csv", |w| {
        output::write_snapshots(w, 0, &out.snapshots)
    })?;
    let success = out.summary.success();
    manifest.set_summary(&out.summary);
    manifest.finish(&args.out)?;

    match out.summary.last() {
        Some(p) => println!(
            "success={} e_theta_ss={} e_L_ss={} C={} t_ss={}",
            p.success,
            p.e_theta_ss,
            p.e_l_ss,
            p.cost,
            p.t_ss.map(|t| t.to_string()).unwrap_or_else(|| "none".into())
        ),
        None => println!("success=false (empty trace)"),
    }
    Ok(if success { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn metrics(args: &MetricsArgs) -> Result<()> {
    let spec = match &args.config {
        Some(path) => config::load(path, &args.overrides)?,
        None => {
            let mut table = config::to_table(&ScenarioSpec::default());
            for o in &args.overrides {
                config::apply_override(&mut table, o)?;
            }
            config::from_table(&table)?
        }
    };
    let label = args.snapshots.display().to_string();
    let file = File::open(&args.snapshots).with_context(|| format!("cannot open {label}"))?;
    let snapshots = output::read_snapshots(file, &label)?;
    if snapshots.is_empty() {
        bail!("{label}: no snapshot rows");
    }
    let stdout = std::io::stdout();
    let mut w = csv::Writer::from_writer(stdout.lock());
    w.write_record(["trial_id", "t", "num_agents", "num_links", "e_theta", "e_L"])?;
    for s in &snapshots {
        let positions = s.snapshot.agents.iter().map(|a| a.position).collect();
        let state = SwarmState::new(positions)?;
        let links = build_links(&state, &spec.geometry);
        let lattice = spec.control.lattice;
        w.write_record([
            s.trial_id.to_string(),
            s.snapshot.t.to_string(),
            state.len().to_string(),
            (links.len() / 2).to_string(),
            regularity(&links, lattice, spec.control.orientation_offset).to_string(),
            compactness(&links, lattice).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
