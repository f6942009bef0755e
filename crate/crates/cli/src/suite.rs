//! `suite` subcommand: dispatch to the experiment recipes and write their
//! tables.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use toml::{Table, Value};

use swarm_lattice::experiments::{
    self, linspace_step, FigurePoint, Param, SuiteResult, SweepSpec,
};
use swarm_lattice::output;
use swarm_lattice::sim::Controller;
use swarm_lattice::Lattice;

use crate::manifest::Manifest;
use crate::{write_output, ScenarioArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteKind {
    /// Grid sweep of the controller gains.
    Tune,
    /// Remove part of the swarm mid-run.
    Faults,
    /// Sweep the noise intensity.
    Noise,
    /// Switch the target lattice on a schedule.
    Flexibility,
    /// Vary the swarm size (and optionally the sensing radius).
    Scalability,
    /// Tune the baseline, then compare both controllers on paired seeds.
    CompareBaseline,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    #[arg(value_enum)]
    kind: SuiteKind,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Trials per cell.
    #[arg(long, default_value_t = 30)]
    trials: usize,
    /// Sweep axis `NAME=start:step:stop` or `NAME=v1,v2,...`; names are G_r
    /// (Gr), G_n (Gn), G, F_max (Fmax), sigma, N, R_s.
    #[arg(long, num_args = 1.., value_name = "AXIS")]
    grid: Vec<String>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, env = "SWARM_LATTICE_JOBS")]
    jobs: Option<usize>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Fraction of agents removed (faults).
    #[arg(long, default_value_t = 0.3)]
    fraction: f64,
    /// Removal time in seconds (faults).
    #[arg(long, default_value_t = 30.0)]
    t_remove: f64,
    /// Noise intensities (noise).
    #[arg(long, default_value = "0:0.05:1")]
    sigmas: String,
    /// Lattice switches `time:L,...` (flexibility).
    #[arg(long, default_value = "30:6,60:4")]
    schedule: String,
    /// Zero every adaptive gain at each lattice switch (flexibility).
    #[arg(long)]
    reset_gains: bool,
    /// Swarm sizes (scalability, compare-baseline).
    #[arg(long, default_value = "50,100,200,400")]
    sizes: String,
    /// Sensing radius used by the size sweep (scalability, compare-baseline).
    #[arg(long, default_value_t = 3.0)]
    sensing_radius: f64,
    /// Also sweep the sensing radius at the scenario's N (scalability).
    #[arg(long)]
    sensing_radii: Option<String>,
}

/// Parses `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let values = if parts.len() == 3 {
        let num = |s: &str| s.trim().parse::<f64>().with_context(|| format!("bad number `{s}` in `{text}`"));
        let (start, step, stop) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || stop < start {
            bail!("range `{text}` needs step > 0 and stop >= start");
        }
        linspace_step(start, step, stop)
    } else {
        text.split(',')
            .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad number `{s}` in `{text}`")))
            .collect::<Result<_>>()?
    };
    if values.is_empty() {
        bail!("empty value list `{text}`");
    }
    Ok(values)
}

fn parse_axis(text: &str) -> Result<(Param, Vec<f64>)> {
    let (name, values) = text
        .split_once('=')
        .with_context(|| format!("grid axis `{text}` is not NAME=VALUES"))?;
    let param = Param::parse(name.trim()).with_context(|| format!("unknown grid axis `{name}`"))?;
    Ok((param, parse_values(values)?))
}

fn parse_schedule(text: &str) -> Result<Vec<(f64, Lattice)>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (t, l) = item
                .split_once(':')
                .with_context(|| format!("schedule entry `{item}` is not TIME:L"))?;
            let time: f64 = t.trim().parse().with_context(|| format!("bad time `{t}`"))?;
            let links: u32 = l.trim().parse().with_context(|| format!("bad L `{l}`"))?;
            let lattice = Lattice::from_links(links).with_context(|| format!("L must be 4 or 6, got {links}"))?;
            Ok((time, lattice))
        })
        .collect()
}

fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    parse_values(text)?
        .into_iter()
        .map(|v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                bail!("swarm size {v} is not a positive integer")
            }
        })
        .collect()
}

fn grid_or(args: &SuiteArgs, default: &[(Param, &str)]) -> Result<Vec<(Param, Vec<f64>)>> {
    if args.grid.is_empty() {
        default.iter().map(|(p, v)| Ok((*p, parse_values(v)?))).collect()
    } else {
        args.grid.iter().map(|g| parse_axis(g)).collect()
    }
}

fn write_suite(manifest: &mut Manifest, dir: &Path, prefix: &str, suite: &SuiteResult) -> Result<()> {
    write_output(manifest, dir, &format!("{prefix}trials.csv"), |w| output::write_trials(w, suite))?;
    write_output(manifest, dir, &format!("{prefix}aggregates.csv"), |w| {
        output::write_aggregates(w, &suite.aggregates)
    })
}

fn print_final(label: &str, suite: &SuiteResult) {
    for a in suite.final_aggregates() {
        let coords: Vec<String> = a.coords.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!(
            "{label} {}: e_theta_ss={:.4} e_L_ss={:.4} C={:.4} success_rate={:.2}",
            coords.join(" "),
            a.e_theta_ss.mean,
            a.e_l_ss.mean,
            a.cost.mean,
            a.success_rate
        );
    }
}

pub fn run(args: &SuiteArgs) -> Result<()> {
    let spec = args.scenario.load()?;
    let master = spec.seed;
    if args.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder.build().context("cannot start worker pool")?;

    std::fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let kind = args.kind.to_possible_value().expect("no skipped variants").get_name().to_string();
    let mut manifest = Manifest::start(&format!("suite {kind}"), master, &spec);
    let mut params = Table::new();
    params.insert("trials".into(), Value::Integer(args.trials as i64));
    let mut figures: Vec<FigurePoint> = Vec::new();
    let dir = args.out.as_path();

    pool.install(|| -> Result<()> {
        match args.kind {
            SuiteKind::Tune => {
                let default: &[(Param, &str)] = if spec.controller == Controller::Baseline {
                    &[(Param::Gravity, "0:1:40"), (Param::ForceMax, "0:0.5:10")]
                } else {
                    &[(Param::RadialGain, "0:1:30"), (Param::NormalGain, "0:1:30")]
                };
                let sweep = SweepSpec {
                    axes: grid_or(args, default)?,
                    trials: args.trials,
                    base: spec.clone(),
                    master_seed: master,
                };
                params.insert("grid".into(), axes_value(&sweep.axes));
                let result = experiments::gain_sweep(&sweep)?;
                write_suite(&mut manifest, dir, "", &result.suite)?;
                let best = result.best_aggregate();
                let coords: Vec<String> = best.coords.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!("argmin {} C={:.4} success_rate={:.2}", coords.join(" "), best.cost.mean, best.success_rate);
                println!("cells with mean C <= 1: {}", result.region.len());
                params.insert(
                    "region".into(),
                    Value::Array(result.region.iter().map(|&c| Value::Integer(c as i64)).collect()),
                );
                params.insert("argmin".into(), Value::Integer(result.argmin as i64));
                figures = result.suite.figures;
            }
            SuiteKind::Faults => {
                params.insert("fraction".into(), Value::Float(args.fraction));
                params.insert("t_remove".into(), Value::Float(args.t_remove));
                let suite = experiments::fault_suite(&spec, args.fraction, args.t_remove, args.trials, master)?;
                write_suite(&mut manifest, dir, "", &suite)?;
                for a in &suite.aggregates {
                    println!(
                        "phase {}: e_theta_ss={:.4} e_L_ss={:.4} settled_rate={:.2}",
                        a.phase, a.e_theta_ss.mean, a.e_l_ss.mean, a.settled_rate
                    );
                }
            }
            SuiteKind::Noise => {
                let sigmas = parse_values(&args.sigmas)?;
                params.insert("sigmas".into(), floats(&sigmas));
                let suite = experiments::noise_suite(&spec, &sigmas, args.trials, master)?;
                write_suite(&mut manifest, dir, "", &suite)?;
                print_final("noise", &suite);
                figures = suite.figures;
            }
            SuiteKind::Flexibility => {
                let schedule = parse_schedule(&args.schedule)?;
                params.insert("schedule".into(), Value::String(args.schedule.clone()));
                params.insert("reset_gains".into(), Value::Boolean(args.reset_gains));
                let suite = experiments::flexibility_suite(&spec, &schedule, args.reset_gains, args.trials, master)?;
                write_suite(&mut manifest, dir, "", &suite)?;
                for a in &suite.aggregates {
                    println!(
                        "phase {}: e_theta_ss={:.4} e_L_ss={:.4} settled_rate={:.2} G_n_ss={:.4}",
                        a.phase, a.e_theta_ss.mean, a.e_l_ss.mean, a.settled_rate, a.mean_g_n_ss
                    );
                }
            }
            SuiteKind::Scalability => {
                let sizes = parse_sizes(&args.sizes)?;
                params.insert("sizes".into(), floats(&sizes.iter().map(|&n| n as f64).collect::<Vec<_>>()));
                params.insert("R_s".into(), Value::Float(args.sensing_radius));
                let suite = experiments::scalability_suite(&spec, &sizes, args.sensing_radius, args.trials, master)?;
                write_suite(&mut manifest, dir, "", &suite)?;
                print_final("scalability", &suite);
                figures = suite.figures;
                if let Some(radii) = &args.sensing_radii {
                    let radii = parse_values(radii)?;
                    params.insert("sensing_radii".into(), floats(&radii));
                    let sensing = experiments::sensing_suite(&spec, &radii, args.trials, master)?;
                    write_suite(&mut manifest, dir, "sensing_", &sensing)?;
                    print_final("sensing", &sensing);
                    figures.extend(sensing.figures);
                }
            }
            SuiteKind::CompareBaseline => {
                let sizes = parse_sizes(&args.sizes)?;
                let grid = SweepSpec {
                    axes: grid_or(args, &[(Param::Gravity, "0:1:40"), (Param::ForceMax, "0:0.5:10")])?,
                    trials: args.trials,
                    base: spec.clone(),
                    master_seed: master,
                };
                params.insert("grid".into(), axes_value(&grid.axes));
                params.insert("sizes".into(), floats(&sizes.iter().map(|&n| n as f64).collect::<Vec<_>>()));
                params.insert("R_s".into(), Value::Float(args.sensing_radius));
                let main = if spec.controller == Controller::Baseline {
                    let mut m = spec.clone();
                    m.controller = Controller::MainStatic;
                    m
                } else {
                    spec.clone()
                };
                let cmp = experiments::baseline_comparison(&main, &grid, &sizes, args.sensing_radius, args.trials, master)?;
                write_suite(&mut manifest, dir, "baseline_sweep_", &cmp.baseline_sweep.suite)?;
                write_suite(&mut manifest, dir, "main_", &cmp.main)?;
                write_suite(&mut manifest, dir, "baseline_", &cmp.baseline)?;
                write_output(&mut manifest, dir, "comparison.csv", |w| {
                    let mut c = csv::Writer::from_writer(w);
                    c.write_record([
                        "N",
                        "main_e_theta_ss",
                        "baseline_e_theta_ss",
                        "main_e_L_ss",
                        "baseline_e_L_ss",
                        "main_success_rate",
                        "baseline_success_rate",
                    ])?;
                    for r in &cmp.table {
                        c.write_record([
                            r.n.to_string(),
                            r.main_e_theta_ss.to_string(),
                            r.baseline_e_theta_ss.to_string(),
                            r.main_e_l_ss.to_string(),
                            r.baseline_e_l_ss.to_string(),
                            r.main_success_rate.to_string(),
                            r.baseline_success_rate.to_string(),
                        ])?;
                    }
                    c.flush()?;
                    Ok(())
                })?;
                let best = cmp.baseline_sweep.best_aggregate();
                let coords: Vec<String> = best.coords.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!("baseline argmin {} C={:.4}", coords.join(" "), best.cost.mean);
                for r in &cmp.table {
                    println!(
                        "N={}: e_theta_ss main={:.4} baseline={:.4}; success main={:.2} baseline={:.2}",
                        r.n, r.main_e_theta_ss, r.baseline_e_theta_ss, r.main_success_rate, r.baseline_success_rate
                    );
                }
                figures = cmp.baseline_sweep.suite.figures;
                figures.extend(cmp.main.figures);
                figures.extend(cmp.baseline.figures);
            }
        }
        Ok(())
    })?;

    if !figures.is_empty() {
        write_output(&mut manifest, dir, "figures.csv", |w| output::write_figures(w, &figures))?;
    }
    manifest.set_parameters(params);
    manifest.finish(dir)
}

fn floats(values: &[f64]) -> Value {
    Value::Array(values.iter().map(|&v| Value::Float(v)).collect())
}

fn axes_value(axes: &[(Param, Vec<f64>)]) -> Value {
    let mut t = Table::new();
    for (p, v) in axes {
        t.insert(p.name().into(), floats(v));
    }
    Value::Table(t)
}
