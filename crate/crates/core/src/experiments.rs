//! Experiment recipes: gain sweeps and the fault, noise, flexibility,
//! scalability and baseline-comparison suites.
//!
//! A suite is a list of cells (scenario variants) times `trials` seeds. The
//! seed of trial `k` in cell `c` is `derive_seed(master, [c, k])`, so results
//! do not depend on how trials are scheduled across threads. Aggregation runs
//! over the collected rows in index order.

use rayon::prelude::*;

use crate::control::Lattice;
use crate::error::{Error, Result};
use crate::metrics::PhaseSummary;
use crate::sim::{derive_seed, run_trial, Controller, Event, EventKind, ScenarioSpec};

/// A scenario parameter that a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    RadialGain,
    NormalGain,
    Gravity,
    ForceMax,
    Noise,
    Agents,
    SensingRadius,
}

impl Param {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "G_r" | "Gr" => Param::RadialGain,
            "G_n" | "Gn" => Param::NormalGain,
            "G" => Param::Gravity,
            "F_max" | "Fmax" => Param::ForceMax,
            "sigma" => Param::Noise,
            "N" => Param::Agents,
            "R_s" | "Rs" => Param::SensingRadius,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Param::RadialGain => "G_r",
            Param::NormalGain => "G_n",
            Param::Gravity => "G",
            Param::ForceMax => "F_max",
            Param::Noise => "sigma",
            Param::Agents => "N",
            Param::SensingRadius => "R_s",
        }
    }

    pub fn apply(self, spec: &mut ScenarioSpec, value: f64) {
        match self {
            Param::RadialGain => spec.control.g_r = value,
            Param::NormalGain => spec.control.g_n = value,
            Param::Gravity => spec.baseline.g = value,
            Param::ForceMax => spec.baseline.f_max = value,
            Param::Noise => spec.noise_sigma = value,
            Param::Agents => spec.n = value as usize,
            Param::SensingRadius => spec.geometry.sensing_radius = value,
        }
    }
}

/// Inclusive arithmetic range `start, start + step, ..., <= stop`.
pub fn linspace_step(start: f64, step: f64, stop: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|k| start + k as f64 * step).collect()
}

/// One scenario variant of a suite.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Coordinates of the cell in parameter space, for reporting.
    pub coords: Vec<(String, f64)>,
    pub spec: ScenarioSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub cell: usize,
    pub trial: usize,
    pub phase: usize,
    pub spec: ScenarioSpec,
    pub summary: PhaseSummary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Envelope {
    fn of(values: &[f64]) -> Self {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { mean, min, max }
    }
}

/// Statistics of one (cell, phase) over all its trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub cell: usize,
    pub phase: usize,
    pub coords: Vec<(String, f64)>,
    pub trials: usize,
    pub e_theta_ss: Envelope,
    pub e_l_ss: Envelope,
    pub cost: Envelope,
    pub success_rate: f64,
    /// Fraction of trials where both metrics ended below threshold for good.
    pub settled_rate: f64,
    /// Mean of `T_θ - t_start` over trials where it is defined.
    pub mean_t_theta: Option<f64>,
    pub mean_t_l: Option<f64>,
    pub mean_g_n_ss: f64,
}

/// Groups `(cell, phase, summary)` rows and reduces each group in row order.
pub fn aggregate<'a>(rows: impl IntoIterator<Item = (usize, usize, &'a PhaseSummary)>, coords: &[Vec<(String, f64)>]) -> Vec<Aggregate> {
    let mut groups: Vec<((usize, usize), Vec<&PhaseSummary>)> = Vec::new();
    for (cell, phase, s) in rows {
        match groups.iter_mut().find(|(key, _)| *key == (cell, phase)) {
            Some((_, v)) => v.push(s),
            None => groups.push(((cell, phase), vec![s])),
        }
    }
    groups.sort_by_key(|(key, _)| *key);
    groups
        .into_iter()
        .map(|((cell, phase), group)| {
            let n = group.len() as f64;
            let pick = |f: fn(&PhaseSummary) -> f64| group.iter().map(|s| f(s)).collect::<Vec<_>>();
            let mean_of = |vals: Vec<f64>| {
                if vals.is_empty() {
                    None
                } else {
                    Some(vals.iter().sum::<f64>() / vals.len() as f64)
                }
            };
            Aggregate {
                cell,
                phase,
                coords: coords.get(cell).cloned().unwrap_or_default(),
                trials: group.len(),
                e_theta_ss: Envelope::of(&pick(|s| s.e_theta_ss)),
                e_l_ss: Envelope::of(&pick(|s| s.e_l_ss)),
                cost: Envelope::of(&pick(|s| s.cost)),
                success_rate: group.iter().filter(|s| s.success).count() as f64 / n,
                settled_rate: group.iter().filter(|s| s.settle_time().is_some()).count() as f64 / n,
                mean_t_theta: mean_of(group.iter().filter_map(|s| Some(s.t_theta? - s.t_start)).collect()),
                mean_t_l: mean_of(group.iter().filter_map(|s| Some(s.t_l? - s.t_start)).collect()),
                mean_g_n_ss: group.iter().map(|s| s.g_n_ss).sum::<f64>() / n,
            }
        })
        .collect()
}

/// One point of a plot-ready long-format table.
#[derive(Debug, Clone, PartialEq)]
pub struct FigurePoint {
    pub figure: String,
    pub series: String,
    pub x: f64,
    pub y: Option<f64>,
    pub value: f64,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub kind: String,
    pub master_seed: u64,
    pub cells: Vec<Cell>,
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<Aggregate>,
    pub figures: Vec<FigurePoint>,
}

impl SuiteResult {
    pub fn aggregate(&self, cell: usize, phase: usize) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.cell == cell && a.phase == phase)
    }

    /// Aggregates of the last phase of every cell.
    pub fn final_aggregates(&self) -> Vec<&Aggregate> {
        (0..self.cells.len())
            .filter_map(|c| self.aggregates.iter().filter(|a| a.cell == c).max_by_key(|a| a.phase))
            .collect()
    }

    /// Rows of one cell and phase, in trial order.
    pub fn rows_of(&self, cell: usize, phase: usize) -> impl Iterator<Item = &TrialRow> {
        self.rows.iter().filter(move |r| r.cell == cell && r.phase == phase)
    }
}

/// Runs `trials` seeds of every cell. Uses the ambient rayon pool.
pub fn run_cells(kind: &str, cells: Vec<Cell>, trials: usize, master_seed: u64) -> Result<SuiteResult> {
    if trials == 0 {
        return Err(Error::Usage("a suite needs at least one trial per cell".into()));
    }
    if cells.is_empty() {
        return Err(Error::Usage("a suite needs at least one cell".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..trials).map(move |k| (c, k))).collect();
    let outcomes: Vec<Result<(ScenarioSpec, Vec<PhaseSummary>)>> = jobs
        .par_iter()
        .map(|&(c, k)| {
            let mut spec = cells[c].spec.clone();
            spec.seed = derive_seed(master_seed, &[c as u64, k as u64]);
            let out = run_trial(&spec)?;
            Ok((spec, out.summary.phases))
        })
        .collect();

    let mut rows = Vec::new();
    for (&(cell, trial), outcome) in jobs.iter().zip(outcomes) {
        let (spec, phases) = outcome?;
        for (phase, summary) in phases.into_iter().enumerate() {
            rows.push(TrialRow {
                cell,
                trial,
                phase,
                spec: spec.clone(),
                summary,
            });
        }
    }
    let coords: Vec<_> = cells.iter().map(|c| c.coords.clone()).collect();
    let aggregates = aggregate(rows.iter().map(|r| (r.cell, r.phase, &r.summary)), &coords);
    Ok(SuiteResult {
        kind: kind.to_string(),
        master_seed,
        cells,
        rows,
        aggregates,
        figures: Vec::new(),
    })
}

/// A grid sweep over one or more parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axes: Vec<(Param, Vec<f64>)>,
    pub trials: usize,
    pub base: ScenarioSpec,
    pub master_seed: u64,
}

impl SweepSpec {
    /// Cartesian product of the axes, first axis varying slowest.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = vec![Cell {
            coords: Vec::new(),
            spec: self.base.clone(),
        }];
        for (param, values) in &self.axes {
            cells = cells
                .into_iter()
                .flat_map(|cell| {
                    values.iter().map(move |&v| {
                        let mut next = cell.clone();
                        param.apply(&mut next.spec, v);
                        next.coords.push((param.name().to_string(), v));
                        next
                    })
                })
                .collect();
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub suite: SuiteResult,
    /// Cell with the lowest mean cost.
    pub argmin: usize,
    /// Cells whose mean cost is at most 1.
    pub region: Vec<usize>,
}

impl SweepResult {
    pub fn best(&self) -> &Cell {
        &self.suite.cells[self.argmin]
    }

    pub fn best_aggregate(&self) -> &Aggregate {
        self.suite.final_aggregates()[self.argmin]
    }
}

/// Mean-cost grid sweep; ties resolve to the earliest cell.
pub fn gain_sweep(sweep: &SweepSpec) -> Result<SweepResult> {
    if sweep.axes.is_empty() || sweep.axes.iter().any(|(_, v)| v.is_empty()) {
        return Err(Error::Usage("sweep grid is empty".into()));
    }
    let mut suite = run_cells("tune", sweep.cells(), sweep.trials, sweep.master_seed)?;
    let finals: Vec<Aggregate> = suite.final_aggregates().into_iter().cloned().collect();
    let argmin = finals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cost.mean.total_cmp(&b.1.cost.mean))
        .map(|(i, _)| i)
        .unwrap();
    let region = finals.iter().filter(|a| a.cost.mean <= 1.0).map(|a| a.cell).collect();

    let figure = match (sweep.base.controller, sweep.base.control.lattice) {
        (Controller::Baseline, _) => "fig10",
        (_, Lattice::Triangular) => "fig4a",
        (_, Lattice::Square) => "fig4b",
    };
    if sweep.axes.len() == 2 {
        suite.figures = finals
            .iter()
            .map(|a| FigurePoint {
                figure: figure.into(),
                series: "C".into(),
                x: a.coords[0].1,
                y: Some(a.coords[1].1),
                value: a.cost.mean,
                min: Some(a.cost.min),
                max: Some(a.cost.max),
            })
            .collect();
    }
    Ok(SweepResult { suite, argmin, region })
}

fn envelope_points(figure: &str, suite: &SuiteResult, x_of: impl Fn(&Aggregate) -> f64, with_gain: bool) -> Vec<FigurePoint> {
    let mut out = Vec::new();
    for a in suite.final_aggregates() {
        let x = x_of(a);
        let mut push = |series: &str, e: Envelope| {
            out.push(FigurePoint {
                figure: figure.into(),
                series: series.into(),
                x,
                y: None,
                value: e.mean,
                min: Some(e.min),
                max: Some(e.max),
            })
        };
        push("e_theta_ss", a.e_theta_ss);
        push("e_L_ss", a.e_l_ss);
        if with_gain {
            out.push(FigurePoint {
                figure: figure.into(),
                series: "G_n_ss".into(),
                x,
                y: None,
                value: a.mean_g_n_ss,
                min: None,
                max: None,
            });
        }
    }
    out
}

/// Removes `fraction` of the swarm at `t_remove`; phase 0 is before the
/// removal and phase 1 after it.
pub fn fault_suite(base: &ScenarioSpec, fraction: f64, t_remove: f64, trials: usize, master_seed: u64) -> Result<SuiteResult> {
    let mut spec = base.clone();
    spec.events = vec![Event {
        time: t_remove,
        kind: EventKind::RemoveFraction(fraction),
    }];
    let coords = vec![("fraction".to_string(), fraction), ("t_remove".to_string(), t_remove)];
    run_cells("faults", vec![Cell { coords, spec }], trials, master_seed)
}

pub fn noise_suite(base: &ScenarioSpec, sigmas: &[f64], trials: usize, master_seed: u64) -> Result<SuiteResult> {
    let sweep = SweepSpec {
        axes: vec![(Param::Noise, sigmas.to_vec())],
        trials,
        base: base.clone(),
        master_seed,
    };
    let mut suite = run_cells("noise", sweep.cells(), trials, master_seed)?;
    suite.figures = envelope_points("fig7", &suite, |a| a.coords[0].1, false);
    Ok(suite)
}

/// Runs a lattice-switch schedule; every switch opens a new phase.
pub fn flexibility_suite(
    base: &ScenarioSpec,
    schedule: &[(f64, Lattice)],
    reset_gains: bool,
    trials: usize,
    master_seed: u64,
) -> Result<SuiteResult> {
    let mut spec = base.clone();
    spec.events = schedule
        .iter()
        .map(|&(time, lattice)| Event {
            time,
            kind: EventKind::SetLattice { lattice, reset_gains },
        })
        .collect();
    let coords = vec![("switches".to_string(), schedule.len() as f64)];
    run_cells("flexibility", vec![Cell { coords, spec }], trials, master_seed)
}

/// Varies the swarm size with the deployment radius `√(N/25)`.
pub fn scalability_suite(base: &ScenarioSpec, sizes: &[usize], sensing_radius: f64, trials: usize, master_seed: u64) -> Result<SuiteResult> {
    let cells = sizes
        .iter()
        .map(|&n| {
            let mut spec = base.clone();
            spec.n = n;
            spec.disk_radius = (n as f64 / 25.0).sqrt();
            spec.geometry.sensing_radius = sensing_radius;
            Cell {
                coords: vec![("N".to_string(), n as f64)],
                spec,
            }
        })
        .collect();
    let mut suite = run_cells("scalability", cells, trials, master_seed)?;
    let (figure, with_gain) = match base.controller {
        Controller::Baseline => ("fig11", false),
        Controller::MainAdaptive => ("fig15", true),
        Controller::MainStatic => ("fig9b", false),
    };
    suite.figures = envelope_points(figure, &suite, |a| a.coords[0].1, with_gain);
    Ok(suite)
}

/// Varies the sensing radius at fixed swarm size.
pub fn sensing_suite(base: &ScenarioSpec, radii: &[f64], trials: usize, master_seed: u64) -> Result<SuiteResult> {
    let sweep = SweepSpec {
        axes: vec![(Param::SensingRadius, radii.to_vec())],
        trials,
        base: base.clone(),
        master_seed,
    };
    let mut suite = run_cells("sensing", sweep.cells(), trials, master_seed)?;
    suite.figures = envelope_points("fig9a", &suite, |a| a.coords[0].1, false);
    Ok(suite)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub n: usize,
    pub main_e_theta_ss: f64,
    pub baseline_e_theta_ss: f64,
    pub main_e_l_ss: f64,
    pub baseline_e_l_ss: f64,
    pub main_success_rate: f64,
    pub baseline_success_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub baseline_sweep: SweepResult,
    pub main: SuiteResult,
    pub baseline: SuiteResult,
    pub table: Vec<ComparisonRow>,
}

/// Tunes the baseline on `grid`, then runs the scalability test for both
/// controllers on identical seeds.
pub fn baseline_comparison(
    main: &ScenarioSpec,
    grid: &SweepSpec,
    sizes: &[usize],
    sensing_radius: f64,
    trials: usize,
    master_seed: u64,
) -> Result<Comparison> {
    let mut tuning = grid.clone();
    tuning.base.controller = Controller::Baseline;
    let baseline_sweep = gain_sweep(&tuning)?;
    let tuned = baseline_sweep.best().spec.clone();

    let main_suite = scalability_suite(main, sizes, sensing_radius, trials, master_seed)?;
    let baseline_suite = scalability_suite(&tuned, sizes, sensing_radius, trials, master_seed)?;
    let table = sizes
        .iter()
        .enumerate()
        .map(|(c, &n)| {
            let m = main_suite.final_aggregates()[c].clone();
            let b = baseline_suite.final_aggregates()[c].clone();
            ComparisonRow {
                n,
                main_e_theta_ss: m.e_theta_ss.mean,
                baseline_e_theta_ss: b.e_theta_ss.mean,
                main_e_l_ss: m.e_l_ss.mean,
                baseline_e_l_ss: b.e_l_ss.mean,
                main_success_rate: m.success_rate,
                baseline_success_rate: b.success_rate,
            }
        })
        .collect();
    Ok(Comparison {
        baseline_sweep,
        main: main_suite,
        baseline: baseline_suite,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ScenarioSpec {
        ScenarioSpec {
            n: 8,
            t_max: 3.0,
            t_w: 1.0,
            ..Default::default()
        }
    }

    #[test]
    fn linspace_is_inclusive() {
        assert_eq!(linspace_step(0.0, 5.0, 30.0), vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]);
        assert_eq!(linspace_step(0.0, 0.05, 1.0).len(), 21);
        assert_eq!(linspace_step(2.0, 1.0, 2.0), vec![2.0]);
    }

    #[test]
    fn sweep_cells_are_row_major() {
        let sweep = SweepSpec {
            axes: vec![(Param::RadialGain, vec![0.0, 5.0]), (Param::NormalGain, vec![1.0, 2.0, 3.0])],
            trials: 1,
            base: tiny(),
            master_seed: 0,
        };
        let cells = sweep.cells();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[4].coords, vec![("G_r".to_string(), 5.0), ("G_n".to_string(), 2.0)]);
        assert_eq!((cells[4].spec.control.g_r, cells[4].spec.control.g_n), (5.0, 2.0));
    }

    #[test]
    fn single_cell_sweep_equals_direct_aggregate() {
        let sweep = SweepSpec {
            axes: vec![(Param::RadialGain, vec![15.0]), (Param::NormalGain, vec![8.0])],
            trials: 3,
            base: tiny(),
            master_seed: 11,
        };
        let result = gain_sweep(&sweep).unwrap();
        assert_eq!(result.argmin, 0);
        let direct: Vec<PhaseSummary> = (0..3)
            .map(|k| {
                let mut spec = sweep.cells()[0].spec.clone();
                spec.seed = derive_seed(11, &[0, k]);
                run_trial(&spec).unwrap().summary.phases[0]
            })
            .collect();
        let expect = aggregate(direct.iter().map(|s| (0, 0, s)), &[result.suite.cells[0].coords.clone()]);
        assert_eq!(result.suite.aggregates, expect);
    }

    #[test]
    fn no_control_cell_fails() {
        let sweep = SweepSpec {
            axes: vec![(Param::RadialGain, vec![0.0]), (Param::NormalGain, vec![0.0])],
            trials: 2,
            base: ScenarioSpec { n: 30, t_max: 12.0, ..Default::default() },
            master_seed: 5,
        };
        let result = gain_sweep(&sweep).unwrap();
        let a = result.best_aggregate();
        assert_eq!(a.success_rate, 0.0);
        assert!(a.cost.mean > 1.0);
    }

    #[test]
    fn aggregate_envelopes_are_ordered() {
        let suite = noise_suite(&tiny(), &[0.0, 0.3], 3, 2).unwrap();
        assert_eq!(suite.aggregates.len(), 2);
        for a in &suite.aggregates {
            assert_eq!(a.trials, 3);
            assert!(a.e_theta_ss.min <= a.e_theta_ss.mean && a.e_theta_ss.mean <= a.e_theta_ss.max);
            assert!(a.e_l_ss.min <= a.e_l_ss.mean && a.e_l_ss.mean <= a.e_l_ss.max);
        }
        assert_eq!(suite.figures.len(), 4);
        assert!(suite.figures.iter().all(|f| f.figure == "fig7"));
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let sweep = SweepSpec { axes: vec![], trials: 1, base: tiny(), master_seed: 0 };
        assert!(gain_sweep(&sweep).is_err());
        assert!(run_cells("x", vec![], 1, 0).is_err());
        assert!(noise_suite(&tiny(), &[0.0], 0, 0).is_err());
    }

    #[test]
    fn empty_schedule_matches_plain_runs() {
        let plain = run_cells("plain", vec![Cell { coords: vec![("switches".into(), 0.0)], spec: tiny() }], 2, 4).unwrap();
        let flex = flexibility_suite(&tiny(), &[], true, 2, 4).unwrap();
        assert_eq!(plain.rows, flex.rows);
    }
}
