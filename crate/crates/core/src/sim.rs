//! Forward-Euler integration of `ẋ_i = u_i` with speed limiting, additive
//! Gaussian noise and timed events.
//!
//! Randomness is drawn from ChaCha8 streams derived from the trial seed, one
//! stream per purpose (initial positions, process noise, removals, spins), so
//! enabling noise never perturbs the initial condition and vice versa.

use std::f64::consts::TAU;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::baseline::{assign_spins, baseline_input, BaselineParams};
use crate::control::{
    adapt_normal_gain, clamp_speed, control_input, local_angular_error, ControlParams, Lattice,
};
use crate::error::{Error, Result};
use crate::geometry::{adjacency_set, build_links, GeometryParams, LinkSet, SwarmState, Vec2};
use crate::metrics::{
    compactness, regularity, steps_in, summarize, MetricsConfig, MetricsRecord, MetricsTrace,
    PhaseSummary, SteadyStateDetector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Controller {
    MainStatic,
    MainAdaptive,
    Baseline,
}

impl Controller {
    pub fn as_str(self) -> &'static str {
        match self {
            Controller::MainStatic => "main-static",
            Controller::MainAdaptive => "main-adaptive",
            Controller::Baseline => "baseline",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "main-static" => Some(Controller::MainStatic),
            "main-adaptive" => Some(Controller::MainAdaptive),
            "baseline" => Some(Controller::Baseline),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// Remove a uniformly random fraction of the live agents.
    RemoveFraction(f64),
    /// Remove the agents with these original ids.
    RemoveIds(Vec<usize>),
    /// Switch the target lattice, optionally zeroing every adaptive gain.
    SetLattice { lattice: Lattice, reset_gains: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Everything needed to reproduce one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub n: usize,
    /// Radius of the initial deployment disk (m).
    pub disk_radius: f64,
    pub seed: u64,
    pub dt: f64,
    pub t_max: f64,
    pub t_w: f64,
    pub noise_sigma: f64,
    pub controller: Controller,
    pub control: ControlParams,
    pub baseline: BaselineParams,
    pub geometry: GeometryParams,
    pub e_l_star: f64,
    pub events: Vec<Event>,
    pub snapshot_times: Vec<f64>,
    /// Stop once steady state is reached and no events remain.
    pub stop_at_steady_state: bool,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            n: 100,
            disk_radius: 2.0,
            seed: 0,
            dt: 0.01,
            t_max: 200.0,
            t_w: 10.0,
            noise_sigma: 0.0,
            controller: Controller::MainStatic,
            control: ControlParams::default(),
            baseline: BaselineParams::default(),
            geometry: GeometryParams::default(),
            e_l_star: 0.3,
            events: Vec::new(),
            snapshot_times: vec![0.0, 1.0, 2.5],
            stop_at_steady_state: true,
        }
    }
}

impl ScenarioSpec {
    pub fn metrics_config(&self) -> MetricsConfig {
        MetricsConfig {
            e_theta_star: self.control.e_theta_star,
            e_l_star: self.e_l_star,
            t_w: self.t_w,
            dt: self.dt,
            t_max: self.t_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Usage("N must be >= 1".into()));
        }
        if !(self.disk_radius > 0.0 && self.disk_radius.is_finite()) {
            return Err(Error::Usage("r must be a finite real > 0".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Usage("dt must be a finite real > 0".into()));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::Usage("t_max must be a finite real >= 0".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Usage("sigma must be a finite real >= 0".into()));
        }
        self.control.validate()?;
        self.baseline.validate()?;
        self.geometry.validate()?;
        self.metrics_config().validate()?;
        let mut last = f64::NEG_INFINITY;
        for e in &self.events {
            if !(e.time >= 0.0 && e.time <= self.t_max) {
                return Err(Error::Usage(format!(
                    "event time {} outside [0, t_max]",
                    e.time
                )));
            }
            if e.time < last {
                return Err(Error::Usage("events must be sorted by time".into()));
            }
            last = e.time;
            if let EventKind::RemoveFraction(f) = e.kind {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::Usage(format!(
                        "removal fraction {f} outside (0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Purpose-specific random streams of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    InitialPositions = 1,
    Noise = 2,
    Removal = 3,
    Spins = 4,
}

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a seed together with a path of indices into a new seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(master), |acc, &p| mix64(acc ^ mix64(p)))
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[stream as u64]))
}

/// Uniform-by-area sample of `n` points in the disk of radius `radius`.
pub fn sample_initial_positions<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> Vec<Vec2> {
    (0..n)
        .map(|_| {
            let phi = rng.random::<f64>() * TAU;
            let d = radius * rng.random::<f64>().sqrt();
            Vec2::from_polar(d, phi)
        })
        .collect()
}

/// Read-only inputs of one integration step.
#[derive(Debug, Clone, Copy)]
pub struct Dynamics<'a> {
    pub controller: Controller,
    pub control: &'a ControlParams,
    pub baseline: &'a BaselineParams,
    pub geometry: &'a GeometryParams,
    /// One spin per live agent (used by the baseline on square lattices).
    pub spins: &'a [bool],
    pub dt: f64,
    pub noise_sigma: f64,
}

impl Dynamics<'_> {
    /// Speed-limited input of agent `i`.
    pub fn input(&self, state: &SwarmState, i: usize) -> Vec2 {
        match self.controller {
            Controller::MainStatic | Controller::MainAdaptive => {
                control_input(state, i, self.control, self.geometry)
            }
            Controller::Baseline => clamp_speed(
                baseline_input(state, i, self.baseline, self.control.lattice, self.spins, self.geometry),
                self.control.v_max,
            ),
        }
    }
}

/// Synchronous Euler(-Maruyama) update: every input is evaluated on the
/// pre-step snapshot.
pub fn step<R: Rng + ?Sized>(state: &SwarmState, dynamics: &Dynamics, noise: &mut R) -> Result<SwarmState> {
    let n = state.len();
    let dt = dynamics.dt;
    let inputs: Vec<Vec2> = (0..n).map(|i| dynamics.input(state, i)).collect();

    let mut next = state.clone();
    if dynamics.controller == Controller::MainAdaptive {
        for i in 0..n {
            let adjacency = adjacency_set(state, i, dynamics.geometry)?;
            let e_i = local_angular_error(state, i, &adjacency, dynamics.control);
            next.normal_gains[i] = adapt_normal_gain(state.normal_gains[i], e_i, dynamics.control, dt);
        }
    }

    let diffusion = dynamics.noise_sigma * dt.sqrt();
    for (i, (x, u)) in next.positions.iter_mut().zip(&inputs).enumerate() {
        *x += *u * dt;
        if diffusion > 0.0 {
            let xi: f64 = noise.sample(StandardNormal);
            let eta: f64 = noise.sample(StandardNormal);
            *x += Vec2::new(xi, eta) * diffusion;
        }
        if !x.is_finite() {
            return Err(Error::NonFinite(format!(
                "agent {} at t = {} (input {:?})",
                state.ids[i], state.time, u
            )));
        }
    }
    next.time = state.time + dt;
    Ok(next)
}

/// One agent's entry in a snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentSample {
    pub id: usize,
    pub position: Vec2,
    pub normal_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub agents: Vec<AgentSample>,
}

impl Snapshot {
    pub fn of(state: &SwarmState) -> Self {
        Self {
            t: state.time,
            agents: (0..state.len())
                .map(|i| AgentSample {
                    id: state.ids[i],
                    position: state.positions[i],
                    normal_gain: state.normal_gains[i],
                })
                .collect(),
        }
    }
}

/// Metric sample of a state whose links are already built.
pub fn measure(state: &SwarmState, links: &LinkSet, control: &ControlParams) -> MetricsRecord {
    let gains = &state.normal_gains;
    let (lo, hi) = gains
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| (lo.min(g), hi.max(g)));
    MetricsRecord {
        t: state.time,
        e_theta: regularity(links, control.lattice, control.orientation_offset),
        e_l: compactness(links, control.lattice),
        g_n_mean: state.mean_normal_gain(),
        g_n_min: lo,
        g_n_max: hi,
        num_links: links.len() / 2,
        num_agents: state.len(),
    }
}

/// A running trial: state plus the live (event-mutable) parameters and the
/// random streams.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub state: SwarmState,
    pub control: ControlParams,
    pub spins: Vec<bool>,
    spec: ScenarioSpec,
    noise_rng: ChaCha8Rng,
    removal_rng: ChaCha8Rng,
    step_index: usize,
}

impl Simulation {
    pub fn new(spec: &ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let positions = sample_initial_positions(
            spec.n,
            spec.disk_radius,
            &mut stream_rng(spec.seed, Stream::InitialPositions),
        );
        Self::with_positions(spec, positions)
    }

    /// Starts from explicit positions instead of sampling the disk.
    pub fn with_positions(spec: &ScenarioSpec, positions: Vec<Vec2>) -> Result<Self> {
        spec.validate()?;
        let state = SwarmState::new(positions)?;
        let spins = assign_spins(state.len(), &mut stream_rng(spec.seed, Stream::Spins));
        let mut control = spec.control.clone();
        control.adaptive = spec.controller == Controller::MainAdaptive;
        Ok(Self {
            state,
            control,
            spins,
            spec: spec.clone(),
            noise_rng: stream_rng(spec.seed, Stream::Noise),
            removal_rng: stream_rng(spec.seed, Stream::Removal),
            step_index: 0,
        })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn dynamics(&self) -> Dynamics<'_> {
        Dynamics {
            controller: self.spec.controller,
            control: &self.control,
            baseline: &self.spec.baseline,
            geometry: &self.spec.geometry,
            spins: &self.spins,
            dt: self.spec.dt,
            noise_sigma: self.spec.noise_sigma,
        }
    }

    pub fn advance(&mut self) -> Result<()> {
        let dynamics = Dynamics {
            controller: self.spec.controller,
            control: &self.control,
            baseline: &self.spec.baseline,
            geometry: &self.spec.geometry,
            spins: &self.spins,
            dt: self.spec.dt,
            noise_sigma: self.spec.noise_sigma,
        };
        let mut next = step(&self.state, &dynamics, &mut self.noise_rng)?;
        self.step_index += 1;
        // time from the step counter, so it does not drift
        next.time = self.step_index as f64 * self.spec.dt;
        self.state = next;
        Ok(())
    }

    pub fn apply_event(&mut self, event: &EventKind) -> Result<()> {
        match event {
            EventKind::RemoveFraction(fraction) => {
                let n = self.state.len();
                let count = ((fraction * n as f64).round() as usize).max(1);
                if count >= n {
                    return Err(Error::Scenario(format!(
                        "removing {count} of {n} agents would empty the swarm"
                    )));
                }
                let mut keep = vec![true; n];
                for slot in index::sample(&mut self.removal_rng, n, count) {
                    keep[slot] = false;
                }
                self.remove_slots(&keep);
            }
            EventKind::RemoveIds(ids) => {
                let keep: Vec<bool> = self.state.ids.iter().map(|id| !ids.contains(id)).collect();
                if keep.iter().all(|k| !k) {
                    return Err(Error::Scenario("removal would empty the swarm".into()));
                }
                self.remove_slots(&keep);
            }
            EventKind::SetLattice { lattice, reset_gains } => {
                self.control.lattice = *lattice;
                if *reset_gains {
                    self.state.normal_gains.iter_mut().for_each(|g| *g = 0.0);
                }
            }
        }
        Ok(())
    }

    fn remove_slots(&mut self, keep: &[bool]) {
        self.state.retain_slots(keep);
        let mut k = keep.iter();
        self.spins.retain(|_| *k.next().unwrap());
    }

    pub fn links(&self) -> LinkSet {
        build_links(&self.state, &self.spec.geometry)
    }

    pub fn measure(&self) -> MetricsRecord {
        measure(&self.state, &self.links(), &self.control)
    }
}

/// Summary of a finished trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    /// One entry per phase, in time order.
    pub phases: Vec<PhaseSummary>,
}

impl TrialSummary {
    /// The phase after the last event (the whole trial when there are none).
    pub fn last(&self) -> Option<&PhaseSummary> {
        self.phases.last()
    }

    pub fn success(&self) -> bool {
        self.last().is_some_and(|p| p.success)
    }
}

#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub trace: MetricsTrace,
    pub final_state: SwarmState,
    pub snapshots: Vec<Snapshot>,
    pub summary: TrialSummary,
}

/// Runs one trial to steady state (once no events remain) or to `t_max`.
pub fn run_trial(spec: &ScenarioSpec) -> Result<TrialOutput> {
    let sim = Simulation::new(spec)?;
    run_simulation(sim)
}

pub fn run_simulation(sim: Simulation) -> Result<TrialOutput> {
    run_simulation_observed(sim, |_| {})
}

/// Like [`run_simulation`], calling `observe` on every recorded state (after
/// events of that step have been applied).
pub fn run_simulation_observed(mut sim: Simulation, mut observe: impl FnMut(&SwarmState)) -> Result<TrialOutput> {
    let spec = sim.spec().clone();
    let config = spec.metrics_config();
    let mut trace = MetricsTrace::default();
    let mut snapshots = Vec::new();
    if spec.t_max == 0.0 {
        return Ok(TrialOutput {
            trace,
            final_state: sim.state,
            snapshots,
            summary: TrialSummary { phases: Vec::new() },
        });
    }

    let last_step = steps_in(spec.t_max, spec.dt);
    let event_steps: Vec<usize> = spec.events.iter().map(|e| (e.time / spec.dt).round() as usize).collect();
    let mut snapshot_steps: Vec<usize> = spec
        .snapshot_times
        .iter()
        .filter(|&&t| t >= 0.0 && t <= spec.t_max)
        .map(|t| (t / spec.dt).round() as usize)
        .collect();
    snapshot_steps.sort_unstable();
    snapshot_steps.dedup();

    let mut next_event = 0;
    let mut detector = SteadyStateDetector::new(&config);
    loop {
        let k = sim.step_index();
        let mut applied = false;
        while next_event < spec.events.len() && event_steps[next_event] <= k {
            sim.apply_event(&spec.events[next_event].kind)?;
            next_event += 1;
            applied = true;
        }
        if applied && !trace.records.is_empty() {
            trace.phase_starts.push(trace.records.len());
            detector = SteadyStateDetector::new(&config);
        }

        let record = sim.measure();
        trace.records.push(record);
        observe(&sim.state);
        if snapshot_steps.binary_search(&k).is_ok() {
            snapshots.push(Snapshot::of(&sim.state));
        }

        let steady = detector.push(record.e_theta, record.e_l);
        let done = k >= last_step || (spec.stop_at_steady_state && steady && next_event == spec.events.len());
        if done {
            break;
        }
        sim.advance()?;
    }

    if snapshots.last().is_none_or(|s| s.t != sim.state.time) {
        snapshots.push(Snapshot::of(&sim.state));
    }
    let phases = trace
        .phases()
        .into_iter()
        .filter_map(|range| summarize(&trace.records[range], &config))
        .collect();
    Ok(TrialOutput {
        trace,
        final_state: sim.state,
        snapshots,
        summary: TrialSummary { phases },
    })
}
