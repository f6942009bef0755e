//! Regularity and compactness of a swarm, steady-state detection and trial
//! classification.

use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::control::Lattice;
use crate::error::{Error, Result};
use crate::geometry::{GeometryParams, LinkSet, SwarmState};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsConfig {
    pub e_theta_star: f64,
    pub e_l_star: f64,
    /// Steady-state window length (s).
    pub t_w: f64,
    pub dt: f64,
    pub t_max: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            e_theta_star: 0.2,
            e_l_star: 0.3,
            t_w: 10.0,
            dt: 0.01,
            t_max: 200.0,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: f64| x > 0.0 && x < 1.0;
        if !in_unit(self.e_theta_star) || !in_unit(self.e_l_star) {
            return Err(Error::Usage("metric thresholds must lie in (0, 1)".into()));
        }
        if !(self.dt > 0.0 && self.t_w > 0.0 && self.t_max >= 0.0) {
            return Err(Error::Usage("dt and T_w must be > 0, t_max >= 0".into()));
        }
        if self.t_max > 0.0 && self.t_w > self.t_max {
            return Err(Error::Usage("T_w must not exceed t_max".into()));
        }
        Ok(())
    }

    /// Number of trailing samples the steady-state test compares against.
    pub fn window_steps(&self) -> usize {
        steps_in(self.t_w, self.dt)
    }

    pub fn theta_tolerance(&self) -> f64 {
        0.1 * self.e_theta_star
    }

    pub fn l_tolerance(&self) -> f64 {
        0.1 * self.e_l_star
    }
}

/// `floor(duration / dt)`, robust to `dt` not being exactly representable.
pub fn steps_in(duration: f64, dt: f64) -> usize {
    let q = duration / dt;
    let r = q.round();
    if (q - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        q.floor() as usize
    }
}

/// One sample of the metric time series.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsRecord {
    pub t: f64,
    pub e_theta: f64,
    pub e_l: f64,
    pub g_n_mean: f64,
    pub g_n_min: f64,
    pub g_n_max: f64,
    /// Undirected link count.
    pub num_links: usize,
    pub num_agents: usize,
}

/// Time series sampled once per integration step, plus the start index of
/// every phase (a new phase begins after each applied event).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTrace {
    pub records: Vec<MetricsRecord>,
    pub phase_starts: Vec<usize>,
}

impl MetricsTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Index ranges of the phases, in order. A trace without events has one.
    pub fn phases(&self) -> Vec<std::ops::Range<usize>> {
        if self.records.is_empty() {
            return Vec::new();
        }
        let mut starts = vec![0];
        starts.extend(self.phase_starts.iter().copied().filter(|&s| s > 0 && s < self.records.len()));
        starts.dedup();
        let mut ends: Vec<usize> = starts[1..].to_vec();
        ends.push(self.records.len());
        starts.into_iter().zip(ends).map(|(s, e)| s..e).collect()
    }
}

/// Bearings within this many radians of a lattice direction are treated as
/// exactly aligned, absorbing rounding in positions such as `√3/2`.
pub const ANGLE_SNAP: f64 = 1e-12;

/// Regularity `e_θ ∈ [0, 1]` of the link set.
///
/// The reverse orientation of a link differs by π, a multiple of the lattice
/// period, so each ordered pair of distinct undirected links contributes four
/// identical terms and the sum reduces to pairwise circular distances between
/// link bearings taken modulo `2π/L`. Those are summed in `O(n log n)` after
/// sorting.
pub fn regularity(links: &LinkSet, lattice: Lattice, orientation_offset: f64) -> f64 {
    let period = lattice.period();
    let mut phases: Vec<f64> = links
        .undirected()
        .map(|l| (l.angle - orientation_offset).rem_euclid(period))
        .map(|p| if p < ANGLE_SNAP || period - p < ANGLE_SNAP { 0.0 } else { p })
        .collect();
    let u = phases.len();
    if u < 2 {
        return 1.0;
    }
    phases.sort_by(f64::total_cmp);
    let total = circular_pair_sum(&phases, period);
    // |E|² - 2|E| with |E| = 2u equals 4·u·(u-1); the 4 cancels the orientations.
    let theta_err = 2.0 * total / (u as f64 * (u as f64 - 1.0));
    (lattice.l() / PI * theta_err).clamp(0.0, 1.0)
}

/// Σ_{a<b} min(d, P - d) with d = |φ_b - φ_a| over sorted `φ ∈ [0, P)`.
fn circular_pair_sum(sorted: &[f64], period: f64) -> f64 {
    let n = sorted.len();
    let half = period / 2.0;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &p in sorted {
        prefix.push(prefix.last().unwrap() + p);
    }
    let mut total = 0.0;
    let mut hi = 0;
    for a in 0..n {
        if hi < a + 1 {
            hi = a + 1;
        }
        // sorted[a+1..hi] lie within half a period above sorted[a]
        while hi < n && sorted[hi] - sorted[a] <= half {
            hi += 1;
        }
        let near = (hi - a - 1) as f64;
        let far = (n - hi) as f64;
        let near_sum = prefix[hi] - prefix[a + 1];
        let far_sum = prefix[n] - prefix[hi];
        total += near_sum - near * sorted[a];
        total += far * (period + sorted[a]) - far_sum;
    }
    total
}

/// Compactness `e_L`: mean normalised deviation of link counts from `L`.
pub fn compactness(links: &LinkSet, lattice: Lattice) -> f64 {
    // Integer deficit sum, then a single division: the result is the correctly
    // rounded ratio, so values on a threshold compare exactly.
    let degrees = links.degrees();
    let l = lattice.links() as usize;
    let deficit: usize = degrees.iter().map(|&d| d.abs_diff(l)).sum();
    deficit as f64 / (l * degrees.len()) as f64
}

/// Compactness evaluated directly from a state.
pub fn compactness_of(state: &SwarmState, params: &GeometryParams, lattice: Lattice) -> f64 {
    compactness(&crate::geometry::build_links(state, params), lattice)
}

/// Sliding-window max/min tracker used for online steady-state detection.
#[derive(Debug, Clone)]
struct WindowExtrema {
    window: usize,
    max: VecDeque<(usize, f64)>,
    min: VecDeque<(usize, f64)>,
}

impl WindowExtrema {
    fn new(window: usize) -> Self {
        Self {
            window,
            max: VecDeque::new(),
            min: VecDeque::new(),
        }
    }

    /// Pushes sample `k` and returns whether every one of the previous
    /// `window` samples lies within `tol` of it.
    fn push(&mut self, k: usize, value: f64, tol: f64) -> bool {
        while self.max.back().is_some_and(|&(_, v)| v <= value) {
            self.max.pop_back();
        }
        self.max.push_back((k, value));
        while self.min.back().is_some_and(|&(_, v)| v >= value) {
            self.min.pop_back();
        }
        self.min.push_back((k, value));
        let oldest = k.saturating_sub(self.window);
        while self.max.front().is_some_and(|&(i, _)| i < oldest) {
            self.max.pop_front();
        }
        while self.min.front().is_some_and(|&(i, _)| i < oldest) {
            self.min.pop_front();
        }
        if k < self.window {
            return false;
        }
        let hi = self.max.front().unwrap().1;
        let lo = self.min.front().unwrap().1;
        hi - value <= tol && value - lo <= tol
    }
}

/// Online steady-state detector over a stream of `(e_θ, e_L)` samples.
#[derive(Debug, Clone)]
pub struct SteadyStateDetector {
    theta: WindowExtrema,
    l: WindowExtrema,
    theta_tol: f64,
    l_tol: f64,
    count: usize,
    first: Option<usize>,
}

impl SteadyStateDetector {
    pub fn new(config: &MetricsConfig) -> Self {
        let w = config.window_steps();
        Self {
            theta: WindowExtrema::new(w),
            l: WindowExtrema::new(w),
            theta_tol: config.theta_tolerance(),
            l_tol: config.l_tolerance(),
            count: 0,
            first: None,
        }
    }

    /// Feeds the next sample; returns `true` once steady state has been
    /// reached (at this or any earlier sample).
    pub fn push(&mut self, e_theta: f64, e_l: f64) -> bool {
        let k = self.count;
        self.count += 1;
        let a = self.theta.push(k, e_theta, self.theta_tol);
        let b = self.l.push(k, e_l, self.l_tol);
        if a && b && self.first.is_none() {
            self.first = Some(k);
        }
        self.first.is_some()
    }

    /// Sample index (relative to the first pushed sample) of steady state.
    pub fn reached_at(&self) -> Option<usize> {
        self.first
    }
}

/// Result of the steady-state scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub t_ss: Option<f64>,
    pub e_theta_ss: f64,
    pub e_l_ss: f64,
}

/// Steady-state scan of a trace slice. The window is counted from the first
/// record of the slice; without steady state the last record is read.
pub fn steady_state_scan(records: &[MetricsRecord], config: &MetricsConfig) -> Option<SteadyState> {
    let last = records.last()?;
    let mut det = SteadyStateDetector::new(config);
    for r in records {
        if det.push(r.e_theta, r.e_l) {
            break;
        }
    }
    Some(match det.reached_at() {
        Some(k) => SteadyState {
            t_ss: Some(records[k].t),
            e_theta_ss: records[k].e_theta,
            e_l_ss: records[k].e_l,
        },
        None => SteadyState {
            t_ss: None,
            e_theta_ss: last.e_theta,
            e_l_ss: last.e_l,
        },
    })
}

/// Earliest times after which `e_θ` (resp. `e_L`) stays at or below its
/// threshold for the rest of the slice.
pub fn convergence_times(records: &[MetricsRecord], config: &MetricsConfig) -> (Option<f64>, Option<f64>) {
    let settle = |value: fn(&MetricsRecord) -> f64, threshold: f64| {
        let mut t = None;
        for r in records.iter().rev() {
            if value(r) <= threshold {
                t = Some(r.t);
            } else {
                break;
            }
        }
        t
    };
    (
        settle(|r| r.e_theta, config.e_theta_star),
        settle(|r| r.e_l, config.e_l_star),
    )
}

/// A trial succeeds when steady state was reached with both metrics strictly
/// below threshold.
pub fn success(ss: &SteadyState, config: &MetricsConfig) -> bool {
    ss.t_ss.is_some() && ss.e_theta_ss < config.e_theta_star && ss.e_l_ss < config.e_l_star
}

/// Tuning cost `(e_θ/e_θ*)² + (e_L/e_L*)²`.
pub fn tuning_cost(e_theta_ss: f64, e_l_ss: f64, config: &MetricsConfig) -> f64 {
    (e_theta_ss / config.e_theta_star).powi(2) + (e_l_ss / config.e_l_star).powi(2)
}

/// Everything derived from one phase of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSummary {
    pub t_start: f64,
    pub t_end: f64,
    pub t_ss: Option<f64>,
    pub e_theta_ss: f64,
    pub e_l_ss: f64,
    pub t_theta: Option<f64>,
    pub t_l: Option<f64>,
    pub success: bool,
    pub cost: f64,
    /// Mean normal gain at `t_ss` (or at the end of the phase).
    pub g_n_ss: f64,
}

impl PhaseSummary {
    /// `max(T_θ, T_L)` measured from the start of the phase.
    pub fn settle_time(&self) -> Option<f64> {
        Some(self.t_theta?.max(self.t_l?) - self.t_start)
    }
}

pub fn summarize(records: &[MetricsRecord], config: &MetricsConfig) -> Option<PhaseSummary> {
    let ss = steady_state_scan(records, config)?;
    let (t_theta, t_l) = convergence_times(records, config);
    let g_n_ss = match ss.t_ss {
        Some(t) => records.iter().find(|r| r.t == t).map(|r| r.g_n_mean).unwrap_or(0.0),
        None => records.last().unwrap().g_n_mean,
    };
    Some(PhaseSummary {
        t_start: records[0].t,
        t_end: records.last().unwrap().t,
        t_ss: ss.t_ss,
        e_theta_ss: ss.e_theta_ss,
        e_l_ss: ss.e_l_ss,
        t_theta,
        t_l,
        success: success(&ss, config),
        cost: tuning_cost(ss.e_theta_ss, ss.e_l_ss, config),
        g_n_ss,
    })
}
