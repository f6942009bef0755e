//! The displacement-based lattice controller.
//!
//! Each agent combines a radial input, which aggregates the swarm around the
//! desired link length through a saturated Lennard-Jones profile, with a
//! normal input that rotates every link toward the nearest lattice direction.
//! In adaptive mode each agent integrates its own normal gain from the local
//! average angular error.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geometry::{bearing, GeometryParams, SwarmState, Vec2};

/// Radial terms closer than this are skipped: their direction is undefined.
pub const MIN_RADIAL_DISTANCE: f64 = 1e-9;

/// Lattice type: number of links per interior agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lattice {
    Square,
    Triangular,
}

impl Lattice {
    pub fn from_links(l: u32) -> Result<Self> {
        match l {
            4 => Ok(Lattice::Square),
            6 => Ok(Lattice::Triangular),
            other => Err(Error::Usage(format!("L must be 4 or 6, got {other}"))),
        }
    }

    pub fn links(self) -> u32 {
        match self {
            Lattice::Square => 4,
            Lattice::Triangular => 6,
        }
    }

    #[inline]
    pub fn l(self) -> f64 {
        self.links() as f64
    }

    /// Angular period `2π/L` of the lattice directions.
    #[inline]
    pub fn period(self) -> f64 {
        TAU / self.l()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlParams {
    pub lattice: Lattice,
    /// Desired link length (m).
    pub r: f64,
    pub g_r: f64,
    /// Shared normal gain (static mode).
    pub g_n: f64,
    pub a: f64,
    pub b: f64,
    pub c: u32,
    pub v_max: f64,
    /// Rotation of the lattice directions (rad).
    pub orientation_offset: f64,
    pub adaptive: bool,
    pub alpha: f64,
    pub e_theta_star: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            lattice: Lattice::Square,
            r: 1.0,
            g_r: 15.0,
            g_n: 8.0,
            a: 0.15,
            b: 0.15,
            c: 5,
            v_max: 5.0,
            orientation_offset: 0.0,
            adaptive: false,
            alpha: 3.0,
            e_theta_star: 0.2,
        }
    }
}

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Usage(what.to_string()))
            }
        };
        check(self.r > 0.0 && self.r.is_finite(), "R must be a finite real > 0")?;
        check(self.g_r >= 0.0 && self.g_r.is_finite(), "G_r must be a finite real >= 0")?;
        check(self.g_n >= 0.0 && self.g_n.is_finite(), "G_n must be a finite real >= 0")?;
        check(self.a > 0.0 && self.a.is_finite(), "a must be a finite real > 0")?;
        check(self.b > 0.0 && self.b.is_finite(), "b must be a finite real > 0")?;
        check(self.c >= 1, "c must be an integer >= 1")?;
        check(self.v_max > 0.0, "V_max must be > 0")?;
        check(self.orientation_offset.is_finite(), "orientation_offset must be finite")?;
        check(self.alpha > 0.0 && self.alpha.is_finite(), "alpha must be a finite real > 0")?;
        check(
            self.e_theta_star > 0.0 && self.e_theta_star < 1.0,
            "e_theta_star must lie in (0, 1)",
        )
    }

    /// Lennard-Jones profile saturated at 1.
    pub fn radial_interaction(&self, dist: f64) -> Result<f64> {
        if !(dist > 0.0) {
            return Err(Error::DegenerateGeometry(format!(
                "radial interaction at distance {dist}"
            )));
        }
        Ok(self.lj(dist))
    }

    #[inline]
    fn lj(&self, dist: f64) -> f64 {
        let p = dist.recip().powi(self.c as i32);
        (self.a * p * p - self.b * p).min(1.0)
    }
}

/// Residual of `theta - offset` with respect to the nearest multiple of
/// `2π/L`, in `(-π/L, π/L]`. Exact ties resolve to `+π/L`.
pub fn angular_error(theta: f64, lattice: Lattice, orientation_offset: f64) -> f64 {
    let period = lattice.period();
    let half = period / 2.0;
    let shifted = theta - orientation_offset;
    let mut err = shifted - period * (shifted / period).round();
    if err <= -half {
        err += period;
    } else if err > half {
        err -= period;
    }
    err
}

/// Normal interaction `-(L/π)·θ_err`.
#[inline]
pub fn normal_interaction(theta_err: f64, lattice: Lattice) -> f64 {
    -(lattice.l() / PI) * theta_err
}

#[inline]
fn radial_term(params: &ControlParams, r: Vec2, dist: f64) -> Vec2 {
    r * (params.lj(dist) / dist)
}

#[inline]
fn normal_term(params: &ControlParams, r: Vec2, dist: f64) -> Vec2 {
    let err = angular_error(bearing(r), params.lattice, params.orientation_offset);
    r.perp() * (normal_interaction(err, params.lattice) / dist)
}

/// Gain used by agent `i` for the normal input.
#[inline]
pub fn normal_gain(state: &SwarmState, i: usize, params: &ControlParams) -> f64 {
    if params.adaptive {
        state.normal_gains[i]
    } else {
        params.g_n
    }
}

/// Radial input of agent `i` over the given neighbourhood.
pub fn radial_input(state: &SwarmState, i: usize, neighbourhood: &[usize], params: &ControlParams) -> Vec2 {
    let xi = state.positions[i];
    let mut sum = Vec2::ZERO;
    for &j in neighbourhood {
        let r = xi - state.positions[j];
        let dist = r.norm();
        if dist < MIN_RADIAL_DISTANCE {
            continue;
        }
        sum += radial_term(params, r, dist);
    }
    sum * params.g_r
}

/// Normal input of agent `i` over the given adjacency set.
pub fn normal_input(state: &SwarmState, i: usize, adjacency: &[usize], params: &ControlParams) -> Vec2 {
    let xi = state.positions[i];
    let mut sum = Vec2::ZERO;
    for &j in adjacency {
        let r = xi - state.positions[j];
        let dist = r.norm();
        if dist == 0.0 {
            continue;
        }
        sum += normal_term(params, r, dist);
    }
    sum * normal_gain(state, i, params)
}

/// Rescales `u` to norm `v_max` when it is faster than that.
#[inline]
pub fn clamp_speed(u: Vec2, v_max: f64) -> Vec2 {
    let n = u.norm();
    if n > v_max {
        u * (v_max / n)
    } else {
        u
    }
}

/// Full, speed-limited input of agent `i`. Neighbourhood and adjacency are
/// evaluated in the same pass over the swarm.
pub fn control_input(state: &SwarmState, i: usize, params: &ControlParams, geometry: &GeometryParams) -> Vec2 {
    let xi = state.positions[i];
    let mut radial = Vec2::ZERO;
    let mut normal = Vec2::ZERO;
    for (j, &xj) in state.positions.iter().enumerate() {
        if j == i {
            continue;
        }
        let r = xi - xj;
        let dist = r.norm();
        if !geometry.senses(dist) {
            continue;
        }
        if dist >= MIN_RADIAL_DISTANCE {
            radial += radial_term(params, r, dist);
        }
        if geometry.is_link_length(dist) {
            normal += normal_term(params, r, dist);
        }
    }
    let u = radial * params.g_r + normal * normal_gain(state, i, params);
    clamp_speed(u, params.v_max)
}

/// Mean normalised |angular error| over the links of agent `i`; 0 when `i`
/// has no links.
pub fn local_angular_error(state: &SwarmState, i: usize, adjacency: &[usize], params: &ControlParams) -> f64 {
    if adjacency.is_empty() {
        return 0.0;
    }
    let xi = state.positions[i];
    let total: f64 = adjacency
        .iter()
        .map(|&j| {
            let r = xi - state.positions[j];
            angular_error(bearing(r), params.lattice, params.orientation_offset).abs()
        })
        .sum();
    params.lattice.l() / PI * total / adjacency.len() as f64
}

/// One forward-Euler step of the dead-zone adaptation law.
#[inline]
pub fn adapt_normal_gain(gain: f64, e_theta_i: f64, params: &ControlParams, dt: f64) -> f64 {
    if e_theta_i > params.e_theta_star {
        gain + params.alpha * (e_theta_i - params.e_theta_star) * dt
    } else {
        gain
    }
}
