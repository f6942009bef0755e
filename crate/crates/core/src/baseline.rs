//! Gravitational virtual-force baseline (physicomimetics), reduced to
//! first-order dynamics. Square lattices use a binary spin per agent:
//! opposite spins settle at `R`, equal spins at `√2·R`.

use std::f64::consts::SQRT_2;

use rand::Rng;

use crate::control::{Lattice, MIN_RADIAL_DISTANCE};
use crate::error::{Error, Result};
use crate::geometry::{GeometryParams, SwarmState, Vec2};

/// Outer edge of the attractive shell, in units of `R`.
pub const CUTOFF_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams {
    pub g: f64,
    pub f_max: f64,
    pub r: f64,
    pub mass: f64,
    /// Only documents the first-order reduction; the integrated model is `ẋ = u`.
    pub friction: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            g: 35.0,
            f_max: 2.0,
            r: 1.0,
            mass: 1.0,
            friction: 1.0,
        }
    }
}

impl BaselineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(Error::Usage("G must be a finite real >= 0".into()));
        }
        if !(self.f_max >= 0.0 && self.f_max.is_finite()) {
            return Err(Error::Usage("F_max must be a finite real >= 0".into()));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::Usage("R must be a finite real > 0".into()));
        }
        if !(self.mass > 0.0 && self.friction > 0.0) {
            return Err(Error::Usage("m and mu must be > 0".into()));
        }
        Ok(())
    }

    /// Signed force magnitude; positive pushes the agents apart.
    pub fn gravitational_force(&self, dist: f64) -> Result<f64> {
        if !(dist > 0.0) {
            return Err(Error::DegenerateGeometry(format!(
                "gravitational force at distance {dist}"
            )));
        }
        Ok(self.force(dist))
    }

    #[inline]
    fn force(&self, dist: f64) -> f64 {
        if dist == self.r || dist > CUTOFF_FACTOR * self.r {
            return 0.0;
        }
        let magnitude = saturate_unchecked(self.g * self.mass * self.mass / (dist * dist), 0.0, self.f_max);
        if dist < self.r {
            magnitude
        } else {
            -magnitude
        }
    }
}

/// Clamp of `x` into `[lo, hi]`.
pub fn saturate(x: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::Usage(format!("saturation bounds [{lo}, {hi}] are empty")));
    }
    Ok(saturate_unchecked(x, lo, hi))
}

// F_max = 0 collapses the interval to a point; the force is then identically 0.
#[inline]
fn saturate_unchecked(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// Input of agent `i` (before speed limiting). `spins` is consulted only for
/// square lattices.
pub fn baseline_input(
    state: &SwarmState,
    i: usize,
    params: &BaselineParams,
    lattice: Lattice,
    spins: &[bool],
    geometry: &GeometryParams,
) -> Vec2 {
    let xi = state.positions[i];
    let use_spins = lattice == Lattice::Square;
    let mut u = Vec2::ZERO;
    for (j, &xj) in state.positions.iter().enumerate() {
        if j == i {
            continue;
        }
        let r = xi - xj;
        let dist = r.norm();
        if dist < MIN_RADIAL_DISTANCE || !geometry.senses(dist) {
            continue;
        }
        let effective = if use_spins && spins[i] == spins[j] {
            dist / SQRT_2
        } else {
            dist
        };
        let f = params.force(effective);
        if f != 0.0 {
            u += r * (f / dist);
        }
    }
    u
}

/// I.i.d. fair spins, one per agent.
pub fn assign_spins<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<bool> {
    (0..n).map(|_| rng.random::<bool>()).collect()
}
