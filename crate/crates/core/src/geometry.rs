//! Planar geometry, swarm state and the neighbourhood / adjacency / link
//! relations between agents.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// A point or displacement in the plane, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(radius: f64, angle: f64) -> Self {
        Self::new(radius * angle.cos(), radius * angle.sin())
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Counterclockwise rotation by π/2.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

/// Snapshot of the whole swarm at one instant.
///
/// `ids` carries the original agent identifier of each slot so that output
/// stays traceable after agents are removed. `normal_gains` is only read by
/// the adaptive controller but is always kept the same length as `positions`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub positions: Vec<Vec2>,
    pub normal_gains: Vec<f64>,
    pub ids: Vec<usize>,
    pub time: f64,
}

impl SwarmState {
    pub fn new(positions: Vec<Vec2>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Usage("a swarm needs at least one agent".into()));
        }
        if let Some(i) = positions.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("initial position of agent {i}")));
        }
        let n = positions.len();
        Ok(Self {
            positions,
            normal_gains: vec![0.0; n],
            ids: (0..n).collect(),
            time: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    fn check_id(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::Usage(format!(
                "agent id {i} out of range for a swarm of {}",
                self.len()
            )))
        }
    }

    /// Keeps only the agents whose slot index satisfies `keep`.
    pub fn retain_slots(&mut self, keep: &[bool]) {
        let mut k = keep.iter();
        self.positions.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.normal_gains.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.ids.retain(|_| *k.next().unwrap());
    }

    pub fn mean_normal_gain(&self) -> f64 {
        self.normal_gains.iter().sum::<f64>() / self.len() as f64
    }
}

/// Sensing radius and link-length bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryParams {
    /// Sensing radius; `f64::INFINITY` means every agent senses every other.
    pub sensing_radius: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            sensing_radius: f64::INFINITY,
            r_min: 0.6,
            r_max: 1.1,
        }
    }
}

impl GeometryParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sensing_radius > 0.0) {
            return Err(Error::Usage("R_s must be > 0".into()));
        }
        if !(self.r_min > 0.0 && self.r_min.is_finite()) {
            return Err(Error::Usage("R_min must be a finite real > 0".into()));
        }
        if !(self.r_max >= self.r_min && self.r_max.is_finite()) {
            return Err(Error::Usage("R_max must be finite and >= R_min".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn senses(&self, dist: f64) -> bool {
        dist <= self.sensing_radius
    }

    #[inline]
    pub fn is_link_length(&self, dist: f64) -> bool {
        self.r_min <= dist && dist <= self.r_max
    }
}

/// `x_i - x_j`.
pub fn relative_position(state: &SwarmState, i: usize, j: usize) -> Result<Vec2> {
    state.check_id(i)?;
    state.check_id(j)?;
    if i == j {
        return Err(Error::Usage(format!(
            "relative position of agent {i} with itself"
        )));
    }
    Ok(state.positions[i] - state.positions[j])
}

/// Agents within sensing range of `i`, in increasing id order.
pub fn neighbourhood(state: &SwarmState, i: usize, params: &GeometryParams) -> Result<Vec<usize>> {
    state.check_id(i)?;
    let xi = state.positions[i];
    Ok((0..state.len())
        .filter(|&j| j != i && params.senses((xi - state.positions[j]).norm()))
        .collect())
}

/// Agents at a link-compatible distance from `i`, in increasing id order.
pub fn adjacency_set(state: &SwarmState, i: usize, params: &GeometryParams) -> Result<Vec<usize>> {
    state.check_id(i)?;
    let xi = state.positions[i];
    Ok((0..state.len())
        .filter(|&j| {
            let dist = (xi - state.positions[j]).norm();
            j != i && params.senses(dist) && params.is_link_length(dist)
        })
        .collect())
}

/// Bearing of `r` measured counterclockwise from the +x axis, in `[0, 2π)`.
pub fn link_angle(r: Vec2) -> Result<f64> {
    if r.x == 0.0 && r.y == 0.0 {
        return Err(Error::DegenerateGeometry("bearing of a zero vector".into()));
    }
    Ok(bearing(r))
}

/// Same as [`link_angle`] without the zero check; callers guarantee `r != 0`.
#[inline]
pub(crate) fn bearing(r: Vec2) -> f64 {
    let theta = r.y.atan2(r.x);
    if theta < 0.0 {
        // atan2 can return -0.0 or a tiny negative whose shift rounds to 2π.
        let shifted = theta + TAU;
        if shifted >= TAU {
            0.0
        } else {
            shifted
        }
    } else {
        theta
    }
}

/// Unsigned angle in `[0, π]` between two bearings.
pub fn pair_angle(theta1: f64, theta2: f64) -> f64 {
    let mut d = (theta1 - theta2).rem_euclid(TAU);
    if d > PI {
        d = TAU - d;
    }
    d
}

/// One directed link with its cached geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub i: usize,
    pub j: usize,
    /// `x_i - x_j`.
    pub r: Vec2,
    pub dist: f64,
    /// Bearing of `r` in `[0, 2π)`.
    pub angle: f64,
}

/// The directed link set. Both orientations of every link are stored, so
/// `len()` is twice the number of undirected links.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkSet {
    links: Vec<Link>,
    degree: Vec<usize>,
}

impl LinkSet {
    /// Directed links, in lexicographic `(i, j)` order.
    pub fn links(&self) -> &[Link] {
        &self.links
    }

    /// Number of directed links, `|E|`.
    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// `|A_i|` for every agent.
    pub fn degrees(&self) -> &[usize] {
        &self.degree
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.links
            .binary_search_by(|l| (l.i, l.j).cmp(&(i, j)))
            .is_ok()
    }

    /// Links with `i < j`, one per undirected pair.
    pub fn undirected(&self) -> impl Iterator<Item = &Link> {
        self.links.iter().filter(|l| l.i < l.j)
    }
}

/// Builds `E` by a direct pass over all agent pairs.
pub fn build_links(state: &SwarmState, params: &GeometryParams) -> LinkSet {
    let n = state.len();
    let mut links = Vec::new();
    let mut degree = vec![0usize; n];
    for i in 0..n {
        let xi = state.positions[i];
        for j in 0..n {
            if i == j {
                continue;
            }
            let r = xi - state.positions[j];
            let dist = r.norm();
            if params.senses(dist) && params.is_link_length(dist) {
                links.push(Link {
                    i,
                    j,
                    r,
                    dist,
                    angle: bearing(r),
                });
                degree[i] += 1;
            }
        }
    }
    LinkSet { links, degree }
}
