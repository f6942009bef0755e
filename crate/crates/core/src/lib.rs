//! Deterministic simulation of planar swarms self-organising into square or
//! triangular lattices under a distributed virtual-force controller, together
//! with the regularity/compactness metrics and a reproducible experiment
//! harness.

pub mod baseline;
pub mod config;
pub mod control;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod metrics;
pub mod output;
pub mod sim;

pub use control::{ControlParams, Lattice};
pub use error::{Error, Result};
pub use geometry::{GeometryParams, LinkSet, SwarmState, Vec2};
pub use metrics::{MetricsConfig, MetricsTrace};
pub use sim::{run_trial, Controller, Event, EventKind, ScenarioSpec};
