//! Run manifest: tool version, resolved scenario, master seed, timestamps and
//! a SHA-256 digest of every file the run produced.

use std::path::Path;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use swarm_lattice::config;
use swarm_lattice::sim::TrialSummary;
use swarm_lattice::ScenarioSpec;

pub const FILE_NAME: &str = "manifest.toml";

pub struct Manifest {
    table: Table,
    outputs: Vec<Value>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn opt(v: Option<f64>) -> Value {
    v.map(Value::Float).unwrap_or_else(|| Value::String("none".into()))
}

impl Manifest {
    pub fn start(command: &str, master_seed: u64, spec: &ScenarioSpec) -> Self {
        let mut table = Table::new();
        table.insert("tool".into(), Value::String(env!("CARGO_PKG_NAME").into()));
        table.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
        table.insert("command".into(), Value::String(command.into()));
        table.insert("master_seed".into(), Value::Integer(master_seed as i64));
        table.insert("started".into(), Value::String(now()));
        table.insert("config".into(), Value::Table(config::to_table(spec)));
        Self { table, outputs: Vec::new() }
    }

    /// Adds free-form suite parameters (trial count, grid, schedule, ...).
    pub fn set_parameters(&mut self, params: Table) {
        self.table.insert("parameters".into(), Value::Table(params));
    }

    pub fn set_summary(&mut self, summary: &TrialSummary) {
        let phases = summary
            .phases
            .iter()
            .map(|p| {
                let mut t = Table::new();
                t.insert("t_start".into(), Value::Float(p.t_start));
                t.insert("t_end".into(), Value::Float(p.t_end));
                t.insert("t_ss".into(), opt(p.t_ss));
                t.insert("e_theta_ss".into(), Value::Float(p.e_theta_ss));
                t.insert("e_L_ss".into(), Value::Float(p.e_l_ss));
                t.insert("T_theta".into(), opt(p.t_theta));
                t.insert("T_L".into(), opt(p.t_l));
                t.insert("success".into(), Value::Boolean(p.success));
                t.insert("C".into(), Value::Float(p.cost));
                Value::Table(t)
            })
            .collect();
        self.table.insert("phases".into(), Value::Array(phases));
    }

    /// Records `dir/name` with its size and digest.
    pub fn add_output(&mut self, dir: &Path, name: &str) -> Result<()> {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).with_context(|| format!("cannot read back {}", path.display()))?;
        let mut t = Table::new();
        t.insert("path".into(), Value::String(name.into()));
        t.insert("bytes".into(), Value::Integer(bytes.len() as i64));
        t.insert("sha256".into(), Value::String(hex::encode(Sha256::digest(&bytes))));
        self.outputs.push(Value::Table(t));
        Ok(())
    }

    pub fn finish(mut self, dir: &Path) -> Result<()> {
        self.table.insert("finished".into(), Value::String(now()));
        self.table.insert("outputs".into(), Value::Array(self.outputs));
        let text = toml::to_string(&self.table).context("cannot serialise manifest")?;
        let path = dir.join(FILE_NAME);
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    }
}
