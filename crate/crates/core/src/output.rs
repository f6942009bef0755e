//! CSV writers and readers for traces, snapshots, per-trial rows, aggregates
//! and figure tables.
//!
//! Floats are written with `Display`, which is the shortest representation
//! that parses back to the same value, so tables round-trip exactly. Missing
//! optional values are empty fields.

use std::io::{Read, Write};

use crate::config::spec_columns;
use crate::error::{Error, Result};
use crate::experiments::{aggregate, Aggregate, FigurePoint, SuiteResult};
use crate::geometry::Vec2;
use crate::metrics::{MetricsTrace, PhaseSummary};
use crate::sim::{AgentSample, Snapshot};

pub const TRACE_HEADER: [&str; 8] = ["t", "e_theta", "e_L", "G_n_mean", "G_n_min", "G_n_max", "num_links", "num_agents"];
pub const SNAPSHOT_HEADER: [&str; 6] = ["trial_id", "t", "agent_id", "x", "y", "G_n_i"];
pub const SUMMARY_HEADER: [&str; 10] = [
    "t_start", "t_end", "t_ss", "e_theta_ss", "e_L_ss", "T_theta", "T_L", "success", "C", "G_n_ss",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trace<W: Write>(out: W, trace: &MetricsTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        w.write_record([
            r.t.to_string(),
            r.e_theta.to_string(),
            r.e_l.to_string(),
            r.g_n_mean.to_string(),
            r.g_n_min.to_string(),
            r.g_n_max.to_string(),
            r.num_links.to_string(),
            r.num_agents.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_snapshots<W: Write>(out: W, trial_id: usize, snapshots: &[Snapshot]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SNAPSHOT_HEADER)?;
    for s in snapshots {
        for a in &s.agents {
            w.write_record([
                trial_id.to_string(),
                s.t.to_string(),
                a.id.to_string(),
                a.position.x.to_string(),
                a.position.y.to_string(),
                a.normal_gain.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A snapshot read back from CSV, tagged with its trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSnapshot {
    pub trial_id: usize,
    pub snapshot: Snapshot,
}

fn parse_field<T: std::str::FromStr>(path: &str, line: u64, name: &str, raw: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Parse {
        path: path.to_string(),
        line,
        message: format!("column `{name}`: cannot parse `{raw}`"),
    })
}

fn header_index(path: &str, headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
        path: path.to_string(),
        line: 1,
        message: format!("missing column `{name}`"),
    })
}

/// Reads a snapshot table; consecutive rows with equal `(trial_id, t)` form
/// one snapshot. `path` is only used in error messages.
pub fn read_snapshots<R: Read>(input: R, path: &str) -> Result<Vec<TrialSnapshot>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let idx: Vec<usize> = SNAPSHOT_HEADER
        .iter()
        .map(|name| header_index(path, &headers, name))
        .collect::<Result<_>>()?;
    let mut out: Vec<TrialSnapshot> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_string(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |k: usize| record.get(idx[k]).unwrap_or("");
        let trial_id: usize = parse_field(path, line, SNAPSHOT_HEADER[0], field(0))?;
        let t: f64 = parse_field(path, line, SNAPSHOT_HEADER[1], field(1))?;
        let sample = AgentSample {
            id: parse_field(path, line, SNAPSHOT_HEADER[2], field(2))?,
            position: Vec2::new(
                parse_field(path, line, SNAPSHOT_HEADER[3], field(3))?,
                parse_field(path, line, SNAPSHOT_HEADER[4], field(4))?,
            ),
            normal_gain: parse_field(path, line, SNAPSHOT_HEADER[5], field(5))?,
        };
        if !(sample.position.x.is_finite() && sample.position.y.is_finite() && t.is_finite()) {
            return Err(Error::Parse {
                path: path.to_string(),
                line,
                message: "non-finite time or position".into(),
            });
        }
        match out.last_mut() {
            Some(last) if last.trial_id == trial_id && last.snapshot.t == t => last.snapshot.agents.push(sample),
            _ => out.push(TrialSnapshot {
                trial_id,
                snapshot: Snapshot { t, agents: vec![sample] },
            }),
        }
    }
    Ok(out)
}

fn summary_fields(s: &PhaseSummary) -> [String; 10] {
    [
        s.t_start.to_string(),
        s.t_end.to_string(),
        opt(s.t_ss),
        s.e_theta_ss.to_string(),
        s.e_l_ss.to_string(),
        opt(s.t_theta),
        opt(s.t_l),
        s.success.to_string(),
        s.cost.to_string(),
        s.g_n_ss.to_string(),
    ]
}

/// One row per (cell, trial, phase): the resolved scenario, then the phase
/// summary.
pub fn write_trials<W: Write>(out: W, suite: &SuiteResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut wrote_header = false;
    for row in &suite.rows {
        let spec_cols = spec_columns(&row.spec);
        if !wrote_header {
            let mut header: Vec<&str> = vec!["cell", "trial", "phase"];
            header.extend(spec_cols.iter().map(|(k, _)| *k));
            header.extend(SUMMARY_HEADER);
            w.write_record(&header)?;
            wrote_header = true;
        }
        let mut fields = vec![row.cell.to_string(), row.trial.to_string(), row.phase.to_string()];
        fields.extend(spec_cols.into_iter().map(|(_, v)| v));
        fields.extend(summary_fields(&row.summary));
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

/// A per-trial row read back from CSV: indices plus the phase summary.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub cell: usize,
    pub trial: usize,
    pub phase: usize,
    pub summary: PhaseSummary,
}

pub fn read_trials<R: Read>(input: R, path: &str) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |name: &str| header_index(path, &headers, name);
    let (c_cell, c_trial, c_phase) = (col("cell")?, col("trial")?, col("phase")?);
    let s: Vec<usize> = SUMMARY_HEADER.iter().map(|n| col(n)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let get = |k: usize| record.get(k).unwrap_or("");
        let num = |k: usize| -> Result<f64> { parse_field(path, line, &headers[k], get(k)) };
        let maybe = |k: usize| -> Result<Option<f64>> {
            if get(k).is_empty() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        out.push(TrialRecord {
            cell: parse_field(path, line, "cell", get(c_cell))?,
            trial: parse_field(path, line, "trial", get(c_trial))?,
            phase: parse_field(path, line, "phase", get(c_phase))?,
            summary: PhaseSummary {
                t_start: num(s[0])?,
                t_end: num(s[1])?,
                t_ss: maybe(s[2])?,
                e_theta_ss: num(s[3])?,
                e_l_ss: num(s[4])?,
                t_theta: maybe(s[5])?,
                t_l: maybe(s[6])?,
                success: parse_field(path, line, "success", get(s[7]))?,
                cost: num(s[8])?,
                g_n_ss: num(s[9])?,
            },
        });
    }
    Ok(out)
}

/// Recomputes aggregates from rows read back from a per-trial table.
pub fn aggregate_records(records: &[TrialRecord], coords: &[Vec<(String, f64)>]) -> Vec<Aggregate> {
    aggregate(records.iter().map(|r| (r.cell, r.phase, &r.summary)), coords)
}

pub fn write_aggregates<W: Write>(out: W, aggregates: &[Aggregate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "cell",
        "phase",
        "coords",
        "trials",
        "e_theta_ss_mean",
        "e_theta_ss_min",
        "e_theta_ss_max",
        "e_L_ss_mean",
        "e_L_ss_min",
        "e_L_ss_max",
        "C_mean",
        "C_min",
        "C_max",
        "success_rate",
        "settled_rate",
        "T_theta_mean",
        "T_L_mean",
        "G_n_ss_mean",
    ])?;
    for a in aggregates {
        let coords = a.coords.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
        w.write_record([
            a.cell.to_string(),
            a.phase.to_string(),
            coords,
            a.trials.to_string(),
            a.e_theta_ss.mean.to_string(),
            a.e_theta_ss.min.to_string(),
            a.e_theta_ss.max.to_string(),
            a.e_l_ss.mean.to_string(),
            a.e_l_ss.min.to_string(),
            a.e_l_ss.max.to_string(),
            a.cost.mean.to_string(),
            a.cost.min.to_string(),
            a.cost.max.to_string(),
            a.success_rate.to_string(),
            a.settled_rate.to_string(),
            opt(a.mean_t_theta),
            opt(a.mean_t_l),
            a.mean_g_n_ss.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_figures<W: Write>(out: W, points: &[FigurePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["figure", "series", "x", "y", "value", "min", "max"])?;
    for p in points {
        w.write_record([
            p.figure.clone(),
            p.series.clone(),
            p.x.to_string(),
            opt(p.y),
            p.value.to_string(),
            opt(p.min),
            opt(p.max),
        ])?;
    }
    w.flush()?;
    Ok(())
}
