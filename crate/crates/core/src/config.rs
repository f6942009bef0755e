//! Scenario files: a flat TOML table whose keys are the parameter symbols
//! (`R`, `R_min`, `R_max`, `V_max`, `t_max`, `dt`, `T_w`, `a`, `b`, `c`, ...),
//! plus an optional `[[events]]` array.
//!
//! ```toml
//! R = 1.0
//! R_min = 0.6
//! R_max = 1.1
//! V_max = 5.0
//! t_max = 200.0
//! dt = 0.01
//! T_w = 10.0
//! a = 0.15
//! b = 0.15
//! c = 5
//! L = 4
//! G_r = 15.0
//! G_n = 8.0
//!
//! [[events]]
//! time = 30.0
//! kind = "remove_agents"
//! fraction = 0.3
//! ```

use std::path::Path;

use toml::{Table, Value};

use crate::control::Lattice;
use crate::error::{Error, Result};
use crate::sim::{Controller, Event, EventKind, ScenarioSpec};

/// Keys that must be present in every scenario file.
pub const REQUIRED_KEYS: &[&str] = &["R", "R_min", "R_max", "V_max", "t_max", "dt", "T_w", "a", "b", "c"];

/// Every accepted top-level key with a description of its accepted range.
pub const KEYS: &[(&str, &str)] = &[
    ("N", "integer >= 1 (number of agents)"),
    ("r", "real > 0 (m, radius of the deployment disk)"),
    ("seed", "integer >= 0"),
    ("dt", "real > 0 (s, integration step)"),
    ("t_max", "real >= 0 (s, maximum simulation time)"),
    ("T_w", "real > 0 (s, steady-state window, <= t_max)"),
    ("sigma", "real >= 0 (noise intensity)"),
    ("controller", "one of \"main-static\", \"main-adaptive\", \"baseline\""),
    ("L", "4 (square) or 6 (triangular)"),
    ("R", "real > 0 (m, desired link length)"),
    ("R_min", "real > 0 (m, minimum link length)"),
    ("R_max", "real >= R_min (m, maximum link length)"),
    ("R_s", "real > 0 or inf (m, sensing radius)"),
    ("V_max", "real > 0 (m/s, maximum speed)"),
    ("a", "real > 0"),
    ("b", "real > 0"),
    ("c", "integer >= 1"),
    ("G_r", "real >= 0 (radial gain)"),
    ("G_n", "real >= 0 (normal gain)"),
    ("orientation_offset", "real (rad)"),
    ("alpha", "real > 0 (adaptation gain)"),
    ("e_theta_star", "real in (0, 1)"),
    ("e_L_star", "real in (0, 1)"),
    ("G", "real >= 0 (baseline gravitational gain)"),
    ("F_max", "real >= 0 (baseline force saturation)"),
    ("m", "real > 0 (baseline agent mass)"),
    ("mu", "real > 0 (baseline friction)"),
    ("snapshot_times", "array of reals in [0, t_max]"),
    ("stop_at_steady_state", "boolean"),
    ("events", "array of event tables"),
];

fn describe(key: &str) -> &'static str {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, d)| *d).unwrap_or("")
}

fn bad(key: &str, got: &Value) -> Error {
    Error::Config(format!("key `{key}` = {got}: expected {}", describe(key)))
}

fn real(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        Value::String(s) if key == "R_s" && matches!(s.as_str(), "inf" | "infinity" | "Inf") => Ok(f64::INFINITY),
        other => Err(bad(key, other)),
    }
}

fn integer(key: &str, v: &Value) -> Result<i64> {
    match v {
        Value::Integer(i) => Ok(*i),
        Value::Float(f) if f.fract() == 0.0 && f.is_finite() => Ok(*f as i64),
        other => Err(bad(key, other)),
    }
}

/// Reads a scenario file and applies `KEY=VALUE` overrides on top.
pub fn load(path: &Path, overrides: &[String]) -> Result<ScenarioSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut table: Table = text
        .parse()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    from_table(&table)
}

pub fn parse_str(text: &str) -> Result<ScenarioSpec> {
    let table: Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
    from_table(&table)
}

/// Applies one `KEY=VALUE` override. The value is read as a TOML value and
/// falls back to a bare string (`controller=baseline`).
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not KEY=VALUE")))?;
    let key = key.trim();
    if !KEYS.iter().any(|(k, _)| *k == key) || key == "events" {
        return Err(Error::Config(format!("override of unknown key `{key}`")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    table.insert(key.to_string(), value);
    Ok(())
}

pub fn from_table(table: &Table) -> Result<ScenarioSpec> {
    for key in table.keys() {
        if !KEYS.iter().any(|(k, _)| k == key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
    }
    for key in REQUIRED_KEYS {
        if !table.contains_key(*key) {
            return Err(Error::Config(format!(
                "missing key `{key}`: expected {}",
                describe(key)
            )));
        }
    }

    let mut spec = ScenarioSpec::default();
    let get = |k: &str| table.get(k);
    let r = |k: &str, slot: &mut f64| -> Result<()> {
        if let Some(v) = get(k) {
            *slot = real(k, v)?;
        }
        Ok(())
    };

    if let Some(v) = get("N") {
        let n = integer("N", v)?;
        if n < 1 {
            return Err(bad("N", v));
        }
        spec.n = n as usize;
    }
    if let Some(v) = get("seed") {
        let s = integer("seed", v)?;
        if s < 0 {
            return Err(bad("seed", v));
        }
        spec.seed = s as u64;
    }
    if let Some(v) = get("c") {
        let c = integer("c", v)?;
        if c < 1 {
            return Err(bad("c", v));
        }
        spec.control.c = c as u32;
    }
    if let Some(v) = get("L") {
        let l = integer("L", v)?;
        spec.control.lattice = Lattice::from_links(l as u32).map_err(|_| bad("L", v))?;
    }
    if let Some(v) = get("controller") {
        spec.controller = v
            .as_str()
            .and_then(Controller::parse)
            .ok_or_else(|| bad("controller", v))?;
    }
    if let Some(v) = get("stop_at_steady_state") {
        spec.stop_at_steady_state = v.as_bool().ok_or_else(|| bad("stop_at_steady_state", v))?;
    }
    if let Some(v) = get("snapshot_times") {
        let arr = v.as_array().ok_or_else(|| bad("snapshot_times", v))?;
        spec.snapshot_times = arr.iter().map(|t| real("snapshot_times", t)).collect::<Result<_>>()?;
    }

    r("r", &mut spec.disk_radius)?;
    r("dt", &mut spec.dt)?;
    r("t_max", &mut spec.t_max)?;
    r("T_w", &mut spec.t_w)?;
    r("sigma", &mut spec.noise_sigma)?;
    r("R", &mut spec.control.r)?;
    spec.baseline.r = spec.control.r;
    r("R_min", &mut spec.geometry.r_min)?;
    r("R_max", &mut spec.geometry.r_max)?;
    r("R_s", &mut spec.geometry.sensing_radius)?;
    r("V_max", &mut spec.control.v_max)?;
    r("a", &mut spec.control.a)?;
    r("b", &mut spec.control.b)?;
    r("G_r", &mut spec.control.g_r)?;
    r("G_n", &mut spec.control.g_n)?;
    r("orientation_offset", &mut spec.control.orientation_offset)?;
    r("alpha", &mut spec.control.alpha)?;
    r("e_theta_star", &mut spec.control.e_theta_star)?;
    r("e_L_star", &mut spec.e_l_star)?;
    r("G", &mut spec.baseline.g)?;
    r("F_max", &mut spec.baseline.f_max)?;
    r("m", &mut spec.baseline.mass)?;
    r("mu", &mut spec.baseline.friction)?;
    spec.control.adaptive = spec.controller == Controller::MainAdaptive;

    if let Some(v) = get("events") {
        let arr = v.as_array().ok_or_else(|| bad("events", v))?;
        spec.events = arr
            .iter()
            .enumerate()
            .map(|(i, e)| parse_event(i, e))
            .collect::<Result<_>>()?;
    }

    spec.validate().map_err(|e| match e {
        Error::Usage(msg) => Error::Config(msg),
        other => other,
    })?;
    Ok(spec)
}

fn parse_event(index: usize, v: &Value) -> Result<Event> {
    let ctx = |msg: String| Error::Config(format!("events[{index}]: {msg}"));
    let t = v.as_table().ok_or_else(|| ctx("expected a table".into()))?;
    let time = t
        .get("time")
        .and_then(|x| real("time", x).ok())
        .ok_or_else(|| ctx("missing real `time`".into()))?;
    let kind = t.get("kind").and_then(Value::as_str).unwrap_or("");
    let kind = match kind {
        "remove_agents" => match (t.get("fraction"), t.get("ids")) {
            (Some(f), None) => EventKind::RemoveFraction(real("fraction", f).map_err(|_| ctx("`fraction` must be a real in (0, 1]".into()))?),
            (None, Some(Value::Array(ids))) => EventKind::RemoveIds(
                ids.iter()
                    .map(|x| x.as_integer().filter(|&i| i >= 0).map(|i| i as usize))
                    .collect::<Option<_>>()
                    .ok_or_else(|| ctx("`ids` must be non-negative integers".into()))?,
            ),
            _ => return Err(ctx("remove_agents needs exactly one of `fraction` or `ids`".into())),
        },
        "set_L" => {
            let l = t
                .get("L")
                .and_then(Value::as_integer)
                .ok_or_else(|| ctx("set_L needs integer `L`".into()))?;
            let lattice = Lattice::from_links(l as u32).map_err(|_| ctx(format!("L = {l}: expected 4 or 6")))?;
            let reset_gains = t.get("reset_gains").and_then(Value::as_bool).unwrap_or(false);
            EventKind::SetLattice { lattice, reset_gains }
        }
        other => return Err(ctx(format!("unknown kind `{other}` (expected remove_agents or set_L)"))),
    };
    Ok(Event { time, kind })
}

/// Fully resolved scenario as a table; [`from_table`] maps it back to an
/// identical spec.
pub fn to_table(spec: &ScenarioSpec) -> Table {
    let mut t = Table::new();
    let mut put = |k: &str, v: Value| {
        t.insert(k.to_string(), v);
    };
    put("N", Value::Integer(spec.n as i64));
    put("r", Value::Float(spec.disk_radius));
    put("seed", Value::Integer(spec.seed as i64));
    put("dt", Value::Float(spec.dt));
    put("t_max", Value::Float(spec.t_max));
    put("T_w", Value::Float(spec.t_w));
    put("sigma", Value::Float(spec.noise_sigma));
    put("controller", Value::String(spec.controller.as_str().into()));
    put("L", Value::Integer(spec.control.lattice.links() as i64));
    put("R", Value::Float(spec.control.r));
    put("R_min", Value::Float(spec.geometry.r_min));
    put("R_max", Value::Float(spec.geometry.r_max));
    put("R_s", Value::Float(spec.geometry.sensing_radius));
    put("V_max", Value::Float(spec.control.v_max));
    put("a", Value::Float(spec.control.a));
    put("b", Value::Float(spec.control.b));
    put("c", Value::Integer(spec.control.c as i64));
    put("G_r", Value::Float(spec.control.g_r));
    put("G_n", Value::Float(spec.control.g_n));
    put("orientation_offset", Value::Float(spec.control.orientation_offset));
    put("alpha", Value::Float(spec.control.alpha));
    put("e_theta_star", Value::Float(spec.control.e_theta_star));
    put("e_L_star", Value::Float(spec.e_l_star));
    put("G", Value::Float(spec.baseline.g));
    put("F_max", Value::Float(spec.baseline.f_max));
    put("m", Value::Float(spec.baseline.mass));
    put("mu", Value::Float(spec.baseline.friction));
    put(
        "snapshot_times",
        Value::Array(spec.snapshot_times.iter().map(|&x| Value::Float(x)).collect()),
    );
    put("stop_at_steady_state", Value::Boolean(spec.stop_at_steady_state));
    if !spec.events.is_empty() {
        put("events", Value::Array(spec.events.iter().map(event_value).collect()));
    }
    t
}

fn event_value(e: &Event) -> Value {
    let mut t = Table::new();
    t.insert("time".into(), Value::Float(e.time));
    match &e.kind {
        EventKind::RemoveFraction(f) => {
            t.insert("kind".into(), Value::String("remove_agents".into()));
            t.insert("fraction".into(), Value::Float(*f));
        }
        EventKind::RemoveIds(ids) => {
            t.insert("kind".into(), Value::String("remove_agents".into()));
            t.insert(
                "ids".into(),
                Value::Array(ids.iter().map(|&i| Value::Integer(i as i64)).collect()),
            );
        }
        EventKind::SetLattice { lattice, reset_gains } => {
            t.insert("kind".into(), Value::String("set_L".into()));
            t.insert("L".into(), Value::Integer(lattice.links() as i64));
            t.insert("reset_gains".into(), Value::Boolean(*reset_gains));
        }
    }
    Value::Table(t)
}

pub fn to_toml_string(spec: &ScenarioSpec) -> String {
    toml::to_string(&to_table(spec)).expect("scenario tables always serialise")
}

/// Compact one-line rendering of an event list, used in CSV rows.
pub fn events_summary(events: &[Event]) -> String {
    events
        .iter()
        .map(|e| match &e.kind {
            EventKind::RemoveFraction(f) => format!("{}:remove:{}", e.time, f),
            EventKind::RemoveIds(ids) => format!(
                "{}:remove_ids:{}",
                e.time,
                ids.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
            ),
            EventKind::SetLattice { lattice, reset_gains } => format!(
                "{}:set_L:{}{}",
                e.time,
                lattice.links(),
                if *reset_gains { ":reset" } else { "" }
            ),
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Scalar scenario fields in a fixed column order, as printed in per-trial CSVs.
pub fn spec_columns(spec: &ScenarioSpec) -> Vec<(&'static str, String)> {
    vec![
        ("N", spec.n.to_string()),
        ("r", spec.disk_radius.to_string()),
        ("seed", spec.seed.to_string()),
        ("dt", spec.dt.to_string()),
        ("t_max", spec.t_max.to_string()),
        ("T_w", spec.t_w.to_string()),
        ("sigma", spec.noise_sigma.to_string()),
        ("controller", spec.controller.as_str().to_string()),
        ("L", spec.control.lattice.links().to_string()),
        ("R", spec.control.r.to_string()),
        ("R_min", spec.geometry.r_min.to_string()),
        ("R_max", spec.geometry.r_max.to_string()),
        ("R_s", spec.geometry.sensing_radius.to_string()),
        ("V_max", spec.control.v_max.to_string()),
        ("a", spec.control.a.to_string()),
        ("b", spec.control.b.to_string()),
        ("c", spec.control.c.to_string()),
        ("G_r", spec.control.g_r.to_string()),
        ("G_n", spec.control.g_n.to_string()),
        ("orientation_offset", spec.control.orientation_offset.to_string()),
        ("alpha", spec.control.alpha.to_string()),
        ("e_theta_star", spec.control.e_theta_star.to_string()),
        ("e_L_star", spec.e_l_star.to_string()),
        ("G", spec.baseline.g.to_string()),
        ("F_max", spec.baseline.f_max.to_string()),
        ("m", spec.baseline.mass.to_string()),
        ("mu", spec.baseline.friction.to_string()),
        ("events", events_summary(&spec.events)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE2: &str = r#"
R = 1.0
R_min = 0.6
R_max = 1.1
V_max = 5.0
t_max = 200.0
dt = 0.01
T_w = 10.0
a = 0.15
b = 0.15
c = 5
"#;

    #[test]
    fn table_two_defaults_parse() {
        let spec = parse_str(TABLE2).unwrap();
        assert_eq!(spec, {
            let mut d = ScenarioSpec::default();
            d.control.adaptive = false;
            d
        });
    }

    #[test]
    fn missing_key_is_named_with_range() {
        let text = TABLE2.replace("R_min = 0.6\n", "");
        let err = parse_str(&text).unwrap_err().to_string();
        assert!(err.contains("R_min") && err.contains("real > 0"), "{err}");
    }

    #[test]
    fn unknown_and_malformed_keys() {
        let err = parse_str(&format!("{TABLE2}\nG_x = 1.0")).unwrap_err().to_string();
        assert!(err.contains("G_x"), "{err}");
        let err = parse_str(&format!("{TABLE2}\nL = 5")).unwrap_err().to_string();
        assert!(err.contains("`L`"), "{err}");
        let err = parse_str(&format!("{TABLE2}\ncontroller = \"pid\"")).unwrap_err().to_string();
        assert!(err.contains("controller"), "{err}");
        let err = parse_str(&TABLE2.replace("R_max = 1.1", "R_max = 0.5")).unwrap_err().to_string();
        assert!(err.contains("R_max"), "{err}");
    }

    #[test]
    fn overrides_win() {
        let mut table: Table = TABLE2.parse().unwrap();
        for o in ["L=6", "G_r=22", "G_n=1", "controller=baseline", "R_s=inf", "sigma = 0.1"] {
            apply_override(&mut table, o).unwrap();
        }
        let spec = from_table(&table).unwrap();
        assert_eq!(spec.control.lattice, Lattice::Triangular);
        assert_eq!((spec.control.g_r, spec.control.g_n), (22.0, 1.0));
        assert_eq!(spec.controller, Controller::Baseline);
        assert_eq!(spec.geometry.sensing_radius, f64::INFINITY);
        assert_eq!(spec.noise_sigma, 0.1);
        assert!(apply_override(&mut table, "nope=1").is_err());
        assert!(apply_override(&mut table, "L").is_err());
    }

    #[test]
    fn events_parse() {
        let text = format!(
            "{TABLE2}\n[[events]]\ntime = 30.0\nkind = \"remove_agents\"\nfraction = 0.3\n\n\
             [[events]]\ntime = 60\nkind = \"set_L\"\nL = 6\nreset_gains = true\n"
        );
        let spec = parse_str(&text).unwrap();
        assert_eq!(
            spec.events,
            vec![
                Event { time: 30.0, kind: EventKind::RemoveFraction(0.3) },
                Event { time: 60.0, kind: EventKind::SetLattice { lattice: Lattice::Triangular, reset_gains: true } },
            ]
        );
        let bad = format!("{TABLE2}\n[[events]]\ntime = 1.0\nkind = \"explode\"\n");
        assert!(parse_str(&bad).unwrap_err().to_string().contains("explode"));
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut spec = parse_str(TABLE2).unwrap();
        spec.controller = Controller::MainAdaptive;
        spec.control.adaptive = true;
        spec.control.orientation_offset = 0.1 + 0.2;
        spec.noise_sigma = 1.0 / 3.0;
        spec.events = vec![
            Event { time: 30.0, kind: EventKind::RemoveIds(vec![1, 5]) },
            Event { time: 31.5, kind: EventKind::SetLattice { lattice: Lattice::Triangular, reset_gains: true } },
        ];
        let text = to_toml_string(&spec);
        assert_eq!(parse_str(&text).unwrap(), spec);
        let mut inf = spec.clone();
        inf.geometry.sensing_radius = f64::INFINITY;
        assert_eq!(parse_str(&to_toml_string(&inf)).unwrap(), inf);
    }
}
