//! Scenario files: TOML with strict keys and full-scale plant defaults.
//!
//! A scenario names a network file and may patch individual network
//! elements by name:
//!
//! ```toml
//! [network]
//! file = "kundur_two_area.net"
//! [network.patch.t1]
//! residual_flux = [1.0, -1.0, 1.0]
//! ```
//!
//! Every unknown key anywhere in the scenario or its patches is reported
//! together with all semantic violations. Keys left out take their default
//! values, each of which is logged at `info` level.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::em::PerUnitBase;
use crate::engine::{EventKind, MetricWindow, ScenarioEvent, WpgParams, DT_RANGE};
use crate::error::{Error, Result};
use crate::network::{LineDesc, LoadDesc, NetworkDesc, TransformerDesc};

/// Networks shipped with the crate, addressable by file name.
pub const BUNDLED_NETWORKS: &[(&str, &str)] =
    &[("kundur_two_area.net", include_str!("../../scenarios/kundur_two_area.net"))];

/// Scenarios shipped with the crate, addressable by file name.
pub const BUNDLED_SCENARIOS: &[(&str, &str)] = &[
    ("loadstep_bus9.scn", include_str!("../../scenarios/loadstep_bus9.scn")),
    ("energize_fault_bus5.scn", include_str!("../../scenarios/energize_fault_bus5.scn")),
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    /// Network file, relative to the scenario file or a bundled name.
    pub file: String,
    /// Per-element overrides keyed by element name.
    pub patch: BTreeMap<String, Table>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecorderConfig {
    pub decimation: u64,
    pub buses: Vec<u32>,
}

impl Default for RecorderConfig {
    fn default() -> Self {
        Self {
            decimation: 10,
            buses: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub window: Vec<MetricWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub name: String,
    pub dt: f64,
    pub t_end: f64,
    pub base: PerUnitBase,
    pub network: NetworkSection,
    pub wpg: Vec<WpgParams>,
    pub event: Vec<ScenarioEvent>,
    pub recorder: RecorderConfig,
    pub metrics: MetricsConfig,
    /// Network after file loading and patching; filled in by the loader.
    pub resolved_network: Option<NetworkDesc>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: String::new(),
            dt: 10e-6,
            t_end: 4.0,
            base: PerUnitBase::default(),
            network: NetworkSection::default(),
            wpg: Vec::new(),
            event: Vec::new(),
            recorder: RecorderConfig::default(),
            metrics: MetricsConfig::default(),
            resolved_network: None,
        }
    }
}

fn example_events() -> Vec<ScenarioEvent> {
    let kinds = [
        EventKind::LoadStep {
            load: String::new(),
            connect: true,
        },
        EventKind::FaultOn { bus: 0, r_on: 1e-4 },
        EventKind::FaultOff { bus: 0 },
        EventKind::BreakerClose { branch: String::new() },
        EventKind::BreakerOpen { branch: String::new() },
        EventKind::SetpointChange {
            wpg: String::new(),
            p_in_mw: 0.0,
        },
    ];
    kinds.into_iter().map(|kind| ScenarioEvent { time: 0.0, kind }).collect()
}

fn to_value<T: Serialize>(x: &T) -> Value {
    Value::try_from(x).expect("config types serialize to TOML")
}

/// Reference tree: defaults with one example of every array element.
fn schema() -> Value {
    let mut cfg = ScenarioConfig::default();
    cfg.wpg.push(WpgParams::default());
    cfg.metrics.window.push(MetricWindow {
        name: String::new(),
        start: 0.0,
        end: 0.0,
    });
    let mut v = to_value(&cfg);
    if let Value::Table(t) = &mut v {
        t.remove("resolved_network");
        t.remove("event");
    }
    v
}

struct Walk<'a> {
    errors: &'a mut Vec<String>,
    defaults: &'a mut Vec<String>,
}

impl Walk<'_> {
    fn check(&mut self, path: &str, raw: &Value, schema: &Value) {
        match (raw, schema) {
            (Value::Table(r), Value::Table(s)) => {
                for (k, v) in r {
                    let p = join(path, k);
                    if p == "network.patch" {
                        // checked against the patched element when the network is resolved
                        continue;
                    }
                    match s.get(k) {
                        Some(sv) => self.check(&p, v, sv),
                        None => self.errors.push(format!("unknown key `{p}`")),
                    }
                }
                for (k, v) in s {
                    if !r.contains_key(k) {
                        self.defaults.push(format!("{} = {v}", join(path, k)));
                    }
                }
            }
            (Value::Array(r), Value::Array(s)) => {
                if let Some(example @ Value::Table(_)) = s.first() {
                    for (i, item) in r.iter().enumerate() {
                        self.check(&format!("{path}[{i}]"), item, example);
                    }
                }
            }
            _ => {}
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn check_events(raw: &Value, walk: &mut Walk<'_>) {
    let Value::Array(items) = raw else {
        walk.errors.push("`event` must be an array of tables".into());
        return;
    };
    let examples: Vec<Value> = example_events().iter().map(to_value).collect();
    for (i, item) in items.iter().enumerate() {
        let p = format!("event[{i}]");
        let kind = item.get("kind").and_then(Value::as_str);
        let Some(kind) = kind else {
            walk.errors.push(format!("`{p}.kind` is missing"));
            continue;
        };
        match examples.iter().find(|e| e.get("kind").and_then(Value::as_str) == Some(kind)) {
            Some(example) => walk.check(&p, item, example),
            None => walk.errors.push(format!("`{p}.kind`: unknown event kind {kind:?}")),
        }
    }
}

/// Parses scenario text. `dir` resolves a relative network file.
pub fn parse_config(text: &str, dir: Option<&Path>) -> Result<ScenarioConfig> {
    let raw: Table = toml::from_str(text)?;
    let mut errors = Vec::new();
    let mut defaults = Vec::new();
    let mut walk = Walk {
        errors: &mut errors,
        defaults: &mut defaults,
    };
    let mut raw_main = raw.clone();
    let raw_events = raw_main.remove("event");
    walk.check("", &Value::Table(raw_main), &schema());
    if let Some(ev) = &raw_events {
        check_events(ev, &mut walk);
    }
    if raw.contains_key("resolved_network") {
        errors.push("`resolved_network` is produced by the loader and may not be set".into());
    }
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    for d in &defaults {
        log::info!("default {d}");
    }
    let mut cfg: ScenarioConfig = Value::Table(raw).try_into().map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
    let net = resolve_network(&cfg.network, dir, &mut errors);
    cfg.resolved_network = net;
    errors.extend(validate(&cfg));
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errors))
    }
}

/// Reads and validates a scenario file; bundled scenario names are accepted
/// when no such file exists.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        return parse_config(&text, path.parent());
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    match BUNDLED_SCENARIOS.iter().find(|(n, _)| *n == name) {
        Some((_, text)) => parse_config(text, None),
        None => Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("scenario {} not found", path.display()),
        ))),
    }
}

pub fn bundled_scenario(name: &str) -> Result<ScenarioConfig> {
    let (_, text) = BUNDLED_SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Config(vec![format!("no bundled scenario {name:?}")]))?;
    parse_config(text, None)
}

fn network_text(file: &str, dir: Option<&Path>) -> std::result::Result<String, String> {
    if file.is_empty() {
        return Err("`network.file` is required".into());
    }
    let candidates: Vec<PathBuf> = match dir {
        Some(d) => vec![d.join(file), PathBuf::from(file)],
        None => vec![PathBuf::from(file)],
    };
    for c in candidates {
        if c.is_file() {
            return std::fs::read_to_string(&c).map_err(|e| format!("reading {}: {e}", c.display()));
        }
    }
    BUNDLED_NETWORKS
        .iter()
        .find(|(n, _)| *n == file)
        .map(|(_, t)| t.to_string())
        .ok_or_else(|| format!("network file {file:?} not found"))
}

fn resolve_network(sec: &NetworkSection, dir: Option<&Path>, errors: &mut Vec<String>) -> Option<NetworkDesc> {
    let text = match network_text(&sec.file, dir) {
        Ok(t) => t,
        Err(e) => {
            errors.push(e);
            return None;
        }
    };
    let mut raw: Table = match toml::from_str(&text) {
        Ok(t) => t,
        Err(e) => {
            errors.push(format!("network file: {e}"));
            return None;
        }
    };
    let line = to_value(&LineDesc::default());
    let transformer = to_value(&TransformerDesc::default());
    let load = to_value(&LoadDesc::default());
    let net_schema = {
        let mut t = Table::new();
        t.insert("buses".into(), Value::Array(vec![]));
        t.insert("lines".into(), Value::Array(vec![line.clone()]));
        t.insert("transformers".into(), Value::Array(vec![transformer.clone()]));
        t.insert("loads".into(), Value::Array(vec![load.clone()]));
        Value::Table(t)
    };
    let mut silent = Vec::new();
    Walk {
        errors,
        defaults: &mut silent,
    }
    .check("network file", &Value::Table(raw.clone()), &net_schema);

    for (name, fields) in &sec.patch {
        let mut found = false;
        for (section, example) in [("lines", &line), ("transformers", &transformer), ("loads", &load)] {
            let Some(Value::Array(items)) = raw.get_mut(section) else { continue };
            for item in items.iter_mut() {
                if item.get("name").and_then(Value::as_str) != Some(name.as_str()) {
                    continue;
                }
                found = true;
                let mut dummy = Vec::new();
                Walk {
                    errors,
                    defaults: &mut dummy,
                }
                .check(&format!("network.patch.{name}"), &Value::Table(fields.clone()), example);
                if let Value::Table(t) = item {
                    for (k, v) in fields {
                        t.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        if !found {
            errors.push(format!("network.patch.{name}: no network element named {name:?}"));
        }
    }
    match Value::Table(raw).try_into::<NetworkDesc>() {
        Ok(d) => Some(d),
        Err(e) => {
            errors.push(format!("network: {e}"));
            None
        }
    }
}

/// Semantic checks across the whole scenario.
pub fn validate(cfg: &ScenarioConfig) -> Vec<String> {
    let mut errs = cfg.base.validate();
    if !(DT_RANGE.0..=DT_RANGE.1).contains(&cfg.dt) {
        errs.push(format!("dt = {} outside [{}, {}] s", cfg.dt, DT_RANGE.0, DT_RANGE.1));
    }
    if !(cfg.t_end > 0.0 && cfg.t_end.is_finite()) {
        errs.push("t_end must be > 0".into());
    }
    if cfg.recorder.decimation == 0 {
        errs.push("recorder.decimation must be >= 1".into());
    }
    for (i, w) in cfg.metrics.window.iter().enumerate() {
        if !(w.end >= w.start) || w.name.is_empty() {
            errs.push(format!("metrics.window[{i}]: needs a name and end >= start"));
        }
    }
    let Some(net) = &cfg.resolved_network else {
        return errs;
    };
    errs.extend(net.validate());
    let has_bus = |b: u32| net.buses.contains(&b);
    let mut names = std::collections::BTreeSet::new();
    let mut wpg_buses = std::collections::BTreeSet::new();
    for (i, w) in cfg.wpg.iter().enumerate() {
        let p = format!("wpg[{i}]");
        errs.extend(w.validate(&p));
        if !has_bus(w.bus) {
            errs.push(format!("{p}.bus: unknown bus {}", w.bus));
        }
        if !names.insert(w.name.clone()) {
            errs.push(format!("{p}.name: duplicate wpg name {:?}", w.name));
        }
        if !wpg_buses.insert(w.bus) {
            errs.push(format!("{p}.bus: bus {} already hosts a wpg", w.bus));
        }
    }
    for b in &cfg.recorder.buses {
        if !has_bus(*b) {
            errs.push(format!("recorder.buses: unknown bus {b}"));
        }
    }
    let mut faulted: std::collections::BTreeSet<u32> = Default::default();
    let mut events: Vec<&ScenarioEvent> = cfg.event.iter().collect();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    for (i, e) in cfg.event.iter().enumerate() {
        let p = format!("event[{i}]");
        if !(e.time >= 0.0 && e.time.is_finite()) {
            errs.push(format!("{p}.time must be finite and >= 0"));
        }
        match &e.kind {
            EventKind::LoadStep { load, .. } => {
                if !net.loads.iter().any(|l| &l.name == load) {
                    errs.push(format!("{p}: no load named {load:?}"));
                }
            }
            EventKind::FaultOn { bus, r_on } => {
                if !has_bus(*bus) {
                    errs.push(format!("{p}: unknown bus {bus}"));
                }
                if !(*r_on > 0.0) {
                    errs.push(format!("{p}.r_on must be > 0"));
                }
            }
            EventKind::FaultOff { bus } => {
                if !has_bus(*bus) {
                    errs.push(format!("{p}: unknown bus {bus}"));
                }
            }
            EventKind::BreakerClose { branch } | EventKind::BreakerOpen { branch } => {
                let known = net.lines.iter().any(|l| &l.name == branch)
                    || net.transformers.iter().any(|t| &t.name == branch);
                if !known {
                    errs.push(format!("{p}: no line or transformer named {branch:?}"));
                }
            }
            EventKind::SetpointChange { wpg, p_in_mw } => {
                if !cfg.wpg.iter().any(|w| &w.name == wpg) {
                    errs.push(format!("{p}: no wpg named {wpg:?}"));
                }
                if !(*p_in_mw >= 0.0) {
                    errs.push(format!("{p}.p_in_mw must be >= 0"));
                }
            }
        }
    }
    for e in events {
        match &e.kind {
            EventKind::FaultOn { bus, .. } => {
                faulted.insert(*bus);
            }
            EventKind::FaultOff { bus } => {
                if !faulted.remove(bus) {
                    errs.push(format!("fault_off at bus {bus} (t = {}) has no preceding fault_on", e.time));
                }
            }
            _ => {}
        }
    }
    errs
}

impl ScenarioConfig {
    /// Configuration with every default filled in, as TOML that loads back
    /// to the same config. The resolved network is left out since the loader
    /// rebuilds it from `network`; `metrics.json` carries it in full.
    pub fn to_toml(&self) -> Result<String> {
        let cfg = Self {
            resolved_network: None,
            ..self.clone()
        };
        toml::to_string(&cfg).map_err(|e| Error::Config(vec![format!("serializing config: {e}")]))
    }

    /// Sets every WPG to `kind`.
    pub fn set_controller(&mut self, kind: crate::engine::ControllerKind) {
        for w in &mut self.wpg {
            w.controller = kind;
        }
    }
}
