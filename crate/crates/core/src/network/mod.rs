//! Three-phase EMT model of the transmission grid.
//!
//! Every bus contributes three phase nodes; every inverter port adds one
//! floating node for the bridge negative rail. Lines are π sections with
//! series R-L and lumped charging capacitance, transformers are a series
//! leakage branch plus a saturable magnetizing branch and core-loss
//! resistance at the low-voltage bus, loads are constant-impedance R‖L‖C
//! shunts. All branches are discretized with trapezoidal companion models
//! and solved as one dense nodal system each step.

mod elements;
mod phasor;
mod solver;

use serde::{Deserialize, Serialize};

use crate::em::ThreePhase;
use crate::error::{Error, Result};

pub use phasor::{Phasor, SteadyState};
pub use elements::{apply_fault, magnetizing_current, FaultElement, MagnetizingCurve, TIME_EPS};

/// Series R-L branch with optional π charging; `b` is the total susceptance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineDesc {
    #[serde(default)]
    pub name: String,
    pub from: u32,
    pub to: u32,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default = "yes")]
    pub closed: bool,
}

/// Two-winding transformer, unity ratio in per-unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerDesc {
    #[serde(default)]
    pub name: String,
    pub lv_bus: u32,
    pub hv_bus: u32,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub magnetizing: MagnetizingCurve,
    /// Core-loss resistance across the magnetizing branch; zero disables it.
    #[serde(default = "default_r_core")]
    pub r_core: f64,
    #[serde(default)]
    pub residual_flux: [f64; 3],
    #[serde(default = "yes")]
    pub closed: bool,
}

/// Constant-impedance load specified at 1 p.u. voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadDesc {
    #[serde(default)]
    pub name: String,
    pub bus: u32,
    #[serde(default)]
    pub p_mw: f64,
    #[serde(default)]
    pub q_ind_mvar: f64,
    #[serde(default)]
    pub q_cap_mvar: f64,
    #[serde(default = "yes")]
    pub in_service: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDesc {
    #[serde(default)]
    pub buses: Vec<u32>,
    #[serde(default)]
    pub lines: Vec<LineDesc>,
    #[serde(default)]
    pub transformers: Vec<TransformerDesc>,
    #[serde(default)]
    pub loads: Vec<LoadDesc>,
}

fn yes() -> bool {
    true
}

fn default_r_core() -> f64 {
    500.0
}

impl Default for LineDesc {
    fn default() -> Self {
        Self {
            name: String::new(),
            from: 0,
            to: 0,
            r: 0.0,
            x: 0.0,
            b: 0.0,
            closed: true,
        }
    }
}

impl Default for TransformerDesc {
    fn default() -> Self {
        Self {
            name: String::new(),
            lv_bus: 0,
            hv_bus: 0,
            r: 0.003,
            x: 0.148,
            magnetizing: MagnetizingCurve::default(),
            r_core: default_r_core(),
            residual_flux: [0.0; 3],
            closed: true,
        }
    }
}

impl Default for LoadDesc {
    fn default() -> Self {
        Self {
            name: String::new(),
            bus: 0,
            p_mw: 0.0,
            q_ind_mvar: 0.0,
            q_cap_mvar: 0.0,
            in_service: true,
        }
    }
}

impl NetworkDesc {
    /// Collects every topology and parameter violation.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for b in &self.buses {
            if !seen.insert(*b) {
                errs.push(format!("network.buses: duplicate bus {b}"));
            }
        }
        let known = |b: u32, what: String, errs: &mut Vec<String>| {
            if !seen.contains(&b) {
                errs.push(format!("{what}: unknown bus {b}"));
            }
        };
        for (i, l) in self.lines.iter().enumerate() {
            let p = format!("network.lines[{i}]");
            known(l.from, p.clone(), &mut errs);
            known(l.to, p.clone(), &mut errs);
            if l.from == l.to {
                errs.push(format!("{p}: from and to are the same bus"));
            }
            if !(l.r >= 0.0 && l.r.is_finite()) {
                errs.push(format!("{p}.r must be finite and >= 0"));
            }
            if !(l.x > 0.0 && l.x.is_finite()) {
                errs.push(format!("{p}.x must be > 0"));
            }
            if !(l.b >= 0.0 && l.b.is_finite()) {
                errs.push(format!("{p}.b must be finite and >= 0"));
            }
        }
        for (i, t) in self.transformers.iter().enumerate() {
            let p = format!("network.transformers[{i}]");
            known(t.lv_bus, p.clone(), &mut errs);
            known(t.hv_bus, p.clone(), &mut errs);
            if t.lv_bus == t.hv_bus {
                errs.push(format!("{p}: lv_bus and hv_bus are the same bus"));
            }
            if !(t.r >= 0.0 && t.r.is_finite()) {
                errs.push(format!("{p}.r must be finite and >= 0"));
            }
            if !(t.x > 0.0 && t.x.is_finite()) {
                errs.push(format!("{p}.x must be > 0"));
            }
            if !(t.r_core >= 0.0 && t.r_core.is_finite()) {
                errs.push(format!("{p}.r_core must be finite and >= 0"));
            }
            if t.residual_flux.iter().any(|v| !v.is_finite()) {
                errs.push(format!("{p}.residual_flux must be finite"));
            }
            errs.extend(t.magnetizing.validate(&format!("{p}.magnetizing")));
        }
        for (i, l) in self.loads.iter().enumerate() {
            let p = format!("network.loads[{i}]");
            known(l.bus, p.clone(), &mut errs);
            for (n, v) in [("p_mw", l.p_mw), ("q_ind_mvar", l.q_ind_mvar), ("q_cap_mvar", l.q_cap_mvar)] {
                if !(v >= 0.0 && v.is_finite()) {
                    errs.push(format!("{p}.{n} must be finite and >= 0"));
                }
            }
        }
        let mut names = std::collections::BTreeSet::new();
        let all_names = self
            .lines
            .iter()
            .map(|l| &l.name)
            .chain(self.transformers.iter().map(|t| &t.name))
            .chain(self.loads.iter().map(|l| &l.name));
        for n in all_names.filter(|n| !n.is_empty()) {
            if !names.insert(n.clone()) {
                errs.push(format!("network: duplicate element name {n:?}"));
            }
        }
        errs
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LineState {
    pub i: ThreePhase,
    /// Charging currents at the from and to ends.
    pub i_cf: ThreePhase,
    pub i_ct: ThreePhase,
    pub closed: bool,
    /// Switched in during the previous event; the next step starts without history.
    pub fresh: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformerState {
    /// Leakage current, LV to HV.
    pub i: ThreePhase,
    /// Magnetizing flux linkage.
    pub psi: ThreePhase,
    pub i_mag: ThreePhase,
    pub i_core: ThreePhase,
    pub segment: [i8; 3],
    pub closed: bool,
    pub fresh: bool,
}

impl TransformerState {
    /// Current drawn from the LV bus.
    pub fn i_lv(&self) -> ThreePhase {
        self.i + self.i_mag + self.i_core
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadState {
    pub i_r: ThreePhase,
    pub i_l: ThreePhase,
    pub i_c: ThreePhase,
    pub in_service: bool,
    pub fresh: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    /// Node voltages: three per bus in bus order, then one per port.
    pub v: Vec<f64>,
    pub lines: Vec<LineState>,
    pub transformers: Vec<TransformerState>,
    pub loads: Vec<LoadState>,
    pub faults: Vec<FaultElement>,
    /// Largest nodal current imbalance after the last solve.
    pub kcl_residual: f64,
}

/// The grid, its state, and a cached factorization of the nodal matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    desc: NetworkDesc,
    omega: f64,
    s_base: f64,
    bus_ids: Vec<u32>,
    port_buses: Vec<usize>,
    pub state: NetworkState,
    #[serde(skip)]
    cache: Option<solver::Factor>,
}

impl Network {
    /// Builds the network at rest, transformer cores holding their residual flux.
    pub fn new(desc: NetworkDesc, f_nom: f64, s_base: f64) -> Result<Self> {
        let mut errs = desc.validate();
        if !(f_nom > 0.0 && s_base > 0.0) {
            errs.push("network: frequency and power base must be > 0".into());
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let mut bus_ids = desc.buses.clone();
        bus_ids.sort_unstable();
        let state = NetworkState {
            v: vec![0.0; 3 * bus_ids.len()],
            lines: desc
                .lines
                .iter()
                .map(|l| LineState {
                    closed: l.closed,
                    ..Default::default()
                })
                .collect(),
            transformers: desc
                .transformers
                .iter()
                .map(|t| {
                    let psi = ThreePhase::from_array(t.residual_flux);
                    TransformerState {
                        psi,
                        i_mag: psi.map(|p| t.magnetizing.current(p)),
                        segment: psi.to_array().map(|p| t.magnetizing.segment(p)),
                        closed: t.closed,
                        ..Default::default()
                    }
                })
                .collect(),
            loads: desc
                .loads
                .iter()
                .map(|l| LoadState {
                    in_service: l.in_service,
                    ..Default::default()
                })
                .collect(),
            faults: Vec::new(),
            kcl_residual: 0.0,
        };
        Ok(Self {
            desc,
            omega: std::f64::consts::TAU * f_nom,
            s_base,
            bus_ids,
            port_buses: Vec::new(),
            state,
            cache: None,
        })
    }

    pub fn desc(&self) -> &NetworkDesc {
        &self.desc
    }

    pub fn bus_index(&self, bus: u32) -> Result<usize> {
        self.bus_ids
            .binary_search(&bus)
            .map_err(|_| Error::Config(vec![format!("unknown bus {bus}")]))
    }

    /// Adds an inverter port at `bus` and returns its index.
    pub fn add_port(&mut self, bus: u32) -> Result<usize> {
        let idx = self.bus_index(bus)?;
        self.port_buses.push(idx);
        self.state.v.push(0.0);
        self.cache = None;
        Ok(self.port_buses.len() - 1)
    }

    pub fn n_ports(&self) -> usize {
        self.port_buses.len()
    }

    pub fn bus_voltage(&self, bus: u32) -> Result<ThreePhase> {
        let i = self.bus_index(bus)?;
        Ok(self.node_voltages(i))
    }

    fn node_voltages(&self, bus_idx: usize) -> ThreePhase {
        let v = &self.state.v;
        ThreePhase::new(v[3 * bus_idx], v[3 * bus_idx + 1], v[3 * bus_idx + 2])
    }

    /// PCC phase voltages and bridge-neutral voltage of a port.
    pub fn port_voltages(&self, port: usize) -> (ThreePhase, f64) {
        let pcc = self.node_voltages(self.port_buses[port]);
        (pcc, self.state.v[3 * self.bus_ids.len() + port])
    }

    /// Seeds node voltages, e.g. to start from a known operating point.
    pub fn set_bus_voltage(&mut self, bus: u32, v: ThreePhase) -> Result<()> {
        let i = self.bus_index(bus)?;
        for ph in 0..3 {
            self.state.v[3 * i + ph] = v[ph];
        }
        Ok(())
    }

    pub fn set_port_neutral(&mut self, port: usize, v: f64) {
        let n = 3 * self.bus_ids.len() + port;
        self.state.v[n] = v;
    }

    /// Opens or closes the line or transformer called `name`.
    pub fn set_breaker(&mut self, name: &str, closed: bool) -> Result<()> {
        if let Some(i) = self.desc.lines.iter().position(|l| l.name == name) {
            let s = &mut self.state.lines[i];
            if s.closed != closed {
                *s = LineState {
                    closed,
                    fresh: closed,
                    ..Default::default()
                };
            }
            return Ok(());
        }
        if let Some(i) = self.desc.transformers.iter().position(|t| t.name == name) {
            let s = &mut self.state.transformers[i];
            if s.closed != closed {
                s.closed = closed;
                s.fresh = closed;
                s.i = ThreePhase::ZERO;
            }
            return Ok(());
        }
        Err(Error::Config(vec![format!("no line or transformer named {name:?}")]))
    }

    pub fn set_load(&mut self, name: &str, in_service: bool) -> Result<()> {
        let i = self
            .desc
            .loads
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| Error::Config(vec![format!("no load named {name:?}")]))?;
        let s = &mut self.state.loads[i];
        if s.in_service != in_service {
            *s = LoadState {
                in_service,
                fresh: in_service,
                ..Default::default()
            };
        }
        Ok(())
    }

    pub fn add_fault(&mut self, fault: FaultElement) -> Result<()> {
        let errs = fault.validate("fault");
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        self.bus_index(fault.bus)?;
        self.state.faults.push(fault);
        Ok(())
    }

    /// Connects or removes every fault according to its window at time `t`.
    pub fn apply_faults(&mut self, t: f64) {
        for f in &mut self.state.faults {
            *f = apply_fault(f, t);
        }
    }

    /// Connects or removes the fault at `bus`, creating it on first use.
    pub fn set_fault(&mut self, bus: u32, r_on: f64, active: bool, t: f64) -> Result<()> {
        if let Some(f) = self.state.faults.iter_mut().find(|f| f.bus == bus) {
            f.active = active;
            if active {
                f.closed = [true; 3];
                f.r_on = r_on;
                f.t_on = t;
                f.t_off = f64::MAX;
            } else {
                f.t_off = t;
            }
            return Ok(());
        }
        if !active {
            return Err(Error::Config(vec![format!("fault_off at bus {bus} without a fault")]));
        }
        self.add_fault(FaultElement {
            active: true,
            closed: [true; 3],
            ..FaultElement::new(bus, r_on, t, f64::MAX)
        })
    }

    /// Buses reachable from `roots` through closed lines and transformers.
    pub fn connected_buses(&self, roots: &[u32]) -> Vec<u32> {
        let mut seen: std::collections::BTreeSet<u32> = roots.iter().copied().collect();
        let mut stack: Vec<u32> = roots.to_vec();
        let edges: Vec<(u32, u32)> = self
            .desc
            .lines
            .iter()
            .zip(&self.state.lines)
            .filter(|(_, s)| s.closed)
            .map(|(d, _)| (d.from, d.to))
            .chain(
                self.desc
                    .transformers
                    .iter()
                    .zip(&self.state.transformers)
                    .filter(|(_, s)| s.closed)
                    .map(|(d, _)| (d.lv_bus, d.hv_bus)),
            )
            .collect();
        while let Some(b) = stack.pop() {
            for &(x, y) in &edges {
                let other = if x == b { y } else if y == b { x } else { continue };
                if seen.insert(other) {
                    stack.push(other);
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Residual flux of the transformer whose LV winding sits at `bus`.
    pub fn transformer_flux_at(&self, bus: u32) -> Option<ThreePhase> {
        self.desc
            .transformers
            .iter()
            .zip(&self.state.transformers)
            .find(|(d, _)| d.lv_bus == bus)
            .map(|(_, s)| s.psi)
    }

    pub fn transformer_count(&self) -> usize {
        self.desc.transformers.len()
    }

    pub fn transformer_index(&self, name: &str) -> Option<usize> {
        self.desc.transformers.iter().position(|t| t.name == name)
    }

    /// Advances the network one step. `ports` carries one stamp per added
    /// port; `sources` imposes ideal phase voltages at the listed buses.
    pub fn step(&mut self, dt: f64, ports: &[crate::inverter::PortStamp], sources: &[(u32, ThreePhase)]) -> Result<()> {
        solver::step(self, dt, ports, sources)
    }
}

/// Free-function form of [`Network::step`].
pub fn network_step(
    net: &mut Network,
    ports: &[crate::inverter::PortStamp],
    sources: &[(u32, ThreePhase)],
    dt: f64,
) -> Result<()> {
    net.step(dt, ports, sources)
}
