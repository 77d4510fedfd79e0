//! Fixed-step simulation engine.
//!
//! Each step advances from `t_k = k * dt` to `t_{k+1}` in a fixed order:
//!
//! 1. fire events scheduled for step `k`;
//! 2. per WPG, sample the measurements committed at `t_k` (the controllers
//!    therefore act on values one step old), update the switching strategy,
//!    run the active controller, form the inverter companion with the present
//!    DC voltage, then advance machine side, governor, boost and DC link with
//!    the inverter draw committed at `t_k`;
//! 3. solve the network with every inverter port and commit the inverters;
//! 4. collect metrics and, every `decimation` steps, record a row.
//!
//! Time is always computed as `k * dt`, never accumulated.

pub mod events;
mod init;
pub mod metrics;
pub mod recorder;
pub mod wpg;

use serde::{Deserialize, Serialize};

use crate::em::{PerUnitBase, ThreePhase};
use crate::error::{Error, Result};
use crate::network::Network;

pub use events::{event_step, EventKind, FiredEvent, ScenarioEvent};
pub use metrics::{max_between, value_at, MetricWindow, Metrics, Sample, TransformerMetrics, WpgMetrics};
pub use recorder::Recorder;
pub use wpg::{ControllerKind, ControllerState, GovernorGains, StartMode, StorageParams, Wpg, WpgParams};

use events::Scheduled;
use metrics::Collectors;

/// Inclusive bounds on the step size.
pub const DT_RANGE: (f64, f64) = (1e-6, 100e-6);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub dt: f64,
    pub decimation: u64,
    /// Buses whose phase voltages are recorded.
    pub record_buses: Vec<u32>,
    pub windows: Vec<MetricWindow>,
}

/// Complete simulation state; serializing and resuming continues the run
/// bit for bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Simulation {
    pub base: PerUnitBase,
    pub dt: f64,
    pub step: u64,
    /// Reserved; no model draws random numbers.
    pub seed: u64,
    pub network: Network,
    pub wpgs: Vec<Wpg>,
    events: Vec<Scheduled>,
    pub fired: Vec<FiredEvent>,
    pub recorder: Recorder,
    collectors: Collectors,
    record_buses: Vec<u32>,
}

impl Simulation {
    pub fn new(
        base: PerUnitBase,
        mut network: Network,
        wpgs: Vec<WpgParams>,
        events: &[ScenarioEvent],
        opts: SimOptions,
    ) -> Result<Self> {
        let dt = opts.dt;
        if !(DT_RANGE.0..=DT_RANGE.1).contains(&dt) {
            return Err(Error::Config(vec![format!(
                "dt = {dt} s outside [{}, {}] s",
                DT_RANGE.0, DT_RANGE.1
            )]));
        }
        let energized: Vec<u32> = wpgs
            .iter()
            .filter(|w| w.start == StartMode::Energized)
            .map(|w| w.bus)
            .collect();
        let seeded = network.connected_buses(&energized);
        // A dead WPG's bus must not be pulled into the energized island.
        if let Some(w) = wpgs
            .iter()
            .find(|w| w.start == StartMode::Dead && seeded.contains(&w.bus))
        {
            return Err(Error::Config(vec![format!(
                "wpg {:?} starts dead but bus {} is connected to an energized generator",
                w.name, w.bus
            )]));
        }
        let operating = init::operating_point(&network, &seeded, &wpgs, base.s_base)?;
        network.seed_steady_state(&operating)?;

        let mut units = Vec::with_capacity(wpgs.len());
        for p in wpgs {
            let port = network.add_port(p.bus)?;
            let flux = match p.start {
                StartMode::Energized => crate::em::polar_to_abc(p.nfscm.psi_nom, 0.0),
                StartMode::Dead => network.transformer_flux_at(p.bus).unwrap_or(ThreePhase::ZERO),
            };
            let mut w = Wpg::new(p, port, &base, dt, flux);
            if let (Some(&v), Some(&i)) = (operating.v.get(&w.params.bus), operating.injection.get(&w.params.bus)) {
                if w.params.start == StartMode::Energized {
                    w.seed_steady_state(v, i, base.omega());
                }
            }
            units.push(w);
        }

        let mut channels = Vec::new();
        for w in &units {
            let n = &w.params.name;
            channels.push(format!("{n}.v_dc_V"));
            for q in ["i_l", "i_out", "v_pcc", "flux"] {
                for ph in ["a", "b", "c"] {
                    channels.push(format!("{n}.{q}_{ph}_pu"));
                }
            }
            channels.extend([
                format!("{n}.p_pu"),
                format!("{n}.q_pu"),
                format!("{n}.p_in_MW"),
                format!("{n}.i_s_A"),
                format!("{n}.lbfc_flag"),
            ]);
        }
        for t in &network.desc().transformers {
            for q in ["i", "psi"] {
                for ph in ["a", "b", "c"] {
                    channels.push(format!("{}.{q}_{ph}_pu", t.name));
                }
            }
        }
        for b in &opts.record_buses {
            network.bus_index(*b)?;
            for ph in ["a", "b", "c"] {
                channels.push(format!("bus{b}.v_{ph}_pu"));
            }
        }
        let collectors = Collectors::new(opts.windows.clone(), base.f_nom, dt, base.v_base_dc, &units, &network);
        let mut sim = Self {
            base,
            dt,
            step: 0,
            seed: 0,
            network,
            wpgs: units,
            events: events::schedule(events, dt),
            fired: Vec::new(),
            recorder: Recorder::new(opts.decimation, channels),
            collectors,
            record_buses: opts.record_buses,
        };
        sim.observe();
        Ok(sim)
    }

    pub fn t(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn metrics(&self) -> Metrics {
        self.collectors.snapshot()
    }

    fn fire_events(&mut self) -> Result<()> {
        let t = self.t();
        for i in 0..self.events.len() {
            if self.events[i].fired || self.events[i].step != self.step {
                continue;
            }
            let ev = self.events[i].event.clone();
            match &ev.kind {
                EventKind::LoadStep { load, connect } => self.network.set_load(load, *connect)?,
                EventKind::FaultOn { bus, r_on } => self.network.set_fault(*bus, *r_on, true, t)?,
                EventKind::FaultOff { bus } => self.network.set_fault(*bus, 0.0, false, t)?,
                EventKind::BreakerClose { branch } => self.network.set_breaker(branch, true)?,
                EventKind::BreakerOpen { branch } => self.network.set_breaker(branch, false)?,
                EventKind::SetpointChange { wpg, p_in_mw } => {
                    let w = self
                        .wpgs
                        .iter_mut()
                        .find(|w| &w.params.name == wpg)
                        .ok_or_else(|| Error::Config(vec![format!("no wpg named {wpg:?}")]))?;
                    w.machine.p_in_ref = p_in_mw * 1e6;
                }
            }
            self.events[i].fired = true;
            self.fired.push(FiredEvent { step: self.step, t, event: ev });
        }
        Ok(())
    }

    /// Advances one step.
    pub fn step(&mut self) -> Result<()> {
        let t = self.t();
        let dt = self.dt;
        self.fire_events()?;
        let mut stamps = Vec::with_capacity(self.wpgs.len());
        for w in &mut self.wpgs {
            stamps.push(w.pre_network(&self.base, t, dt)?);
        }
        self.network.step(dt, &stamps, &[])?;
        for w in &mut self.wpgs {
            let (v_pcc, v_n) = self.network.port_voltages(w.port);
            w.post_network(&self.base, dt, v_pcc, v_n)?;
        }
        self.step += 1;
        self.observe();
        Ok(())
    }

    fn observe(&mut self) {
        let t = self.t();
        self.collectors.observe(self.step, t, &self.wpgs, &self.network);
        if !self.recorder.due(self.step) {
            return;
        }
        let mut row = Vec::with_capacity(self.recorder.names.len());
        row.push(t);
        for w in &self.wpgs {
            row.push(w.dc.v_dc);
            for q in [w.inverter.i_l, w.inverter.i_out(), w.inverter.v_pcc, w.bus_flux] {
                row.extend(q.to_array());
            }
            let (p, q) = w.pq();
            row.extend([
                p,
                q,
                w.machine.p_in / 1e6,
                w.boost.map_or(0.0, |b| b.i_s),
                f64::from(u8::from(w.mode() == crate::control::Mode::Lbfc)),
            ]);
        }
        for s in &self.network.state.transformers {
            row.extend(s.i_lv().to_array());
            row.extend(s.psi.to_array());
        }
        for b in &self.record_buses {
            let v = self.network.bus_voltage(*b).unwrap_or(ThreePhase::ZERO);
            row.extend(v.to_array());
        }
        self.recorder.push(row);
    }

    /// Number of steps needed to reach `t_end`.
    pub fn steps_to(&self, t_end: f64) -> u64 {
        (t_end / self.dt - 1e-9).ceil().max(0.0) as u64
    }

    /// Compact state dump used in failure diagnostics.
    pub fn snapshot(&self) -> String {
        #[derive(Serialize)]
        struct Snap<'a> {
            step: u64,
            t: f64,
            wpgs: &'a [Wpg],
            network: &'a crate::network::NetworkState,
        }
        serde_json::to_string(&Snap {
            step: self.step,
            t: self.t(),
            wpgs: &self.wpgs,
            network: &self.network.state,
        })
        .unwrap_or_else(|e| format!("<snapshot unavailable: {e}>"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub step: u64,
    pub t: f64,
    pub message: String,
    pub snapshot: String,
}

impl From<Failure> for Error {
    fn from(f: Failure) -> Self {
        Error::Numerical {
            step: f.step,
            t: f.t,
            message: f.message,
            snapshot: Box::new(f.snapshot),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub channels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub metrics: Metrics,
    pub events: Vec<FiredEvent>,
    pub dt: f64,
    pub t_end: f64,
    /// Set when the run stopped early; the other fields then hold what was
    /// gathered up to the failing step.
    pub failure: Option<Failure>,
}

impl RunArtifacts {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.channels.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Runs `sim` until `t_end` and packages the recording and metrics.
pub fn run(mut sim: Simulation, t_end: f64) -> RunArtifacts {
    let n = sim.steps_to(t_end);
    let mut failure = None;
    while sim.step < n {
        if let Err(e) = sim.step() {
            failure = Some(Failure {
                step: sim.step,
                t: sim.t(),
                message: e.to_string(),
                snapshot: sim.snapshot(),
            });
            break;
        }
    }
    RunArtifacts {
        metrics: sim.metrics(),
        events: sim.fired.clone(),
        dt: sim.dt,
        t_end,
        channels: std::mem::take(&mut sim.recorder.names),
        rows: std::mem::take(&mut sim.recorder.rows),
        failure,
    }
}
