//! One wind power generator: plant, inverter and controller, stepped in the
//! engine's fixed order.

use serde::{Deserialize, Serialize};

use crate::control::{
    avscm_step, flux_from_voltage, lbfc_step, mode_switch_step, modulation_error, nfscm_magnitude_step,
    nfscm_output, nfscm_phase_step, AvscmInputs, AvscmParams, AvscmState, FunnelParams, FunnelState, Mode,
    ModeParams, ModeState, NfscmParams, NfscmState, Transition,
};
use crate::em::{polar_to_abc, PerUnitBase, ThreePhase};
use crate::error::Result;
use crate::inverter::{
    bridge_voltages, flux_hysteresis_modulate, FilterParams, InverterState, PortStamp, SwitchState,
};
use crate::network::Phasor;
use nalgebra::Complex;
use crate::plant::{
    boost_step, dc_link_step, governor_step, machine_side_step, DcLinkState, GovernorParams, GovernorState,
    MachineSideSurrogate, StorageBoost,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    #[default]
    Nfscm,
    Avscm,
}

impl std::str::FromStr for ControllerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nfscm" => Ok(Self::Nfscm),
            "avscm" => Ok(Self::Avscm),
            other => Err(format!("unknown controller {other:?} (expected nfscm or avscm)")),
        }
    }
}

/// Initial condition of a WPG and its bus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartMode {
    /// Bus voltage, filter and flux states start on the reference sinusoid.
    #[default]
    Energized,
    /// Bus and filter at rest; the measured flux starts from the transformer
    /// residual flux at the bus, if any.
    Dead,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GovernorGains {
    pub k_pg1: f64,
    pub k_pg2: f64,
    pub k_pg3: f64,
    /// Derivative low-pass time constant, s.
    pub derivative_filter: f64,
}

impl Default for GovernorGains {
    fn default() -> Self {
        Self {
            k_pg1: 30.0,
            k_pg2: 15.0,
            k_pg3: 0.1,
            derivative_filter: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StorageParams {
    /// Storage and governor present.
    pub enabled: bool,
    pub rating_mw: f64,
    pub l_boost: f64,
    pub duty: f64,
    /// Inner current-tracking rate, 1/s.
    pub k_track: f64,
    pub governor: GovernorGains,
}

impl Default for StorageParams {
    fn default() -> Self {
        Self {
            enabled: true,
            rating_mw: 300.0,
            l_boost: 0.0012,
            duty: 0.19,
            k_track: 200.0,
            governor: GovernorGains::default(),
        }
    }
}

/// Configuration of one WPG. Defaults are the full-scale plant data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WpgParams {
    pub name: String,
    pub bus: u32,
    pub controller: ControllerKind,
    /// Hand over to funnel current control on overcurrent (flux control only).
    pub fault_current_control: bool,
    pub start: StartMode,
    /// Machine-side power reference, MW.
    pub p_in_mw: f64,
    /// Machine-side rating, MW.
    pub p_mn_mw: f64,
    pub machine_time_constant: f64,
    /// DC-link capacitance, F.
    pub c_dc: f64,
    pub storage: StorageParams,
    pub filter: FilterParams,
    pub nfscm: NfscmParams,
    pub funnel: FunnelParams,
    pub switching: ModeParams,
    pub avscm: AvscmParams,
}

impl Default for WpgParams {
    fn default() -> Self {
        Self {
            name: String::new(),
            bus: 0,
            controller: ControllerKind::Nfscm,
            fault_current_control: true,
            start: StartMode::Energized,
            p_in_mw: 700.0,
            p_mn_mw: 800.0,
            machine_time_constant: 0.5,
            c_dc: 540.0,
            storage: StorageParams::default(),
            filter: FilterParams::default(),
            nfscm: NfscmParams::default(),
            funnel: FunnelParams::default(),
            switching: ModeParams::default(),
            avscm: AvscmParams::default(),
        }
    }
}

impl WpgParams {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut errs = Vec::new();
        if self.name.is_empty() {
            errs.push(format!("{prefix}.name must not be empty"));
        }
        if !(self.p_mn_mw > 0.0 && self.p_in_mw >= 0.0 && self.p_in_mw <= self.p_mn_mw) {
            errs.push(format!("{prefix}: requires 0 <= p_in_mw <= p_mn_mw and p_mn_mw > 0"));
        }
        if !(self.machine_time_constant >= 0.0) {
            errs.push(format!("{prefix}.machine_time_constant must be >= 0"));
        }
        if !(self.c_dc > 0.0) {
            errs.push(format!("{prefix}.c_dc must be > 0"));
        }
        let s = &self.storage;
        if s.enabled {
            if !(s.rating_mw > 0.0 && s.l_boost > 0.0 && s.k_track > 0.0) {
                errs.push(format!("{prefix}.storage: rating_mw, l_boost and k_track must be > 0"));
            }
            if !(0.0..crate::plant::MAX_DUTY).contains(&s.duty) {
                errs.push(format!("{prefix}.storage.duty must lie in [0, 0.95)"));
            }
            let g = &s.governor;
            if !(g.k_pg1 >= 0.0 && g.k_pg2 >= 0.0 && g.k_pg3 >= 0.0 && g.derivative_filter >= 0.0) {
                errs.push(format!("{prefix}.storage.governor: gains must be >= 0"));
            }
        }
        errs.extend(self.filter.validate(&format!("{prefix}.filter")));
        errs.extend(self.nfscm.validate(&format!("{prefix}.nfscm")));
        errs.extend(self.funnel.validate(&format!("{prefix}.funnel")));
        errs.extend(self.switching.validate(&format!("{prefix}.switching")));
        errs.extend(self.avscm.validate(&format!("{prefix}.avscm")));
        errs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerState {
    Nfscm {
        flux: NfscmState,
        funnel: FunnelState,
        mode: ModeState,
    },
    Avscm(AvscmState),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wpg {
    pub params: WpgParams,
    pub port: usize,
    pub dc: DcLinkState,
    pub machine: MachineSideSurrogate,
    pub boost: Option<StorageBoost>,
    pub governor: Option<GovernorState>,
    pub inverter: InverterState,
    pub ctrl: ControllerState,
    /// Integrated PCC voltage, kept for every controller type.
    pub bus_flux: ThreePhase,
    /// Bridge voltages chosen for the step in progress.
    pending_bridge: ThreePhase,
}

impl Wpg {
    /// `initial_flux` is the flux the bus holds at `t = 0`: the reference
    /// flux for an energized start, the transformer residual for a dead one.
    pub fn new(params: WpgParams, port: usize, base: &PerUnitBase, dt: f64, initial_flux: ThreePhase) -> Self {
        let v_nom = base.v_base_dc;
        let dc = DcLinkState::new(v_nom, params.c_dc);
        let p_in = params.p_in_mw * 1e6;
        let machine = MachineSideSurrogate::new(p_in, params.machine_time_constant, params.p_mn_mw * 1e6);
        let s = &params.storage;
        let (boost, governor) = if s.enabled {
            let rating = s.rating_mw * 1e6;
            let g = &s.governor;
            (
                Some(StorageBoost::at_equilibrium(s.l_boost, s.duty, v_nom, rating, s.k_track)),
                Some(GovernorState::new(GovernorParams {
                    k_pg1: g.k_pg1,
                    k_pg2: g.k_pg2,
                    k_pg3: g.k_pg3,
                    derivative_filter: g.derivative_filter,
                    p_rating: rating,
                    s_base: base.s_base,
                    v_dc_nom: v_nom,
                })),
            )
        } else {
            (None, None)
        };
        let mut inverter = InverterState::default();
        if params.start == StartMode::Energized {
            // Steady capacitor charging current for the nominal sinusoid.
            let v0 = polar_to_abc(params.nfscm.psi_nom, std::f64::consts::FRAC_PI_2);
            let i_c = polar_to_abc(params.nfscm.psi_nom * params.filter.b_filter, std::f64::consts::PI);
            inverter.u_c = v0 - i_c * params.filter.r_damping;
            inverter.i_c = i_c;
            inverter.i_l = i_c;
            inverter.v_pcc = v0;
        }
        let ctrl = match params.controller {
            ControllerKind::Nfscm => ControllerState::Nfscm {
                flux: NfscmState::new(params.nfscm, v_nom, initial_flux),
                funnel: FunnelState::default(),
                mode: ModeState::new(params.switching, base.f_nom, dt),
            },
            ControllerKind::Avscm => ControllerState::Avscm(AvscmState::new(params.avscm, params.nfscm, v_nom)),
        };
        Self {
            params,
            port,
            dc,
            machine,
            boost,
            governor,
            inverter,
            ctrl,
            bus_flux: initial_flux,
            pending_bridge: ThreePhase::ZERO,
        }
    }

    /// Places the filter and controller on a sinusoidal operating point at
    /// `t = 0`: PCC voltage `v` and grid current `i_out`, both phasors.
    pub fn seed_steady_state(&mut self, v: Phasor, i_out: Phasor, omega: f64) {
        let abc = |p: Phasor| polar_to_abc(p.norm(), p.arg());
        let f = &self.params.filter;
        let j = Complex::new(0.0, 1.0);
        let i_c = if f.b_filter > 0.0 {
            v * j * f.b_filter / (1.0 + j * f.b_filter * f.r_damping)
        } else {
            Phasor::default()
        };
        let i_l = i_out + i_c;
        let v_b = v + Complex::new(f.r_filter, f.x_filter) * i_l;
        let inv = &mut self.inverter;
        inv.i_c = abc(i_c);
        inv.u_c = abc(v - i_c * f.r_damping);
        inv.i_l = abc(i_l);
        inv.v_pcc = abc(v);
        inv.v_bridge = abc(v_b);
        inv.v_neutral = 0.0;
        inv.p_e = (v_b * i_l.conj()).re;
        // Start each leg on the side its average bridge voltage lies.
        inv.switch = SwitchState::from_array(abc(v_b).to_array().map(|x| x > 0.0));
        let psi = abc(v / j);
        self.bus_flux = psi;
        match &mut self.ctrl {
            ControllerState::Nfscm { flux, .. } => {
                flux.reseed(psi, 0.0, omega);
                // The modulator tracks the bridge flux, not the PCC flux.
                flux.hold_reference(abc(v_b / j), 0.0, omega);
            }
            ControllerState::Avscm(a) => {
                a.loops.reseed(psi, 0.0, omega);
                a.switch = inv.switch;
            }
        }
    }

    pub fn mode(&self) -> Mode {
        match &self.ctrl {
            ControllerState::Nfscm { mode, .. } => mode.mode,
            ControllerState::Avscm(_) => Mode::Nfscm,
        }
    }

    pub fn transition(&self) -> Transition {
        match &self.ctrl {
            ControllerState::Nfscm { mode, .. } => mode.transition,
            ControllerState::Avscm(_) => Transition::None,
        }
    }

    /// Funnel error of the last step, when the funnel drives the switches.
    pub fn funnel_error(&self) -> Option<ThreePhase> {
        match &self.ctrl {
            ControllerState::Nfscm { funnel, mode, .. } if mode.mode == Mode::Lbfc => Some(funnel.e),
            _ => None,
        }
    }

    /// Steps (1)-(5) for this WPG: sample the previous-step measurements,
    /// update the switching strategy and active controller, form the
    /// inverter companion with the present DC voltage, then advance the DC
    /// side with the inverter draw of the previous step.
    pub fn pre_network(&mut self, base: &PerUnitBase, t: f64, dt: f64) -> Result<PortStamp> {
        let w = base.omega();
        let v_pcc = self.inverter.v_pcc;
        let i_l = self.inverter.i_l;
        let v_dc = self.dc.v_dc;
        let fp = self.params.filter;

        let switch = match &mut self.ctrl {
            ControllerState::Nfscm { flux, funnel, mode } => {
                if self.params.fault_current_control {
                    *mode = mode_switch_step(mode, i_l, v_pcc, w, dt);
                }
                let (n, theta) = nfscm_phase_step(flux, v_dc, t, w, dt);
                // The exciter holds while the funnel owns the switches, or
                // it winds up against the collapsed PCC voltage.
                let n = if mode.mode == Mode::Lbfc {
                    n
                } else {
                    nfscm_magnitude_step(&n, v_pcc.magnitude(), dt)
                };
                let (mut n, mut err) = nfscm_output(&n, theta, v_pcc, w, dt);
                if mode.transition == Transition::Recovered {
                    n.reseed(flux_from_voltage(v_pcc), t, w);
                    err = n.reference(t, w) - n.psi_meas;
                }
                *flux = n;
                match mode.mode {
                    Mode::Lbfc => {
                        let (f, s) = lbfc_step(funnel, &self.params.funnel, i_l, ThreePhase::ZERO);
                        *funnel = f;
                        s
                    }
                    Mode::Nfscm => {
                        let e = modulation_error(err, i_l, fp.x_filter);
                        flux_hysteresis_modulate(e, n.params.band, self.inverter.switch)
                    }
                }
            }
            ControllerState::Avscm(a) => {
                let m = AvscmInputs {
                    v_dc,
                    v_pcc,
                    i_l,
                    i_out: self.inverter.i_out(),
                };
                let (next, s) = avscm_step(a, &m, fp.b_filter, t, w, dt);
                *a = next;
                s
            }
        };
        self.inverter.switch = switch;
        self.pending_bridge = bridge_voltages(switch, base.dc_volts_to_ac_pu(v_dc));
        let stamp = self.inverter.companion(&fp, w, dt, self.pending_bridge);

        self.machine = machine_side_step(&self.machine, dt);
        let i_s = self.boost.map_or(0.0, |b| b.i_s);
        if let (Some(g), Some(b)) = (self.governor.as_mut(), self.boost.as_mut()) {
            let dv = (v_dc - g.params.v_dc_nom) / g.params.v_dc_nom;
            let i_ref = governor_step(g, dv, dt);
            *b = boost_step(b, i_ref, v_dc, dt);
        }
        self.dc.set_powers(self.machine.p_in, i_s, self.inverter.p_e * base.s_base);
        self.dc = dc_link_step(&self.dc, dt).map_err(|e| match e {
            crate::Error::DcLinkCollapse { u, .. } => crate::Error::DcLinkCollapse {
                wpg: self.params.name.clone(),
                u,
            },
            other => other,
        })?;
        Ok(stamp)
    }

    /// Step (6) completion: advance the filter with the solved voltages.
    pub fn post_network(&mut self, base: &PerUnitBase, dt: f64, v_pcc: ThreePhase, v_neutral: f64) -> Result<()> {
        let w = base.omega();
        let prev = self.inverter.v_pcc;
        self.inverter
            .commit(&self.params.filter, w, dt, self.pending_bridge, v_pcc, v_neutral)?;
        self.bus_flux = self.bus_flux + (prev + v_pcc) * (0.5 * w * dt);
        Ok(())
    }

    /// Active and reactive power delivered at the PCC, per-unit.
    pub fn pq(&self) -> (f64, f64) {
        let (va, vb) = self.inverter.v_pcc.clarke();
        let (ia, ib) = self.inverter.i_out().clarke();
        (va * ia + vb * ib, vb * ia - va * ib)
    }
}
