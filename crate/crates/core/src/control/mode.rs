//! Switching between flux synchronization and funnel current control.
//!
//! A disturbance is declared when any inductor current magnitude reaches
//! `gamma`; all three phases then hand over to the funnel controller. While
//! the funnel is active, the PCC voltage of each phase is integrated into a
//! flux proxy held over one fundamental cycle. Recovery is declared once the
//! window is full and some phase's latest proxy value deviates from the
//! window mean by at least `tau`, i.e. the voltage has regained a sinusoidal
//! swing of flux amplitude close to `tau` or more.

use serde::{Deserialize, Serialize};

use crate::em::{CycleWindow, ThreePhase};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Nfscm,
    Lbfc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeParams {
    pub gamma: f64,
    pub tau: f64,
}

impl Default for ModeParams {
    fn default() -> Self {
        Self {
            gamma: 1.75,
            tau: 0.5,
        }
    }
}

impl ModeParams {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.gamma > 0.0) {
            errs.push(format!("{prefix}.gamma must be > 0"));
        }
        if !(self.tau > 0.0) {
            errs.push(format!("{prefix}.tau must be > 0"));
        }
        errs
    }
}

/// What happened on the last mode update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transition {
    #[default]
    None,
    Engaged,
    Recovered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeState {
    pub params: ModeParams,
    pub mode: Mode,
    pub transition: Transition,
    /// Flux proxy accumulated since the funnel engaged.
    pub proxy: ThreePhase,
    v_prev: Option<ThreePhase>,
    windows: [CycleWindow; 3],
}

impl ModeState {
    pub fn new(params: ModeParams, f_nom: f64, dt: f64) -> Self {
        let w = CycleWindow::new(f_nom, dt);
        Self {
            params,
            mode: Mode::Nfscm,
            transition: Transition::None,
            proxy: ThreePhase::ZERO,
            v_prev: None,
            windows: [w.clone(), w.clone(), w],
        }
    }

    /// Disturbance indicator `T`.
    pub fn t_flag(&self) -> u8 {
        u8::from(self.mode == Mode::Lbfc)
    }

    /// Proxy minus its window mean, once a full cycle has been gathered.
    pub fn deviation(&self) -> Option<ThreePhase> {
        let mut d = ThreePhase::ZERO;
        for ph in 0..3 {
            let w = &self.windows[ph];
            if !w.is_full() {
                return None;
            }
            d[ph] = w.latest()? - w.mean()?;
        }
        Some(d)
    }
}

pub fn mode_switch_step(m: &ModeState, i_l: ThreePhase, v_pcc: ThreePhase, omega_n: f64, dt: f64) -> ModeState {
    let mut next = m.clone();
    next.transition = Transition::None;
    match m.mode {
        Mode::Nfscm => {
            if i_l.max_abs() >= m.params.gamma {
                next.mode = Mode::Lbfc;
                next.transition = Transition::Engaged;
                next.proxy = ThreePhase::ZERO;
                next.v_prev = Some(v_pcc);
                for w in &mut next.windows {
                    w.clear();
                }
            }
        }
        Mode::Lbfc => {
            let v_avg = match m.v_prev {
                Some(p) => (p + v_pcc) * 0.5,
                None => v_pcc,
            };
            next.proxy = m.proxy + v_avg * (omega_n * dt);
            next.v_prev = Some(v_pcc);
            for ph in 0..3 {
                next.windows[ph].push(next.proxy[ph]);
            }
            if next.deviation().is_some_and(|d| d.max_abs() >= m.params.tau) {
                next.mode = Mode::Nfscm;
                next.transition = Transition::Recovered;
            }
        }
    }
    next
}
