//! Voltage-source baseline sharing the synchronizing and exciter loops.
//!
//! The loops produce a capacitor voltage reference `polar(mag, theta + pi/2)`.
//! It is tracked by an outer proportional voltage loop that sets the
//! inductor current reference (load current plus capacitor feed-forward plus
//! voltage correction) and an inner per-phase current hysteresis. The current
//! reference is not bounded.

use serde::{Deserialize, Serialize};

use super::nfscm::{nfscm_magnitude_step, nfscm_phase_step, NfscmParams, NfscmState};
use crate::em::{polar_to_abc, ThreePhase};
use crate::inverter::SwitchState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvscmParams {
    /// Voltage-loop gain, per-unit current per per-unit volt.
    pub k_v: f64,
    /// Current hysteresis half-band.
    pub current_band: f64,
}

impl Default for AvscmParams {
    fn default() -> Self {
        Self {
            k_v: 1.0,
            current_band: 0.05,
        }
    }
}

impl AvscmParams {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.k_v >= 0.0) {
            errs.push(format!("{prefix}.k_v must be >= 0"));
        }
        if !(self.current_band > 0.0) {
            errs.push(format!("{prefix}.current_band must be > 0"));
        }
        errs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvscmState {
    pub params: AvscmParams,
    /// Phase and exciter loops; the flux integrator is unused.
    pub loops: NfscmState,
    pub v_ref: ThreePhase,
    pub i_ref: ThreePhase,
    pub switch: SwitchState,
}

impl AvscmState {
    pub fn new(params: AvscmParams, loops: NfscmParams, v_dc_nom: f64) -> Self {
        Self {
            params,
            loops: NfscmState::new(loops, v_dc_nom, ThreePhase::ZERO),
            v_ref: ThreePhase::ZERO,
            i_ref: ThreePhase::ZERO,
            switch: SwitchState::default(),
        }
    }
}

/// Measurements available to the baseline at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvscmInputs {
    pub v_dc: f64,
    pub v_pcc: ThreePhase,
    pub i_l: ThreePhase,
    pub i_out: ThreePhase,
}

pub fn avscm_step(
    s: &AvscmState,
    m: &AvscmInputs,
    b_filter: f64,
    t: f64,
    omega_n: f64,
    dt: f64,
) -> (AvscmState, SwitchState) {
    let mut next = *s;
    let (loops, theta) = nfscm_phase_step(&s.loops, m.v_dc, t, omega_n, dt);
    let loops = nfscm_magnitude_step(&loops, m.v_pcc.magnitude(), dt);
    let mag = loops.psi_mag_ref;
    next.loops = loops;
    next.v_ref = polar_to_abc(mag, theta + std::f64::consts::FRAC_PI_2);
    let cap_feed = polar_to_abc(mag * b_filter, theta + std::f64::consts::PI);
    next.i_ref = m.i_out + cap_feed + (next.v_ref - m.v_pcc) * s.params.k_v;
    let err = (next.i_ref - m.i_l).differential();
    let band = s.params.current_band;
    let decide = |e: f64, held: bool| if e > band { true } else if e < -band { false } else { held };
    next.switch = SwitchState::new(
        decide(err.a, s.switch.a),
        decide(err.b, s.switch.b),
        decide(err.c, s.switch.c),
    );
    (next, next.switch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn shares_phase_loop_with_flux_controller() {
        let w = TAU * 60.0;
        let dt = 1e-4;
        let mut a = AvscmState::new(AvscmParams::default(), NfscmParams::default(), 1110.0);
        let mut n = NfscmState::new(NfscmParams::default(), 1110.0, ThreePhase::ZERO);
        for k in 0..3000 {
            let t = k as f64 * dt;
            let v_dc = 1110.0 - 20.0 * (t * 3.0).sin();
            let m = AvscmInputs { v_dc, v_pcc: ThreePhase::ZERO, i_l: ThreePhase::ZERO, i_out: ThreePhase::ZERO };
            a = avscm_step(&a, &m, 0.05, t, w, dt).0;
            n = nfscm_phase_step(&n, v_dc, t, w, dt).0;
            assert_eq!(a.loops.delta_theta, n.delta_theta);
        }
    }

    #[test]
    fn voltage_reference_leads_flux_reference() {
        let a = AvscmState::new(AvscmParams::default(), NfscmParams::default(), 1110.0);
        let m = AvscmInputs { v_dc: 1110.0, v_pcc: ThreePhase::ZERO, i_l: ThreePhase::ZERO, i_out: ThreePhase::ZERO };
        let (s, _) = avscm_step(&a, &m, 0.05, 0.0, TAU * 60.0, 1e-5);
        let psi = a.loops.reference(0.0, TAU * 60.0);
        let lead = (s.v_ref.angle() - psi.angle()).rem_euclid(TAU);
        assert!((lead - std::f64::consts::FRAC_PI_2).abs() < 1e-3);
    }
}
