//! Flux-linkage synchronizing control.
//!
//! The phase loop integrates the normalized DC-link energy deviation into an
//! angle offset, so the DC link plays the role of rotor inertia. The magnitude
//! loop is a clamped integral exciter on PCC voltage. The measured flux is the
//! running integral of the PCC voltages; fluxes are per-unit of `v_peak/omega`,
//! so one per-unit volt applied for one second adds `omega` per-unit flux.

use serde::{Deserialize, Serialize};

use crate::em::{polar_to_abc, ThreePhase};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NfscmParams {
    /// Phase-loop gain on the squared DC-voltage deviation.
    pub k_i: f64,
    /// Exciter integral gain.
    pub k_e: f64,
    pub v_t_ref: f64,
    pub psi_nom: f64,
    pub psi_min: f64,
    pub psi_max: f64,
    /// Flux hysteresis half-band.
    pub band: f64,
}

impl Default for NfscmParams {
    fn default() -> Self {
        Self {
            k_i: 10.0,
            k_e: 0.2,
            v_t_ref: 1.0,
            psi_nom: 1.0,
            psi_min: 0.2,
            psi_max: 1.5,
            band: 0.02,
        }
    }
}

impl NfscmParams {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.k_i >= 0.0 && self.k_e >= 0.0) {
            errs.push(format!("{prefix}: k_i and k_e must be >= 0"));
        }
        if !(0.0 < self.psi_min && self.psi_min <= self.psi_nom && self.psi_nom <= self.psi_max) {
            errs.push(format!("{prefix}: requires 0 < psi_min <= psi_nom <= psi_max"));
        }
        if !(self.band > 0.0) {
            errs.push(format!("{prefix}.band must be > 0"));
        }
        errs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NfscmState {
    pub params: NfscmParams,
    /// Nominal DC-link voltage, volts.
    pub v_dc_nom: f64,
    /// Angle offset from the nominal rotating frame, radians.
    pub delta_theta: f64,
    pub psi_mag_ref: f64,
    /// Exciter integrator, clamped so the magnitude stays in range.
    pub exciter_integral: f64,
    /// Integrated PCC voltage.
    pub psi_meas: ThreePhase,
    /// PCC voltage at the previous update; `None` restarts with a rectangle step.
    pub v_prev: Option<ThreePhase>,
}

impl NfscmState {
    pub fn new(params: NfscmParams, v_dc_nom: f64, psi_meas: ThreePhase) -> Self {
        Self {
            params,
            v_dc_nom,
            delta_theta: 0.0,
            psi_mag_ref: params.psi_nom,
            exciter_integral: 0.0,
            psi_meas,
            v_prev: None,
        }
    }

    /// Reference flux at time `t`.
    pub fn reference(&self, t: f64, omega_n: f64) -> ThreePhase {
        polar_to_abc(self.psi_mag_ref, self.delta_theta + omega_n * t)
    }

    /// Realigns the controller onto a measured flux: the angle offset is set
    /// so the reference at `t` points along `psi`, and the integrator restarts
    /// from `psi` without history.
    pub fn reseed(&mut self, psi: ThreePhase, t: f64, omega_n: f64) {
        self.delta_theta = wrap(psi.angle() - omega_n * t);
        self.psi_meas = psi;
        self.v_prev = None;
    }

    /// Points the reference at `psi_ref` at time `t`, with the exciter
    /// integrator holding its magnitude.
    pub fn hold_reference(&mut self, psi_ref: ThreePhase, t: f64, omega_n: f64) {
        let p = &self.params;
        self.delta_theta = wrap(psi_ref.angle() - omega_n * t);
        self.psi_mag_ref = psi_ref.magnitude().clamp(p.psi_min, p.psi_max);
        if p.k_e > 0.0 {
            self.exciter_integral = (self.psi_mag_ref - p.psi_nom) / p.k_e;
        }
    }
}

fn wrap(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    (x + PI).rem_euclid(TAU) - PI
}

/// Steady-state flux implied by a balanced voltage: same magnitude, a
/// quarter cycle behind. Carries no DC offset by construction.
pub fn flux_from_voltage(v: ThreePhase) -> ThreePhase {
    polar_to_abc(v.magnitude(), v.angle() - std::f64::consts::FRAC_PI_2)
}

/// Squared DC-voltage deviation `(v^2 - v_nom^2) / v_nom^2`.
pub fn dc_energy_deviation(v_dc: f64, v_dc_nom: f64) -> f64 {
    (v_dc * v_dc - v_dc_nom * v_dc_nom) / (v_dc_nom * v_dc_nom)
}

/// Advances the angle offset and returns the new state with `theta` at `t`.
pub fn nfscm_phase_step(n: &NfscmState, v_dc: f64, t: f64, omega_n: f64, dt: f64) -> (NfscmState, f64) {
    let mut next = *n;
    next.delta_theta += n.params.k_i * dc_energy_deviation(v_dc, n.v_dc_nom) * dt;
    (next, next.delta_theta + omega_n * t)
}

/// Exciter update; returns the new state, whose `psi_mag_ref` is the output.
pub fn nfscm_magnitude_step(n: &NfscmState, v_t_meas: f64, dt: f64) -> NfscmState {
    let p = &n.params;
    let mut next = *n;
    let lo = (p.psi_min - p.psi_nom) / p.k_e.max(f64::MIN_POSITIVE);
    let hi = (p.psi_max - p.psi_nom) / p.k_e.max(f64::MIN_POSITIVE);
    next.exciter_integral = (n.exciter_integral + (p.v_t_ref - v_t_meas) * dt).clamp(lo, hi);
    next.psi_mag_ref = (p.psi_nom + p.k_e * next.exciter_integral).clamp(p.psi_min, p.psi_max);
    next
}

/// Integrates the PCC voltage into the measured flux and returns the flux
/// tracking error `psi* - psi_meas`.
pub fn nfscm_output(
    n: &NfscmState,
    theta: f64,
    v_pcc: ThreePhase,
    omega_n: f64,
    dt: f64,
) -> (NfscmState, ThreePhase) {
    let mut next = *n;
    let v_avg = match n.v_prev {
        Some(prev) => (prev + v_pcc) * 0.5,
        None => v_pcc,
    };
    next.psi_meas = n.psi_meas + v_avg * (omega_n * dt);
    next.v_prev = Some(v_pcc);
    let reference = polar_to_abc(n.psi_mag_ref, theta);
    (next, reference - next.psi_meas)
}

/// Error fed to the flux hysteresis.
///
/// The bridge drives the flux behind the series filter, so the drop across
/// the filter reactance is removed from the PCC flux error. The three-wire
/// bridge cannot act on the zero-sequence part, which is discarded.
pub fn modulation_error(psi_err: ThreePhase, i_l: ThreePhase, x_filter: f64) -> ThreePhase {
    (psi_err - i_l * x_filter).differential()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, TAU};

    const W: f64 = TAU * 60.0;

    fn fresh() -> NfscmState {
        NfscmState::new(NfscmParams::default(), 1110.0, ThreePhase::ZERO)
    }

    #[test]
    fn nominal_dc_rotates_at_nominal_frequency() {
        let mut n = fresh();
        let dt = 1e-4;
        for k in 1..=10_000 {
            let t = k as f64 * dt;
            let (m, theta) = nfscm_phase_step(&n, 1110.0, t, W, dt);
            n = m;
            assert_eq!(theta, W * t);
        }
    }

    #[test]
    fn held_deviation_integrates_linearly() {
        let mut n = fresh();
        let v_dc = 1110.0 * (1.0f64 - 0.01).sqrt();
        let dt = 1e-4;
        for k in 1..=1000 {
            n = nfscm_phase_step(&n, v_dc, k as f64 * dt, W, dt).0;
        }
        assert!((n.delta_theta + 0.01).abs() < 1e-12, "{}", n.delta_theta);
    }

    #[test]
    fn equal_inputs_give_equal_angles() {
        let (mut a, mut b) = (fresh(), fresh());
        for k in 0..5000 {
            let v = 1110.0 + 30.0 * (k as f64 * 0.01).sin();
            a = nfscm_phase_step(&a, v, 0.0, W, 1e-4).0;
            b = nfscm_phase_step(&b, v, 0.0, W, 1e-4).0;
            assert_eq!(a.delta_theta, b.delta_theta);
        }
    }

    #[test]
    fn exciter_examples() {
        let dt = 1e-3;
        let mut n = fresh();
        for _ in 0..1000 {
            n = nfscm_magnitude_step(&n, 1.0, dt);
        }
        assert_eq!(n.psi_mag_ref, 1.0);
        for _ in 0..1000 {
            n = nfscm_magnitude_step(&n, 0.9, dt);
        }
        assert!((n.psi_mag_ref - 1.02).abs() < 1e-9);
        for _ in 0..100_000 {
            n = nfscm_magnitude_step(&n, 0.0, dt);
        }
        assert_eq!(n.psi_mag_ref, 1.5);
        // anti-windup: recovers as soon as the sag reverses
        n = nfscm_magnitude_step(&n, 2.0, dt);
        assert!(n.psi_mag_ref < 1.5);
    }

    #[test]
    fn constant_voltage_integrates_exactly() {
        let mut n = fresh();
        let dt = 1e-5;
        let v = ThreePhase::new(1.0, 0.0, 0.0);
        for _ in 0..1000 {
            n = nfscm_output(&n, 0.0, v, W, dt).0;
        }
        assert!((n.psi_meas.a - W * 0.01).abs() < 1e-9);
    }

    #[test]
    fn matched_voltage_keeps_error_small() {
        let dt = 1e-5;
        // psi* = cos-based reference; its derivative in per-unit volts is polar(1, theta + pi/2)
        let mut n = NfscmState::new(NfscmParams::default(), 1110.0, polar_to_abc(1.0, 0.0));
        let mut worst: f64 = 0.0;
        for k in 1..=20_000 {
            let t = k as f64 * dt;
            let v = polar_to_abc(1.0, W * t + FRAC_PI_2);
            let (m, err) = nfscm_output(&n, W * t, v, W, dt);
            n = m;
            worst = worst.max(err.max_abs());
        }
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn measured_flux_lags_voltage_by_quarter_cycle() {
        let dt: f64 = 1e-5;
        let n_cycle = (1.0 / (60.0 * dt)).round() as usize;
        let mut n = fresh();
        let (mut vre, mut vim, mut pre, mut pim) = (0.0, 0.0, 0.0, 0.0);
        for k in 1..=3 * n_cycle {
            let t = k as f64 * dt;
            let v = polar_to_abc(1.0, W * t + 0.4);
            n = nfscm_output(&n, 0.0, v, W, dt).0;
            if k > 2 * n_cycle {
                let (c, s) = ((W * t).cos(), (W * t).sin());
                vre += v.a * c;
                vim -= v.a * s;
                pre += n.psi_meas.a * c;
                pim -= n.psi_meas.a * s;
            }
        }
        let lag = (vim.atan2(vre) - pim.atan2(pre)).rem_euclid(TAU);
        assert!((lag - FRAC_PI_2).abs() < 1e-3, "lag {lag}");
    }

    #[test]
    fn reseed_aligns_reference_with_measured_flux() {
        let mut n = fresh();
        let psi = polar_to_abc(0.8, 1.1);
        n.reseed(psi, 0.37, W);
        let r = n.reference(0.37, W);
        assert!((r.angle() - psi.angle()).abs() < 1e-9);
        assert_eq!(n.psi_meas, psi);
        assert!(n.v_prev.is_none());
    }

    #[test]
    fn flux_from_voltage_matches_integral() {
        let v = polar_to_abc(0.9, 0.7);
        let psi = flux_from_voltage(v);
        assert!((psi - polar_to_abc(0.9, 0.7 - FRAC_PI_2)).max_abs() < 1e-12);
    }

    #[test]
    fn modulation_error_is_zero_sequence_free() {
        let e = modulation_error(ThreePhase::new(1.0, 0.4, -0.2), ThreePhase::new(2.0, -1.0, 0.5), 0.15);
        assert!(e.sum().abs() < 1e-15);
    }
}
