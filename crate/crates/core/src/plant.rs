//! Per-WPG energy subsystem behind the grid-side inverter: the DC-link
//! capacitor, a first-order surrogate of the machine side, an energy
//! storage behind an average-model boost converter, and the governor that
//! commands the storage from the DC-link voltage error.
//!
//! DC-side quantities are in SI units (volts, amps, watts, farads).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// DC-link capacitor state.
///
/// `p_me` is the power delivered into the capacitor by the machine side and
/// the storage, `p_me = p_in + i_s * v_dc`; `p_e` is the inverter draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcLinkState {
    pub v_dc: f64,
    pub c: f64,
    pub p_me: f64,
    pub p_e: f64,
    pub i_s: f64,
}

impl DcLinkState {
    pub fn new(v_dc: f64, c: f64) -> Self {
        Self {
            v_dc,
            c,
            p_me: 0.0,
            p_e: 0.0,
            i_s: 0.0,
        }
    }

    /// Sets the power balance for the next step from the machine-side power,
    /// storage current and inverter draw.
    pub fn set_powers(&mut self, p_in: f64, i_s: f64, p_e: f64) {
        self.i_s = i_s;
        self.p_me = p_in + i_s * self.v_dc;
        self.p_e = p_e;
    }

    /// Stored energy `C v^2 / 2`, J.
    pub fn energy(&self) -> f64 {
        0.5 * self.c * self.v_dc * self.v_dc
    }
}

/// Advances `C v dv/dt = p_me - p_e` one step.
///
/// The equation is linear in `u = v^2`, so the update `u += 2 (p_me - p_e) dt / C`
/// is exact for powers held constant over the step.
pub fn dc_link_step(s: &DcLinkState, dt: f64) -> Result<DcLinkState> {
    if !(s.v_dc > 0.0 && dt > 0.0) || !(s.p_me.is_finite() && s.p_e.is_finite()) {
        return Err(Error::non_finite(format!(
            "dc_link_step(v_dc = {}, p_me = {}, p_e = {}, dt = {dt})",
            s.v_dc, s.p_me, s.p_e
        )));
    }
    let u = s.v_dc * s.v_dc + 2.0 * (s.p_me - s.p_e) * dt / s.c;
    if u <= 0.0 {
        return Err(Error::DcLinkCollapse {
            wpg: String::new(),
            u,
        });
    }
    Ok(DcLinkState {
        v_dc: u.sqrt(),
        ..*s
    })
}

/// First-order lag standing in for the generator, rectifier and turbine
/// controls on the machine side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachineSideSurrogate {
    pub p_in: f64,
    pub p_in_ref: f64,
    pub time_constant: f64,
    /// Nominal mechanical power; the reference is clamped to `[0, p_rated]`.
    pub p_rated: f64,
}

impl MachineSideSurrogate {
    pub fn new(p_in: f64, time_constant: f64, p_rated: f64) -> Self {
        let p = p_in.clamp(0.0, p_rated);
        Self {
            p_in: p,
            p_in_ref: p,
            time_constant,
            p_rated,
        }
    }
}

pub fn machine_side_step(m: &MachineSideSurrogate, dt: f64) -> MachineSideSurrogate {
    let target = m.p_in_ref.clamp(0.0, m.p_rated);
    let alpha = if m.time_constant > 0.0 {
        1.0 - (-dt / m.time_constant).exp()
    } else {
        1.0
    };
    let p_in = (m.p_in + (target - m.p_in) * alpha).clamp(0.0, m.p_rated);
    MachineSideSurrogate { p_in, ..*m }
}

/// Energy storage behind a boost converter, average model
/// `L di_s/dt = v_storage - (1 - duty) v_dc`.
///
/// The duty cycle comes from an inner tracker that requests
/// `di_s/dt = k_track (i_s_ref - i_s)`; duty saturation limits the slew for
/// large reference steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageBoost {
    pub l_boost: f64,
    pub i_s: f64,
    pub duty: f64,
    pub v_storage: f64,
    pub p_rating: f64,
    pub k_track: f64,
}

pub const MAX_DUTY: f64 = 0.95;

impl StorageBoost {
    /// Boost at equilibrium for `duty` and `v_dc`: zero current and
    /// `v_storage = (1 - duty) v_dc`.
    pub fn at_equilibrium(l_boost: f64, duty: f64, v_dc: f64, p_rating: f64, k_track: f64) -> Self {
        Self {
            l_boost,
            i_s: 0.0,
            duty,
            v_storage: (1.0 - duty) * v_dc,
            p_rating,
            k_track,
        }
    }

    /// Largest storage current allowed by the power rating at `v_dc`.
    pub fn current_limit(&self, v_dc: f64) -> f64 {
        self.p_rating / v_dc
    }
}

pub fn boost_step(b: &StorageBoost, i_s_ref: f64, v_dc: f64, dt: f64) -> StorageBoost {
    let limit = b.current_limit(v_dc);
    let i_ref = i_s_ref.clamp(-limit, limit);
    let wanted_slope = b.k_track * (i_ref - b.i_s);
    let duty = (1.0 - (b.v_storage - b.l_boost * wanted_slope) / v_dc).clamp(0.0, MAX_DUTY);
    let di_dt = (b.v_storage - (1.0 - duty) * v_dc) / b.l_boost;
    let mut i_s = b.i_s + di_dt * dt;
    // Never step across the reference within one step.
    if (i_s - i_ref) * (b.i_s - i_ref) < 0.0 {
        i_s = i_ref;
    }
    StorageBoost {
        i_s: i_s.clamp(-limit, limit),
        duty,
        ..*b
    }
}

/// Governor gains and scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GovernorParams {
    /// Droop gain on the per-unit DC-voltage error.
    pub k_pg1: f64,
    /// Gain on the low-passed derivative of the error.
    pub k_pg2: f64,
    /// Gain on the integral of the error.
    pub k_pg3: f64,
    /// Derivative low-pass time constant, s.
    pub derivative_filter: f64,
    /// Storage rating, W.
    pub p_rating: f64,
    pub s_base: f64,
    pub v_dc_nom: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GovernorState {
    pub params: GovernorParams,
    /// Low-passed copy of the error; the derivative estimate is
    /// `(error - lagged) / derivative_filter`.
    pub lagged: f64,
    pub integral: f64,
}

impl GovernorState {
    pub fn new(params: GovernorParams) -> Self {
        Self {
            params,
            lagged: 0.0,
            integral: 0.0,
        }
    }

    fn rating_pu(&self) -> f64 {
        self.params.p_rating / self.params.s_base
    }
}

/// One governor step. `dv` is the per-unit DC-voltage error
/// `(v_dc - v_dc_nom) / v_dc_nom`; returns the storage current reference in
/// amps, saturated at the storage rating.
pub fn governor_step(g: &mut GovernorState, dv: f64, dt: f64) -> f64 {
    let p = g.params;
    let derivative = if p.derivative_filter > 0.0 {
        let d = (dv - g.lagged) / p.derivative_filter;
        g.lagged += (dv - g.lagged) * (1.0 - (-dt / p.derivative_filter).exp());
        d
    } else {
        0.0
    };
    let rating = g.rating_pu();
    g.integral += dv * dt;
    if p.k_pg3 > 0.0 {
        let bound = rating / p.k_pg3;
        g.integral = g.integral.clamp(-bound, bound);
    }
    let command_pu = -(p.k_pg1 * dv + p.k_pg2 * derivative + p.k_pg3 * g.integral);
    let i_base = p.s_base / p.v_dc_nom;
    let limit = p.p_rating / p.v_dc_nom;
    (command_pu * i_base).clamp(-limit, limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const C: f64 = 540.0;
    const V0: f64 = 1110.0;

    fn gov(k1: f64, k2: f64, k3: f64) -> GovernorState {
        GovernorState::new(GovernorParams {
            k_pg1: k1,
            k_pg2: k2,
            k_pg3: k3,
            derivative_filter: 0.02,
            p_rating: 300e6,
            s_base: 889e6,
            v_dc_nom: V0,
        })
    }

    #[test]
    fn balanced_power_holds_voltage() {
        let mut s = DcLinkState::new(V0, C);
        s.set_powers(500e6, 0.0, 500e6);
        let n = dc_link_step(&s, 1e-3).unwrap();
        assert_eq!(n.v_dc, V0);
    }

    #[test]
    fn constant_surplus_follows_closed_form() {
        let mut s = DcLinkState::new(V0, C);
        s.set_powers(100e6, 0.0, 0.0);
        let n = dc_link_step(&s, 1e-3).unwrap();
        let oracle = (V0 * V0 + 2.0 * 1e8 * 1e-3 / C).sqrt();
        assert!((n.v_dc - oracle).abs() < 1e-9);
        assert!((n.v_dc - 1110.167).abs() < 1e-3);
    }

    #[test]
    fn storage_injection_enters_p_me() {
        let mut s = DcLinkState::new(V0, C);
        s.set_powers(100.0, 2.0, 0.0);
        assert_eq!(s.p_me, 100.0 + 2.0 * V0);
    }

    #[test]
    fn depletion_halts_on_the_step_that_crosses_zero() {
        let p = 100e9;
        let dt = 1e-3;
        let t_star = C * V0 * V0 / (2.0 * p);
        let mut s = DcLinkState::new(V0, C);
        s.set_powers(0.0, 0.0, p);
        let mut k = 0u64;
        let err = loop {
            match dc_link_step(&s, dt) {
                Ok(n) => {
                    s = n;
                    k += 1;
                }
                Err(e) => break e,
            }
        };
        assert!(matches!(err, Error::DcLinkCollapse { .. }));
        // The failing step is the first whose end time reaches t*.
        assert_eq!(k + 1, (t_star / dt).ceil() as u64);
    }

    #[test]
    fn governor_zero_input_zero_output() {
        let mut g = gov(30.0, 15.0, 0.1);
        assert_eq!(governor_step(&mut g, 0.0, 1e-5), 0.0);
    }

    #[test]
    fn governor_droop_alone() {
        let mut g = gov(30.0, 0.0, 0.0);
        let i = governor_step(&mut g, -0.01, 1e-5);
        let i_base = 889e6 / V0;
        assert!((i / i_base - 0.3).abs() < 1e-12);
    }

    #[test]
    fn governor_saturates_at_rating() {
        let mut g = gov(30.0, 15.0, 0.1);
        let i = governor_step(&mut g, -0.5, 1e-5);
        assert!((i * V0 - 300e6).abs() < 1e-3);
        let i = governor_step(&mut g, 0.5, 1e-5);
        assert!((i * V0 + 300e6).abs() < 1e-3);
    }

    #[test]
    fn governor_integral_is_clamped_to_rating() {
        let mut g = gov(0.0, 0.0, 0.1);
        for _ in 0..100_000 {
            governor_step(&mut g, -1.0, 1e-2);
        }
        assert!(g.integral.abs() * 0.1 <= 300e6 / 889e6 + 1e-12);
    }

    #[test]
    fn boost_equilibrium_is_stationary() {
        let b = StorageBoost::at_equilibrium(0.0012, 0.19, V0, 300e6, 200.0);
        assert!((b.v_storage - 899.1).abs() < 1e-9);
        let n = boost_step(&b, 0.0, V0, 1e-5);
        assert_eq!(n.i_s, 0.0);
        assert!((n.duty - 0.19).abs() < 1e-12);
    }

    #[test]
    fn boost_tracks_step_within_50ms() {
        // Reference step inside the unsaturated-duty range of the tracker.
        let dt = 1e-5;
        let i_ref = 2000.0;
        let mut b = StorageBoost::at_equilibrium(0.0012, 0.19, V0, 300e6, 200.0);
        let mut settled_at = None;
        for k in 0..10_000 {
            b = boost_step(&b, i_ref, V0, dt);
            let inside = (b.i_s - i_ref).abs() <= 0.02 * i_ref;
            match (inside, settled_at) {
                (true, None) => settled_at = Some(k),
                (false, Some(_)) => settled_at = None,
                _ => {}
            }
        }
        let t = settled_at.unwrap() as f64 * dt;
        assert!(t < 0.05, "settled at {t}");
    }

    #[test]
    fn boost_large_step_is_slew_limited_and_rated() {
        let dt = 1e-5;
        let mut b = StorageBoost::at_equilibrium(0.0012, 0.19, V0, 300e6, 200.0);
        b = boost_step(&b, 1e9, V0, dt);
        assert_eq!(b.duty, MAX_DUTY);
        let slope = (b.v_storage - (1.0 - MAX_DUTY) * V0) / b.l_boost;
        assert!((b.i_s - slope * dt).abs() < 1e-6);
        for _ in 0..200_000 {
            b = boost_step(&b, 1e9, V0, dt);
            assert!(b.i_s * V0 <= 300e6 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn machine_side_first_order() {
        let m0 = MachineSideSurrogate::new(0.0, 0.5, 800e6);
        let mut m = MachineSideSurrogate {
            p_in_ref: 800e6,
            ..m0
        };
        let dt = 1e-4;
        for _ in 0..5000 {
            m = machine_side_step(&m, dt);
        }
        assert!((m.p_in / 800e6 - (1.0 - (-1.0f64).exp())).abs() < 1e-9);

        let still = MachineSideSurrogate::new(300e6, 0.5, 800e6);
        assert_eq!(machine_side_step(&still, dt), still);

        let mut over = MachineSideSurrogate {
            p_in_ref: 2e9,
            ..still
        };
        for _ in 0..200_000 {
            over = machine_side_step(&over, dt);
        }
        assert!(over.p_in <= 800e6);
        assert!((over.p_in - 800e6).abs() < 1.0);
    }

    proptest! {
        #[test]
        fn dc_link_tracks_closed_form(dp in -1e8f64..1e8, steps in 1usize..2000) {
            let dt = 1e-3;
            let mut s = DcLinkState::new(V0, C);
            s.set_powers(dp.max(0.0), 0.0, (-dp).max(0.0));
            for _ in 0..steps { s = dc_link_step(&s, dt).unwrap(); }
            let t = steps as f64 * dt;
            let oracle = (V0 * V0 + 2.0 * dp * t / C).sqrt();
            prop_assert!((s.v_dc - oracle).abs() < 1e-9 * V0);
        }

        #[test]
        fn droop_opposes_voltage_error(dv in -0.2f64..0.2) {
            let mut g = gov(30.0, 0.0, 0.0);
            let i = governor_step(&mut g, dv, 1e-5);
            if dv != 0.0 { prop_assert_eq!(i.signum(), -dv.signum()); }
        }
    }
}
