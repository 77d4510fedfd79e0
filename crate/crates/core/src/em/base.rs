use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

/// Base quantities of the per-unit system.
///
/// AC quantities are expressed against *peak phase* bases, so a balanced
/// 1 p.u. voltage has phase amplitude 1 and three-phase instantaneous power
/// is `p = 2/3 * sum(v_j * i_j)` p.u. Flux uses `v_peak / omega_nom`, which
/// makes a 1 p.u. sinusoidal voltage integrate to a 1 p.u. flux amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerUnitBase {
    /// Base power, VA.
    pub s_base: f64,
    /// AC line-to-line RMS base voltage, V.
    pub v_base_ac: f64,
    /// DC base voltage, V.
    pub v_base_dc: f64,
    /// Nominal frequency, Hz.
    pub f_nom: f64,
}

impl Default for PerUnitBase {
    fn default() -> Self {
        Self {
            s_base: 889e6,
            v_base_ac: 575.0,
            v_base_dc: 1110.0,
            f_nom: 60.0,
        }
    }
}

impl PerUnitBase {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (name, v) in [
            ("s_base", self.s_base),
            ("v_base_ac", self.v_base_ac),
            ("v_base_dc", self.v_base_dc),
            ("f_nom", self.f_nom),
        ] {
            if !(v.is_finite() && v > 0.0) {
                errs.push(format!("base.{name} must be finite and > 0 (got {v})"));
            }
        }
        errs
    }

    /// Nominal angular frequency, rad/s.
    pub fn omega(&self) -> f64 {
        TAU * self.f_nom
    }

    /// Peak phase voltage base, V.
    pub fn v_peak(&self) -> f64 {
        self.v_base_ac * (2.0f64 / 3.0).sqrt()
    }

    /// Peak phase current base, A.
    pub fn i_peak(&self) -> f64 {
        2.0 * self.s_base / (3.0 * self.v_peak())
    }

    pub fn z_base(&self) -> f64 {
        self.v_peak() / self.i_peak()
    }

    /// Flux base, V*s.
    pub fn flux_base(&self) -> f64 {
        self.v_peak() / self.omega()
    }

    /// DC current base, A.
    pub fn i_dc_base(&self) -> f64 {
        self.s_base / self.v_base_dc
    }

    /// Converts a DC voltage in volts to AC per-unit (peak phase base).
    pub fn dc_volts_to_ac_pu(&self, v_dc: f64) -> f64 {
        v_dc / self.v_peak()
    }

    pub fn samples_per_cycle(&self, dt: f64) -> usize {
        (1.0 / (self.f_nom * dt)).round().max(1.0) as usize
    }
}
