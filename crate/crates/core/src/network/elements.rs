//! Element laws: the saturable magnetizing curve, shunt faults, and the
//! trapezoidal companion coefficients shared by the nodal solver.

use serde::{Deserialize, Serialize};

/// Odd piecewise-linear magnetizing characteristic, per-unit.
///
/// `l_m0` and `l_ms` are per-unit inductances (equal to reactances at
/// nominal frequency); current is `psi / l_m0` inside the knee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnetizingCurve {
    pub l_m0: f64,
    pub psi_knee: f64,
    pub l_ms: f64,
}

impl Default for MagnetizingCurve {
    fn default() -> Self {
        Self {
            l_m0: 500.0,
            psi_knee: 1.2,
            l_ms: 0.3,
        }
    }
}

impl MagnetizingCurve {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.l_ms > 0.0 && self.l_m0 > self.l_ms && self.l_m0.is_finite()) {
            errs.push(format!("{prefix}: requires l_m0 > l_ms > 0"));
        }
        if !(self.psi_knee > 0.0 && self.psi_knee.is_finite()) {
            errs.push(format!("{prefix}.psi_knee must be > 0"));
        }
        errs
    }

    /// Segment index: -1 below `-psi_knee`, 1 above `psi_knee`, else 0.
    pub fn segment(&self, psi: f64) -> i8 {
        if psi > self.psi_knee {
            1
        } else if psi < -self.psi_knee {
            -1
        } else {
            0
        }
    }

    /// Segment line `i = offset + psi / inductance`.
    pub fn segment_line(&self, seg: i8) -> (f64, f64) {
        let c = self.psi_knee / self.l_m0 - self.psi_knee / self.l_ms;
        match seg {
            0 => (0.0, self.l_m0),
            s if s > 0 => (c, self.l_ms),
            _ => (-c, self.l_ms),
        }
    }

    pub fn current(&self, psi: f64) -> f64 {
        let (c, l) = self.segment_line(self.segment(psi));
        c + psi / l
    }
}

/// Per-unit magnetizing current for flux `psi` on `curve`.
pub fn magnetizing_current(curve: &MagnetizingCurve, psi: f64) -> f64 {
    curve.current(psi)
}

/// Three-phase-to-ground shunt fault through `r_on`, commanded on over
/// `[t_on, t_off)`. Like a breaker, each phase clears at the first current
/// zero after the command drops rather than chopping the current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultElement {
    pub bus: u32,
    pub r_on: f64,
    pub t_on: f64,
    pub t_off: f64,
    #[serde(default)]
    pub active: bool,
    /// Per-phase contact state.
    #[serde(default)]
    pub closed: [bool; 3],
    /// Per-phase current at the last solve.
    #[serde(default)]
    pub i: [f64; 3],
}

impl FaultElement {
    /// Fault on `[t_on, t_off)`, initially open.
    pub fn new(bus: u32, r_on: f64, t_on: f64, t_off: f64) -> Self {
        Self {
            bus,
            r_on,
            t_on,
            t_off,
            active: false,
            closed: [false; 3],
            i: [0.0; 3],
        }
    }

    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.r_on > 0.0) {
            errs.push(format!("{prefix}.r_on must be > 0"));
        }
        if !(self.t_off > self.t_on) {
            errs.push(format!("{prefix}: t_off must exceed t_on"));
        }
        errs
    }

    /// Records the solved phase current; a clearing phase opens once its
    /// current reaches or crosses zero.
    pub fn record(&mut self, ph: usize, i: f64) {
        if !self.active && self.i[ph] * i <= 0.0 {
            self.closed[ph] = false;
        }
        self.i[ph] = if self.closed[ph] { i } else { 0.0 };
    }
}

/// Slack on event-time comparisons so `step * dt` round-off does not move a
/// switching instant by a whole step.
pub const TIME_EPS: f64 = 1e-9;

/// Returns the fault with `active` set for time `t`.
pub fn apply_fault(fault: &FaultElement, t: f64) -> FaultElement {
    let mut f = fault.clone();
    f.active = t + TIME_EPS >= fault.t_on && t + TIME_EPS < fault.t_off;
    if f.active {
        f.closed = [true; 3];
    }
    f
}


/// Series R-L companion: `i1 = g * v1 + history`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SeriesRl {
    pub k: f64,
    pub g: f64,
    pub r: f64,
}

impl SeriesRl {
    pub fn new(r: f64, x: f64, omega: f64, dt: f64) -> Self {
        let k = 2.0 * x / (omega * dt);
        Self { k, g: 1.0 / (r + k), r }
    }

    pub fn history(&self, v0: f64, i0: f64) -> f64 {
        self.g * (v0 + (self.k - self.r) * i0)
    }
}

/// Conductance of a shunt capacitor of susceptance `b`; history is `-(g v0 + i0)`.
pub(crate) fn cap_conductance(b: f64, omega: f64, dt: f64) -> f64 {
    2.0 * b / (omega * dt)
}

/// Conductance of a shunt inductor of reactance `x`; history is `g v0 + i0`.
pub(crate) fn ind_conductance(x: f64, omega: f64, dt: f64) -> f64 {
    omega * dt / (2.0 * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn magnetizing_examples() {
        let c = MagnetizingCurve::default();
        assert_eq!(magnetizing_current(&c, 0.0), 0.0);
        assert!((magnetizing_current(&c, 1.2) - 0.0024).abs() < 1e-15);
        let oracle = 1.2 / 500.0 + 0.8 / 0.3;
        assert!((magnetizing_current(&c, 2.0) - oracle).abs() < 1e-12);
        assert!((magnetizing_current(&c, 2.0) - 2.669).abs() < 1e-3);
    }

    #[test]
    fn fault_window() {
        let f = FaultElement::new(5, 1e-4, 3.1, 3.1833);
        assert!(!apply_fault(&f, 3.0).active);
        assert!(apply_fault(&f, 3.1).active);
        assert!(apply_fault(&f, 3.18).active);
        assert!(!apply_fault(&f, 3.1833).active);
        assert!(!apply_fault(&f, 3.2).active);
    }

    #[test]
    fn clearing_waits_for_current_zero() {
        let mut f = FaultElement {
            bus: 5,
            r_on: 1e-4,
            t_on: 0.0,
            t_off: 1.0,
            active: true,
            closed: [true; 3],
            i: [0.0; 3],
        };
        f.record(0, 2.0);
        f.active = false;
        f.record(0, 1.0);
        assert!(f.closed[0]);
        f.record(0, -0.1);
        assert!(!f.closed[0]);
        assert_eq!(f.i[0], 0.0);
        f.record(0, 3.0);
        assert!(!f.closed[0]);
    }

    proptest! {
        #[test]
        fn magnetizing_is_odd_monotone_continuous(psi in -5.0f64..5.0, d in 1e-6f64..0.1) {
            let c = MagnetizingCurve::default();
            prop_assert_eq!(c.current(-psi), -c.current(psi));
            prop_assert!(c.current(psi + d) > c.current(psi));
            // slope never exceeds the saturated one
            prop_assert!(c.current(psi + d) - c.current(psi) <= d / c.l_ms * (1.0 + 1e-9));
        }

        #[test]
        fn segment_lines_agree_at_knee(l_m0 in 10.0f64..1000.0, knee in 0.5f64..2.0, l_ms in 0.05f64..5.0) {
            let c = MagnetizingCurve { l_m0, psi_knee: knee, l_ms };
            for s in [-1i8, 1] {
                let (off, l) = c.segment_line(s);
                let psi = knee * f64::from(s);
                prop_assert!((off + psi / l - psi / l_m0).abs() < 1e-12);
            }
        }
    }
}
