//! First-order bang-bang funnel current control.
//!
//! Each phase keeps a latched logic output `q`: it sets when the current
//! error reaches the upper bound, clears when it falls to the lower bound,
//! and holds in between. A set latch opens the upper switch.

use serde::{Deserialize, Serialize};

use crate::em::ThreePhase;
use crate::inverter::SwitchState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunnelParams {
    pub phi_plus: f64,
    pub phi_minus: f64,
}

impl Default for FunnelParams {
    fn default() -> Self {
        Self {
            phi_plus: 0.3,
            phi_minus: -0.3,
        }
    }
}

impl FunnelParams {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        if self.phi_minus < 0.0 && 0.0 < self.phi_plus {
            Vec::new()
        } else {
            vec![format!("{prefix}: requires phi_minus < 0 < phi_plus")]
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FunnelState {
    pub e: ThreePhase,
    pub q: [bool; 3],
}

/// `q = (e >= phi_plus) or (e > phi_minus and q_prev)`.
pub fn lbfc_logic(e: f64, phi_plus: f64, phi_minus: f64, q_prev: bool) -> bool {
    e >= phi_plus || (e > phi_minus && q_prev)
}

/// Upper-arm command for a latch output: set latch opens the switch.
pub fn lbfc_control(q: bool) -> bool {
    !q
}

/// One funnel update driving the inductor currents toward `i_ref`.
pub fn lbfc_step(
    state: &FunnelState,
    p: &FunnelParams,
    i_l: ThreePhase,
    i_ref: ThreePhase,
) -> (FunnelState, SwitchState) {
    let e = i_l - i_ref;
    let mut q = [false; 3];
    for ph in 0..3 {
        q[ph] = lbfc_logic(e[ph], p.phi_plus, p.phi_minus, state.q[ph]);
    }
    let s = SwitchState::from_array(q.map(lbfc_control));
    (FunnelState { e, q }, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    #[test]
    fn logic_examples() {
        for prev in [false, true] {
            assert!(lbfc_logic(0.35, 0.3, -0.3, prev));
            assert!(!lbfc_logic(-0.35, 0.3, -0.3, prev));
            assert_eq!(lbfc_logic(0.0, 0.3, -0.3, prev), prev);
        }
        // boundary values: the upper bound sets, the lower bound clears
        assert!(lbfc_logic(0.3, 0.3, -0.3, false));
        assert!(!lbfc_logic(-0.3, 0.3, -0.3, true));
    }

    #[test]
    fn truth_table_matches_region_rule() {
        for (e, prev) in [(-1.0, false), (-1.0, true), (0.1, false), (0.1, true), (1.0, false), (1.0, true)] {
            let region = if e >= 0.3 { Some(true) } else if e <= -0.3 { Some(false) } else { None };
            assert_eq!(lbfc_logic(e, 0.3, -0.3, prev), region.unwrap_or(prev));
        }
    }

    #[test]
    fn control_examples() {
        assert!(!lbfc_control(true));
        assert!(lbfc_control(false));
    }

    proptest! {
        #[test]
        fn latch_is_constant_inside_funnel(e in -0.29f64..0.29, q0: bool, n in 1usize..50) {
            let mut q = q0;
            for _ in 0..n {
                q = lbfc_logic(e, 0.3, -0.3, q);
                prop_assert_eq!(q, q0);
            }
        }

        /// Half-bridge on an R-L branch against a sinusoidal back-EMF, with
        /// the current error driven to zero.
        #[test]
        fn funnel_contains_error_after_entry(
            v_dc in 2.0f64..3.0,
            emf in 0.0f64..0.8,
            x in 0.1f64..0.3,
            r in 0.0f64..0.01,
            i0 in -3.0f64..3.0,
            dt in prop::sample::select(vec![5e-6, 1e-5, 2e-5]),
        ) {
            let w = TAU * 60.0;
            let p = FunnelParams::default();
            let slope = w * (v_dc / 2.0 + emf + r * 3.0) / x;
            let delta = dt * slope;
            let mut i = i0;
            let mut q = false;
            let mut entered = false;
            for k in 0..20_000 {
                q = lbfc_logic(i, p.phi_plus, p.phi_minus, q);
                let v = if lbfc_control(q) { v_dc / 2.0 } else { -v_dc / 2.0 };
                let back = emf * (w * k as f64 * dt).sin();
                i += w * dt / x * (v - r * i - back);
                if (p.phi_minus..=p.phi_plus).contains(&i) {
                    entered = true;
                }
                if entered {
                    prop_assert!(i >= p.phi_minus - delta && i <= p.phi_plus + delta, "i = {}", i);
                }
            }
            prop_assert!(entered);
        }
    }
}
