//! Sinusoidal steady state of the network at nominal frequency.
//!
//! Every element is linear at its operating point (loads are admittances,
//! magnetizing branches sit on their unsaturated segment), so with ideal
//! sources at some buses the remaining bus phasors follow from one complex
//! nodal solve. Phasors are peak-phase quantities for phase a; `x(t) =
//! Re(X e^{jωt})`, and flux is `V / j`.

use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix, DVector};

use crate::em::{polar_to_abc, ThreePhase};
use crate::error::{Error, Result};

use super::Network;

pub type Phasor = Complex<f64>;

const J: Phasor = Complex { re: 0.0, im: 1.0 };

fn abc(p: Phasor) -> ThreePhase {
    polar_to_abc(p.norm(), p.arg())
}

/// Solved operating point of an island.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// Bus voltage phasors, keyed by bus id.
    pub v: BTreeMap<u32, Phasor>,
    /// Current each source pushes into the network, keyed by bus id.
    pub injection: BTreeMap<u32, Phasor>,
}

impl SteadyState {
    /// Complex power delivered by the source at `bus`.
    pub fn power(&self, bus: u32) -> Option<Phasor> {
        Some(self.v.get(&bus)? * self.injection.get(&bus)?.conj())
    }
}

impl Network {
    /// Steady state of the island made of `buses` with ideal voltage
    /// `sources`. Elements reaching outside the island are ignored.
    pub fn steady_state(&self, buses: &[u32], sources: &[(u32, Phasor)]) -> Result<SteadyState> {
        let n = buses.len();
        let pos: BTreeMap<u32, usize> = buses.iter().enumerate().map(|(k, &b)| (b, k)).collect();
        let mut y = DMatrix::<Phasor>::zeros(n, n);
        let series = |y: &mut DMatrix<Phasor>, a: u32, b: u32, ys: Phasor| {
            if let (Some(&i), Some(&k)) = (pos.get(&a), pos.get(&b)) {
                y[(i, i)] += ys;
                y[(k, k)] += ys;
                y[(i, k)] -= ys;
                y[(k, i)] -= ys;
            }
        };
        let d = &self.desc;
        let st = &self.state;
        for (l, s) in d.lines.iter().zip(&st.lines) {
            if s.closed {
                series(&mut y, l.from, l.to, Complex::new(l.r, l.x).inv());
                for b in [l.from, l.to] {
                    if let Some(&i) = pos.get(&b) {
                        y[(i, i)] += J * (l.b / 2.0);
                    }
                }
            }
        }
        for (t, s) in d.transformers.iter().zip(&st.transformers) {
            if !s.closed {
                continue;
            }
            series(&mut y, t.lv_bus, t.hv_bus, Complex::new(t.r, t.x).inv());
            if let Some(&i) = pos.get(&t.lv_bus) {
                y[(i, i)] += -J / t.magnetizing.l_m0;
                if t.r_core > 0.0 {
                    y[(i, i)] += Complex::new(1.0 / t.r_core, 0.0);
                }
            }
        }
        let s_mva = self.s_base / 1e6;
        for (l, s) in d.loads.iter().zip(&st.loads) {
            if let (true, Some(&i)) = (s.in_service, pos.get(&l.bus)) {
                y[(i, i)] += Complex::new(l.p_mw, l.q_cap_mvar - l.q_ind_mvar) / s_mva;
            }
        }

        let mut fixed = vec![None; n];
        for &(b, v) in sources {
            let i = *pos
                .get(&b)
                .ok_or_else(|| Error::Config(vec![format!("source bus {b} outside the island")]))?;
            fixed[i] = Some(v);
        }
        let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
        let mut v: Vec<Phasor> = fixed.iter().map(|f| f.unwrap_or_default()).collect();
        if !free.is_empty() {
            let a = DMatrix::from_fn(free.len(), free.len(), |r, c| y[(free[r], free[c])]);
            let rhs = DVector::from_fn(free.len(), |r, _| {
                -(0..n)
                    .filter_map(|c| fixed[c].map(|vf| y[(free[r], c)] * vf))
                    .sum::<Phasor>()
            });
            let x = a.lu().solve(&rhs).ok_or_else(|| Error::SingularNetwork {
                buses: free.iter().map(|&i| buses[i]).collect(),
            })?;
            for (r, &i) in free.iter().enumerate() {
                v[i] = x[r];
            }
        }
        let injection = sources
            .iter()
            .map(|&(b, _)| {
                let i = pos[&b];
                (b, (0..n).map(|c| y[(i, c)] * v[c]).sum())
            })
            .collect();
        Ok(SteadyState {
            v: buses.iter().copied().zip(v).collect(),
            injection,
        })
    }

    /// Sets every element inside the solved island to its sinusoidal
    /// steady state at `t = 0`.
    pub fn seed_steady_state(&mut self, ss: &SteadyState) -> Result<()> {
        for (&b, &v) in &ss.v {
            self.set_bus_voltage(b, abc(v))?;
        }
        let at = |b: u32| ss.v.get(&b).copied();
        for (d, s) in self.desc.lines.iter().zip(self.state.lines.iter_mut()) {
            if let (true, Some(vf), Some(vt)) = (s.closed, at(d.from), at(d.to)) {
                s.i = abc((vf - vt) / Complex::new(d.r, d.x));
                s.i_cf = abc(J * (d.b / 2.0) * vf);
                s.i_ct = abc(J * (d.b / 2.0) * vt);
            }
        }
        let s_mva = self.s_base / 1e6;
        for (d, s) in self.desc.loads.iter().zip(self.state.loads.iter_mut()) {
            if let (true, Some(v)) = (s.in_service, at(d.bus)) {
                s.i_r = abc(v * (d.p_mw / s_mva));
                s.i_l = abc(-J * v * (d.q_ind_mvar / s_mva));
                s.i_c = abc(J * v * (d.q_cap_mvar / s_mva));
            }
        }
        for (d, s) in self.desc.transformers.iter().zip(self.state.transformers.iter_mut()) {
            let Some(vl) = at(d.lv_bus) else { continue };
            let psi = abc(vl / J);
            s.psi = psi;
            s.i_mag = psi.map(|p| d.magnetizing.current(p));
            s.segment = psi.to_array().map(|p| d.magnetizing.segment(p));
            s.i_core = if d.r_core > 0.0 { abc(vl / d.r_core) } else { ThreePhase::ZERO };
            if let (true, Some(vh)) = (s.closed, at(d.hv_bus)) {
                s.i = abc((vl - vh) / Complex::new(d.r, d.x));
            }
        }
        Ok(())
    }
}
