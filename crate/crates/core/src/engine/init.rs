//! Starting the energized island in sinusoidal steady state.
//!
//! Every energized WPG holds its bus at the nominal flux magnitude. Their
//! angles are solved so each one delivers its mechanical input power, with
//! one unit taking up the mismatch: the first energized unit without
//! storage, else the first energized unit. If the angle solve fails the
//! start falls back to equal angles.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::Result;
use crate::network::{Network, Phasor, SteadyState};

use super::wpg::{StartMode, WpgParams};

const MAX_ITER: usize = 40;
const TOL: f64 = 1e-10;

fn sources(units: &[&WpgParams], angles: &[f64]) -> Vec<(u32, Phasor)> {
    units
        .iter()
        .zip(angles)
        .map(|(w, &a)| (w.bus, Complex::from_polar(w.nfscm.psi_nom, FRAC_PI_2 + a)))
        .collect()
}

/// Solves the steady operating point of the island formed by `buses`.
pub fn operating_point(net: &Network, buses: &[u32], wpgs: &[WpgParams], s_base: f64) -> Result<SteadyState> {
    let units: Vec<&WpgParams> = wpgs.iter().filter(|w| w.start == StartMode::Energized).collect();
    let flat = vec![0.0; units.len()];
    if units.len() < 2 {
        return net.steady_state(buses, &sources(&units, &flat));
    }
    let slack = units.iter().position(|w| !w.storage.enabled).unwrap_or(0);
    let others: Vec<usize> = (0..units.len()).filter(|&k| k != slack).collect();
    let target: Vec<f64> = others.iter().map(|&k| units[k].p_in_mw * 1e6 / s_base).collect();

    let residual = |x: &DVector<f64>| -> Result<(SteadyState, DVector<f64>)> {
        let mut angles = flat.clone();
        for (r, &k) in others.iter().enumerate() {
            angles[k] = x[r];
        }
        let ss = net.steady_state(buses, &sources(&units, &angles))?;
        let f = DVector::from_fn(others.len(), |r, _| {
            ss.power(units[others[r]].bus).map_or(0.0, |s| s.re) - target[r]
        });
        Ok((ss, f))
    };

    let mut x = DVector::zeros(others.len());
    for _ in 0..MAX_ITER {
        let (ss, f) = residual(&x)?;
        if f.amax() < TOL {
            return Ok(ss);
        }
        let h = 1e-7;
        let mut jac = DMatrix::zeros(others.len(), others.len());
        for c in 0..others.len() {
            let mut xp = x.clone();
            xp[c] += h;
            let (_, fp) = residual(&xp)?;
            jac.set_column(c, &((fp - &f) / h));
        }
        let Some(dx) = jac.lu().solve(&(-f)) else { break };
        x += dx;
        if x.amax() > FRAC_PI_2 {
            break;
        }
    }
    log::warn!("no steady operating point for the initial dispatch; starting with equal angles");
    net.steady_state(buses, &sources(&units, &flat))
}
