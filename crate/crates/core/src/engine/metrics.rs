//! Full-rate metric collection.
//!
//! Cycle-based metrics use consecutive fundamental periods counted from
//! `t = 0`; each entry is stamped with the time at the end of its cycle.
//!
//! - `dc_ratio`: for the PCC output currents, `|cycle mean| / fundamental
//!   amplitude` (single-bin DFT over the cycle), maximum over phases. Cycles
//!   whose fundamental is below 0.01 p.u. carry no meaningful ratio and are
//!   skipped.
//! - `v_dc_cycle_mean`: cycle mean of the DC-link voltage, volts.
//! - `sync`: largest pairwise difference of the cycle means over all WPGs,
//!   per-unit of nominal DC voltage.
//! - transformer `zero_sequence`: largest `|(psi_a + psi_b + psi_c) / 3|`
//!   within the cycle.
//! - `peak_i_l`: largest inductor phase-current magnitude.
//! - `funnel_entries` / `post_entry_peak_i_l`: after each funnel engagement,
//!   the first step with every phase error inside the funnel bounds, and the
//!   largest inductor current seen from then on until the funnel releases the
//!   switches. One peak per entry, stamped with the entry time;
//!   `post_entry_window_peak_i_l` gathers the same quantity per window.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::control::{Mode, Transition};
use crate::em::CycleWindow;
use crate::network::Network;

use super::wpg::Wpg;

/// Named time interval over which window peaks are gathered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricWindow {
    pub name: String,
    pub start: f64,
    pub end: f64,
}

impl MetricWindow {
    fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }
}

/// Time-stamped value.
pub type Sample = [f64; 2];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WpgMetrics {
    pub name: String,
    pub peak_i_l: f64,
    pub peak_i_l_time: f64,
    pub window_peak_i_l: BTreeMap<String, f64>,
    /// Times where the largest inductor current rose through `gamma`.
    pub gamma_crossings: Vec<f64>,
    pub lbfc_engagements: Vec<f64>,
    pub lbfc_recoveries: Vec<f64>,
    /// Engagement time minus the latest preceding gamma crossing.
    pub engagement_delays: Vec<f64>,
    pub funnel_entries: Vec<f64>,
    pub post_entry_peak_i_l: Vec<Sample>,
    pub post_entry_window_peak_i_l: BTreeMap<String, f64>,
    pub dc_ratio: Vec<Sample>,
    pub v_dc_cycle_mean: Vec<Sample>,
    pub v_dc_min: f64,
    pub v_dc_min_time: f64,
    pub v_dc_max: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformerMetrics {
    pub name: String,
    /// Largest LV-side phase current.
    pub peak_current: f64,
    pub window_peak_current: BTreeMap<String, f64>,
    pub peak_flux: f64,
    pub zero_sequence: Vec<Sample>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub wpgs: Vec<WpgMetrics>,
    pub transformers: Vec<TransformerMetrics>,
    pub sync: Vec<Sample>,
    pub max_kcl_residual: f64,
}

impl Metrics {
    pub fn wpg(&self, name: &str) -> Option<&WpgMetrics> {
        self.wpgs.iter().find(|w| w.name == name)
    }

    pub fn transformer(&self, name: &str) -> Option<&TransformerMetrics> {
        self.transformers.iter().find(|t| t.name == name)
    }
}

/// First sample at or after `t`.
pub fn value_at(series: &[Sample], t: f64) -> Option<f64> {
    series.iter().find(|s| s[0] >= t).map(|s| s[1])
}

/// Largest sample value with time in `[from, to]`.
pub fn max_between(series: &[Sample], from: f64, to: f64) -> Option<f64> {
    series
        .iter()
        .filter(|s| s[0] >= from && s[0] <= to)
        .map(|s| s[1])
        .reduce(f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WpgCollector {
    m: WpgMetrics,
    i_out: [CycleWindow; 3],
    v_dc: CycleWindow,
    above_gamma: bool,
    in_entry: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TransformerCollector {
    m: TransformerMetrics,
    cycle_zero_seq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Collectors {
    windows: Vec<MetricWindow>,
    per_cycle: u64,
    wpgs: Vec<WpgCollector>,
    transformers: Vec<TransformerCollector>,
    sync: Vec<Sample>,
    max_kcl_residual: f64,
    v_dc_nom: f64,
}

impl Collectors {
    pub fn new(windows: Vec<MetricWindow>, f_nom: f64, dt: f64, v_dc_nom: f64, wpgs: &[Wpg], net: &Network) -> Self {
        let w = CycleWindow::new(f_nom, dt);
        let empty = |names: &[MetricWindow]| names.iter().map(|x| (x.name.clone(), 0.0)).collect();
        Self {
            per_cycle: w.len() as u64,
            wpgs: wpgs
                .iter()
                .map(|g| WpgCollector {
                    m: WpgMetrics {
                        name: g.params.name.clone(),
                        window_peak_i_l: empty(&windows),
                        v_dc_min: g.dc.v_dc,
                        v_dc_max: g.dc.v_dc,
                        ..Default::default()
                    },
                    i_out: [w.clone(), w.clone(), w.clone()],
                    v_dc: w.clone(),
                    above_gamma: false,
                    in_entry: false,
                })
                .collect(),
            transformers: net
                .desc()
                .transformers
                .iter()
                .map(|t| TransformerCollector {
                    m: TransformerMetrics {
                        name: t.name.clone(),
                        window_peak_current: empty(&windows),
                        ..Default::default()
                    },
                    cycle_zero_seq: 0.0,
                })
                .collect(),
            windows,
            sync: Vec::new(),
            max_kcl_residual: 0.0,
            v_dc_nom,
        }
    }

    /// Observes the committed state at `step` (time `t`).
    pub fn observe(&mut self, step: u64, t: f64, wpgs: &[Wpg], net: &Network) {
        self.max_kcl_residual = self.max_kcl_residual.max(net.state.kcl_residual);
        let cycle_end = step.is_multiple_of(self.per_cycle);
        for (c, g) in self.wpgs.iter_mut().zip(wpgs) {
            let i_l = g.inverter.i_l;
            let peak = i_l.max_abs();
            let m = &mut c.m;
            if peak > m.peak_i_l {
                m.peak_i_l = peak;
                m.peak_i_l_time = t;
            }
            for win in self.windows.iter().filter(|w| w.contains(t)) {
                let e = m.window_peak_i_l.entry(win.name.clone()).or_insert(0.0);
                *e = e.max(peak);
            }
            let gamma = g.params.switching.gamma;
            if peak >= gamma && !c.above_gamma {
                m.gamma_crossings.push(t);
            }
            c.above_gamma = peak >= gamma;
            match g.transition() {
                Transition::Engaged => {
                    m.lbfc_engagements.push(t);
                    if let Some(&cross) = m.gamma_crossings.last() {
                        m.engagement_delays.push(t - cross);
                    }
                    c.in_entry = false;
                }
                Transition::Recovered => m.lbfc_recoveries.push(t),
                Transition::None => {}
            }
            if g.mode() == Mode::Lbfc {
                if let Some(e) = g.funnel_error() {
                    let f = &g.params.funnel;
                    let inside = e.to_array().iter().all(|x| *x >= f.phi_minus && *x <= f.phi_plus);
                    if !c.in_entry && inside {
                        c.in_entry = true;
                        m.funnel_entries.push(t);
                        m.post_entry_peak_i_l.push([t, peak]);
                    }
                }
                if c.in_entry {
                    if let Some(last) = m.post_entry_peak_i_l.last_mut() {
                        last[1] = last[1].max(peak);
                    }
                    for win in self.windows.iter().filter(|w| w.contains(t)) {
                        let e = m.post_entry_window_peak_i_l.entry(win.name.clone()).or_insert(0.0);
                        *e = e.max(peak);
                    }
                }
            }
            let v = g.dc.v_dc;
            if v < m.v_dc_min {
                m.v_dc_min = v;
                m.v_dc_min_time = t;
            }
            m.v_dc_max = m.v_dc_max.max(v);
            if step > 0 {
                let i_out = g.inverter.i_out();
                for ph in 0..3 {
                    c.i_out[ph].push(i_out[ph]);
                }
                c.v_dc.push(v);
            }
            if cycle_end && step > 0 {
                if let Some(r) = dc_ratio(&c.i_out) {
                    m.dc_ratio.push([t, r]);
                }
                if let Some(mean) = c.v_dc.mean() {
                    m.v_dc_cycle_mean.push([t, mean]);
                }
            }
        }
        if cycle_end && step > 0 && !self.wpgs.is_empty() {
            let means: Vec<f64> = self
                .wpgs
                .iter()
                .filter_map(|c| c.m.v_dc_cycle_mean.last().map(|s| s[1]))
                .collect();
            let hi = means.iter().copied().fold(f64::MIN, f64::max);
            let lo = means.iter().copied().fold(f64::MAX, f64::min);
            self.sync.push([t, (hi - lo) / self.v_dc_nom]);
        }
        for (c, st) in self.transformers.iter_mut().zip(&net.state.transformers) {
            let i = st.i_lv().max_abs();
            c.m.peak_current = c.m.peak_current.max(i);
            for win in self.windows.iter().filter(|w| w.contains(t)) {
                let e = c.m.window_peak_current.entry(win.name.clone()).or_insert(0.0);
                *e = e.max(i);
            }
            c.m.peak_flux = c.m.peak_flux.max(st.psi.max_abs());
            c.cycle_zero_seq = c.cycle_zero_seq.max(st.psi.zero_sequence().abs());
            if cycle_end && step > 0 {
                c.m.zero_sequence.push([t, c.cycle_zero_seq]);
                c.cycle_zero_seq = 0.0;
            }
        }
    }

    pub fn snapshot(&self) -> Metrics {
        Metrics {
            wpgs: self.wpgs.iter().map(|c| c.m.clone()).collect(),
            transformers: self.transformers.iter().map(|c| c.m.clone()).collect(),
            sync: self.sync.clone(),
            max_kcl_residual: self.max_kcl_residual,
        }
    }
}

fn dc_ratio(w: &[CycleWindow; 3]) -> Option<f64> {
    let mut worst: f64 = 0.0;
    for win in w {
        let fundamental = win.fundamental_amplitude().ok()?;
        if fundamental < 0.01 {
            return None;
        }
        worst = worst.max(win.mean()?.abs() / fundamental);
    }
    Some(worst)
}

