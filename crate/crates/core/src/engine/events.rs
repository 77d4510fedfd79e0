//! Scheduled scenario events.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// Connects (or disconnects) a named load.
    LoadStep {
        load: String,
        #[serde(default = "yes")]
        connect: bool,
    },
    /// Three-phase-to-ground fault through `r_on` at `bus`.
    FaultOn {
        bus: u32,
        #[serde(default = "default_r_on")]
        r_on: f64,
    },
    FaultOff { bus: u32 },
    BreakerClose { branch: String },
    BreakerOpen { branch: String },
    /// New machine-side power reference for a WPG.
    SetpointChange { wpg: String, p_in_mw: f64 },
}

fn yes() -> bool {
    true
}

fn default_r_on() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub time: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// First step index whose time `step * dt` is at or after `time`.
pub fn event_step(time: f64, dt: f64) -> u64 {
    (time / dt - 1e-9).ceil().max(0.0) as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiredEvent {
    pub step: u64,
    pub t: f64,
    pub event: ScenarioEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Scheduled {
    pub step: u64,
    pub event: ScenarioEvent,
    pub fired: bool,
}

/// Orders events by firing step, keeping file order among equal steps.
pub(crate) fn schedule(events: &[ScenarioEvent], dt: f64) -> Vec<Scheduled> {
    let mut out: Vec<Scheduled> = events
        .iter()
        .map(|e| Scheduled {
            step: event_step(e.time, dt),
            event: e.clone(),
            fired: false,
        })
        .collect();
    out.sort_by_key(|s| s.step);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_steps() {
        assert_eq!(event_step(2.0, 10e-6), 200_000);
        assert_eq!(event_step(3.1, 10e-6), 310_000);
        assert_eq!(event_step(0.0, 10e-6), 0);
        assert_eq!(event_step(1.5e-5, 10e-6), 2);
        let on = event_step(3.1, 10e-6);
        let off = event_step(3.1833, 10e-6);
        assert_eq!(off - on, 8330);
    }

    #[test]
    fn schedule_is_stable() {
        let ev = |t: f64, b: u32| ScenarioEvent { time: t, kind: EventKind::FaultOff { bus: b } };
        let s = schedule(&[ev(2.0, 1), ev(1.0, 2), ev(2.0, 3)], 1e-5);
        let buses: Vec<u32> = s
            .iter()
            .map(|s| match s.event.kind {
                EventKind::FaultOff { bus } => bus,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(buses, vec![2, 1, 3]);
    }
}
