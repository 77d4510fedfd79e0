//! Turning a validated scenario into a ready-to-run simulation.

use crate::engine::{run, RunArtifacts, SimOptions, Simulation};
use crate::error::{Error, Result};
use crate::network::Network;

use super::config::ScenarioConfig;

pub fn build(cfg: &ScenarioConfig) -> Result<Simulation> {
    let desc = cfg
        .resolved_network
        .clone()
        .ok_or_else(|| Error::Config(vec!["scenario has no resolved network".into()]))?;
    let net = Network::new(desc, cfg.base.f_nom, cfg.base.s_base)?;
    Simulation::new(
        cfg.base,
        net,
        cfg.wpg.clone(),
        &cfg.event,
        SimOptions {
            dt: cfg.dt,
            decimation: cfg.recorder.decimation,
            record_buses: cfg.recorder.buses.clone(),
            windows: cfg.metrics.window.clone(),
        },
    )
}

/// Builds and runs a scenario to its configured end time.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunArtifacts> {
    Ok(run(build(cfg)?, cfg.t_end))
}
