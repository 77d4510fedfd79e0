//! `fluxsync` command-line front end.
//!
//! Exit codes: 0 on success, 1 when a run stops on a numerical fault, an
//! acceptance check fails or an artifact cannot be written, 2 when the
//! configuration is invalid.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fluxsync::engine::ControllerKind;
use fluxsync::scenario::{compare_dirs, load_config, run_scenario, write_artifacts, ScenarioConfig};
use fluxsync::Error;

#[derive(Debug, Parser)]
#[command(name = "fluxsync", version, about = "EMT simulation of grid-forming wind generators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write timeseries.csv, metrics.json and config.toml.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        scenario: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Output directory [default: out/<scenario name>].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-channel differences between two run directories, as JSON.
    Compare { a: PathBuf, b: PathBuf },
    /// Run every acceptance check and print one line per check.
    Acceptance,
    /// Parse and validate a scenario without running it.
    Validate {
        scenario: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Debug, Args)]
struct Overrides {
    /// Time step, seconds.
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    /// End time, seconds.
    #[arg(long, allow_negative_numbers = true)]
    t_end: Option<f64>,
    /// Controller for every WPG.
    #[arg(long, value_parser = ["nfscm", "avscm"])]
    controller: Option<String>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ScenarioConfig) -> fluxsync::Result<()> {
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(t) = self.t_end {
            cfg.t_end = t;
        }
        if let Some(c) = &self.controller {
            cfg.set_controller(c.parse::<ControllerKind>().map_err(|e| Error::Config(vec![e]))?);
        }
        let errors = fluxsync::scenario::config::validate(cfg);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }
}

fn load(path: &std::path::Path, overrides: &Overrides) -> fluxsync::Result<ScenarioConfig> {
    let mut cfg = load_config(path)?;
    overrides.apply(&mut cfg)?;
    Ok(cfg)
}

fn execute(command: Command) -> fluxsync::Result<ExitCode> {
    match command {
        Command::Run { scenario, overrides, out } => {
            let cfg = load(&scenario, &overrides)?;
            let out = out.unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
            log::info!("running {} to t = {} s with dt = {} s", cfg.name, cfg.t_end, cfg.dt);
            let art = run_scenario(&cfg)?;
            write_artifacts(&out, &cfg, &art)?;
            println!("wrote {}", out.display());
            match &art.failure {
                Some(f) => {
                    eprintln!("run stopped at t = {:.6} s: {}", f.t, f.message);
                    Ok(ExitCode::from(1))
                }
                None => Ok(ExitCode::SUCCESS),
            }
        }
        Command::Compare { a, b } => {
            let cmp = compare_dirs(&a, &b)?;
            println!("{}", serde_json::to_string_pretty(&cmp)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Acceptance => {
            let report = fluxsync::acceptance::run_all()?;
            println!("{report}");
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Validate { scenario, overrides } => {
            let cfg = load(&scenario, &overrides)?;
            println!(
                "{}: ok ({} WPGs, {} events, dt = {} s, t_end = {} s)",
                cfg.name,
                cfg.wpg.len(),
                cfg.event.len(),
                cfg.dt,
                cfg.t_end
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
