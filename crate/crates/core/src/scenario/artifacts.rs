//! Run artifacts on disk: `timeseries.csv`, `metrics.json` and
//! `config.toml`.
//!
//! The CSV starts with `# ` comment lines, then a header row (`time_s` and
//! channel names carrying their units), then one row per recorded step.
//! Values are written in the shortest decimal form that parses back to the
//! identical `f64`. Every file is written to a temporary sibling and renamed
//! into place, so a failed write never leaves a truncated artifact under the
//! final name.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{FiredEvent, Failure, Metrics, RunArtifacts};
use crate::error::{Error, Result};

use super::config::ScenarioConfig;

pub const CSV_NAME: &str = "timeseries.csv";
pub const METRICS_NAME: &str = "metrics.json";
pub const CONFIG_NAME: &str = "config.toml";

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp: PathBuf = dir.join(format!(".{name}.partial"));
    let result = (|| -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn csv_bytes(channels: &[String], rows: &[Vec<f64>], scenario: &str) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "# scenario: {scenario}")?;
    writeln!(out, "# values: shortest round-trip decimal representation of f64")?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(channels)?;
        let mut rec = Vec::with_capacity(channels.len());
        for r in rows {
            rec.clear();
            rec.extend(r.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeseries {
    pub channels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Timeseries {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.channels.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn read_csv(path: &Path) -> Result<Timeseries> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let channels: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Config(vec![format!("{}: bad number {s:?}: {e}", path.display())]))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Timeseries { channels, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub scenario: String,
    pub dt: f64,
    pub t_end: f64,
    pub metrics: Metrics,
    pub events: Vec<FiredEvent>,
    pub failure: Option<Failure>,
    /// Resolved configuration the run used.
    pub config: ScenarioConfig,
}

/// Writes all artifacts of a run into `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, cfg: &ScenarioConfig, art: &RunArtifacts) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_atomic(&dir.join(CSV_NAME), &csv_bytes(&art.channels, &art.rows, &cfg.name)?)?;
    let m = MetricsFile {
        scenario: cfg.name.clone(),
        dt: art.dt,
        t_end: art.t_end,
        metrics: art.metrics.clone(),
        events: art.events.clone(),
        failure: art.failure.clone(),
        config: cfg.clone(),
    };
    write_atomic(&dir.join(METRICS_NAME), &serde_json::to_vec_pretty(&m)?)?;
    write_atomic(&dir.join(CONFIG_NAME), cfg.to_toml()?.as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDiff {
    pub max_abs: f64,
    pub rms: f64,
    /// Time of the largest difference.
    pub at_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows_compared: usize,
    pub channels: BTreeMap<String, ChannelDiff>,
    pub only_in_a: Vec<String>,
    pub only_in_b: Vec<String>,
    /// Rows whose timestamps disagree.
    pub time_mismatches: usize,
}

/// Per-channel differences between two timeseries, row by row.
pub fn compare(a: &Timeseries, b: &Timeseries) -> Comparison {
    let n = a.rows.len().min(b.rows.len());
    let ta = a.column("time_s").unwrap_or_default();
    let tb = b.column("time_s").unwrap_or_default();
    let time_mismatches = (0..n).filter(|&i| ta.get(i) != tb.get(i)).count();
    let mut channels = BTreeMap::new();
    for (ia, name) in a.channels.iter().enumerate() {
        if name == "time_s" {
            continue;
        }
        let Some(ib) = b.channels.iter().position(|c| c == name) else { continue };
        let (mut max_abs, mut sq, mut at_time) = (0.0f64, 0.0, 0.0);
        for i in 0..n {
            let d = (a.rows[i][ia] - b.rows[i][ib]).abs();
            sq += d * d;
            if d > max_abs {
                max_abs = d;
                at_time = ta.get(i).copied().unwrap_or(f64::NAN);
            }
        }
        let rms = if n > 0 { (sq / n as f64).sqrt() } else { 0.0 };
        channels.insert(name.clone(), ChannelDiff { max_abs, rms, at_time });
    }
    Comparison {
        rows_compared: n,
        channels,
        only_in_a: a.channels.iter().filter(|c| !b.channels.contains(c)).cloned().collect(),
        only_in_b: b.channels.iter().filter(|c| !a.channels.contains(c)).cloned().collect(),
        time_mismatches,
    }
}

/// Compares the timeseries of two artifact directories.
pub fn compare_dirs(a: &Path, b: &Path) -> Result<Comparison> {
    Ok(compare(&read_csv(&a.join(CSV_NAME))?, &read_csv(&b.join(CSV_NAME))?))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &serde_json::to_vec_pretty(value)?)
}
