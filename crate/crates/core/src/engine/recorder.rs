//! Decimated time-series recording.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recorder {
    pub decimation: u64,
    /// Column names; the first is `time_s`.
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Recorder {
    pub fn new(decimation: u64, channels: Vec<String>) -> Self {
        let mut names = vec!["time_s".to_string()];
        names.extend(channels);
        Self {
            decimation: decimation.max(1),
            names,
            rows: Vec::new(),
        }
    }

    pub fn due(&self, step: u64) -> bool {
        step.is_multiple_of(self.decimation)
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.names.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}
