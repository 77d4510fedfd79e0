use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    #[error("metric not ready: {0}")]
    MetricNotReady(&'static str),

    #[error("DC-link collapse in {wpg}: v_dc^2 fell to {u:.3e} V^2")]
    DcLinkCollapse { wpg: String, u: f64 },

    #[error("singular nodal matrix: island {buses:?} has no path to ground")]
    SingularNetwork { buses: Vec<u32> },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("numerical fault at step {step} (t = {t:.6} s): {message}")]
    Numerical {
        step: u64,
        t: f64,
        message: String,
        /// JSON dump of the simulation state at the failing step.
        snapshot: Box<String>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Toml(_) | Error::SingularNetwork { .. })
    }
}
