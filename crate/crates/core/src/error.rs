use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error in `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// A Lyapunov weight has a zero gain in its denominator.
    #[error("zero gain `{0}` in V1; use the W-only monitor (objective) for this controller")]
    ZeroGain(&'static str),

    #[error("integration blew up at t = {t}: {reason}")]
    Blowup { t: f64, reason: String },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("Fock truncation too small: {0}")]
    Truncation(String),

    #[error("unphysical bath: n = {0} < 0")]
    UnphysicalBath(f64),

    #[error("oracle integrity failure at t = {t}: {reason}")]
    OracleIntegrity { t: f64, reason: String },
}

pub(crate) fn ensure_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{name} has a non-finite component"
        )))
    }
}

pub(crate) fn config_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}
