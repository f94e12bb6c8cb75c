use thiserror::Error;

/// Errors raised by the laboratory's operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("enumeration budget exceeded: n = {n} > {max}")]
    Budget { n: u32, max: u32 },

    #[error("power iteration did not converge in {iterations} iterations (best estimate {best})")]
    Convergence { best: f64, iterations: usize },

    #[error("triangle inequality violated in trial {trial}: |G| = {g} > |R| + |Z| = {sum}")]
    Triangle { trial: u64, g: f64, sum: f64 },
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::Parameter(msg.into()))
}
