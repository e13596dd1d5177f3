use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Long-run behaviour of a queue whose load is at or above capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVerdict {
    PositiveRecurrent,
    NullRecurrent,
    Transient,
}

impl StabilityVerdict {
    /// Three-way verdict from a traffic intensity: `< 1`, `= 1`, `> 1`.
    pub fn from_load(rho: f64) -> Self {
        if (rho - 1.0).abs() <= 1e-12 {
            StabilityVerdict::NullRecurrent
        } else if rho < 1.0 {
            StabilityVerdict::PositiveRecurrent
        } else {
            StabilityVerdict::Transient
        }
    }
}

impl fmt::Display for StabilityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StabilityVerdict::PositiveRecurrent => "positive recurrent",
            StabilityVerdict::NullRecurrent => "null recurrent",
            StabilityVerdict::Transient => "transient",
        };
        f.write_str(s)
    }
}

/// One schema problem found in a model file, addressed by a JSON path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("chain is reducible; communication classes: {classes:?}")]
    Reducible { classes: Vec<Vec<usize>> },

    #[error("unstable system (load {load:.6}): {verdict}")]
    Unstable { load: f64, verdict: StabilityVerdict },

    #[error("process is not ergodic: {0}")]
    NotErgodic(String),

    #[error("singular linear system (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("iteration did not converge after {iterations} steps")]
    NonConvergence { iterations: usize },

    #[error("tail mass {tail:e} exceeds the requested precision {tol:e}")]
    TailTooLarge { tail: f64, tol: f64 },

    #[error("unsupported model kind for this operation: {0}")]
    Unsupported(String),

    #[error("schema violations: {}", format_violations(.0))]
    Schema(Vec<Violation>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!("{name} must be positive and finite, got {value}")))
    }
}
