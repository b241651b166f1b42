//! Errors with process exit codes.

use std::fmt;

use serde::Serialize;

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_VERDICT: i32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn config(message: String) -> Self {
        Self {
            code: EXIT_CONFIG,
            kind: "config",
            message,
        }
    }

    pub fn convergence(message: String) -> Self {
        Self {
            code: EXIT_NO_CONVERGENCE,
            kind: "no-convergence",
            message,
        }
    }

    pub fn verdict(message: String) -> Self {
        Self {
            code: EXIT_VERDICT,
            kind: "verdict",
            message,
        }
    }

    pub fn runtime(message: String) -> Self {
        Self {
            code: EXIT_RUNTIME,
            kind: "runtime",
            message,
        }
    }

    pub fn io(e: std::io::Error, what: &str) -> Self {
        Self::runtime(format!("{what}: {e}"))
    }

    /// JSON object printed on stderr.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<bstable::Error> for CliError {
    fn from(e: bstable::Error) -> Self {
        use bstable::Error::*;
        match e {
            NoConvergence { .. } => Self::convergence(e.to_string()),
            InvalidMotion(_)
            | InvalidOffspring(_)
            | Infeasible { .. }
            | UnsupportedRegime(_)
            | Supercritical(_) => Self::config(e.to_string()),
            Domain(_) | InsufficientData(_) => Self::runtime(e.to_string()),
        }
    }
}
