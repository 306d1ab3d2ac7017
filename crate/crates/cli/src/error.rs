use std::fmt;

use qdsps_core::Error as CoreError;
use serde::Serialize;
use thiserror::Error;

/// A configuration value that a scenario cannot accept.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

impl Violation {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Violation for a kernel error raised while checking `section`.
    /// Parameter names the kernel already qualifies are kept as they are.
    pub fn from_core(section: &str, e: &CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { name, reason } => Self::new(config_key(section, name), reason.clone()),
            CoreError::StepSize { .. } => Self::new("pulse.grid_dt_ps", format!("{e} (dt ≤ min(0.05/Ω_max, 0.02/γ))")),
            CoreError::GridTooCoarse(_) => Self::new("pulse.grid_n", e.to_string()),
            other => Self::new(section, other.to_string()),
        }
    }
}

/// Config key for a kernel parameter name. Kernel names under a section of
/// their own (`emitter.gamma`) are kept; generic ones are placed under
/// `section`.
fn config_key(section: &str, name: &str) -> String {
    match name.split_once('.') {
        Some(("grid", "n")) => "pulse.grid_n".into(),
        Some(("grid", "dt")) => "pulse.grid_dt_ps".into(),
        Some(("filter", _)) => "pulse.widths_ghz".into(),
        Some(("cavity", "center_offset")) => "cavity.center_offset_ghz".into(),
        Some(("train" | "dbr", rest)) => format!("{section}.{rest}"),
        Some(_) => name.into(),
        None => format!("{section}.{name}"),
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("{} precondition violation(s):\n{}", .0.len(), list(.0))]
    Precondition(Vec<Violation>),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("output error: {0}")]
    Output(#[from] std::io::Error),
}

fn list(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::UnknownScenario(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Numerical(_) | CliError::Output(_) => 4,
        }
    }

    /// Kernel failure during a run of `section`: argument errors are
    /// precondition violations, everything else is numerical.
    pub fn from_core(section: &str, e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { .. }
            | CoreError::StepSize { .. }
            | CoreError::GridTooCoarse(_)
            | CoreError::FitRefused(_) => CliError::Precondition(vec![Violation::from_core(section, &e)]),
            other => CliError::Numerical(other.to_string()),
        }
    }
}
