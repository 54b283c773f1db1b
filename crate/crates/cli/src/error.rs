use std::fmt;

use serde_json::json;

/// Exit 2 for anything wrong with flags or configs, 1 once work has started.
#[derive(Debug)]
pub enum CliError {
    Usage { message: String, flag: Option<String> },
    Runtime(ncreg::Error),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage { message: message.into(), flag: None }
    }

    pub fn flag(flag: &str, message: impl Into<String>) -> Self {
        CliError::Usage { message: message.into(), flag: Some(flag.to_string()) }
    }

    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage { .. } => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Usage { message, flag } => json!({
                "error": {"kind": "usage", "code": 2, "flag": flag, "message": message}
            }),
            CliError::Runtime(e) => json!({
                "error": {"kind": runtime_kind(e), "code": 1, "message": e.to_string()}
            }),
        }
    }

    /// Errors raised while turning flags into a validated config.
    pub fn from_spec_error(e: ncreg::Error) -> Self {
        match e {
            ncreg::Error::MissingParameter { family, name } => {
                let flag = format!("--{name}");
                CliError::flag(&flag, format!("missing {flag}: `{name}` is required for the {family} penalty"))
            }
            ncreg::Error::InvalidSpec(msg) if msg.starts_with("lambda") => CliError::flag("--lambda", msg),
            ncreg::Error::InvalidSpec(msg) => CliError::usage(format!("invalid penalty: {msg}")),
            ncreg::Error::Config(msg) => CliError::usage(format!("invalid configuration: {msg}")),
            other => CliError::Runtime(other),
        }
    }
}

fn runtime_kind(e: &ncreg::Error) -> &'static str {
    use ncreg::Error::*;
    match e {
        InvalidSpec(_) | MissingParameter { .. } | Config(_) => "config",
        NonFinite(_) | AtZero | Kink { .. } | Unsupported { .. } => "unsupported",
        Dimension(_) | Data(_) | RankDeficient { .. } | Format { .. } => "data",
        Divergence { .. } | TrainingDiverged { .. } => "divergence",
        NoThreshold { .. } | NonMonotoneThreshold { .. } => "threshold",
        Io(_) | Csv(_) | Json(_) => "io",
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage { message, .. } => f.write_str(message),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<ncreg::Error> for CliError {
    fn from(e: ncreg::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;
