use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid penalty spec: {0}")]
    InvalidSpec(String),

    #[error("`{name}` is required for the {family} penalty")]
    MissingParameter { family: &'static str, name: &'static str },

    #[error("argument must be finite, got {0}")]
    NonFinite(f64),

    #[error("derivative is undefined at t = 0; use the subgradient interval")]
    AtZero,

    #[error("the {family} penalty is not differentiable at t = {at}")]
    Kink { family: &'static str, at: f64 },

    #[error("{op} is not supported for the {family} penalty: {reason}")]
    Unsupported {
        op: &'static str,
        family: &'static str,
        reason: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid dataset: {0}")]
    Data(String),

    #[error("design matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("objective diverged at iteration {iteration}")]
    Divergence { iteration: usize, trace: Vec<f64> },

    #[error("no global-minimum switch for lambda in [{lo}, {hi}]")]
    NoThreshold { lo: f64, hi: f64 },

    #[error("global minimizer does not switch monotonically near lambda = {lambda}")]
    NonMonotoneThreshold { lambda: f64 },

    #[error("IDX format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
