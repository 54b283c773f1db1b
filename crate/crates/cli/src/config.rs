//! Resolved per-subcommand configs. Flags and `--config` files both end up
//! here, and the manifest stores exactly these values.

use std::path::{Path, PathBuf};

use ncreg::asymptotics::{ApproxKind, SimScenario};
use ncreg::nn::{assign_roles, blobs, load_idx, overfit_task, MlpConfig, OverfitTask, TrainConfig};
use ncreg::{Dataset, Loss, PenaltySpec, SolverConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::manifest::{sha256_hex, InputFile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid {
    pub fn parse(s: &str) -> CliResult<Grid> {
        let bad = || CliError::flag("--grid", format!("--grid expects lo:hi:n, got `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        let g = Grid { lo, hi, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.n == 0 || self.hi < self.lo || (self.n == 1 && self.lo != self.hi) {
            return Err(CliError::flag("--grid", format!("grid needs finite lo <= hi and n >= 1 (n = 1 only when lo = hi), got {}:{}:{}", self.lo, self.hi, self.n)));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n).map(|i| if i + 1 == self.n { self.hi } else { self.lo + step * i as f64 }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyCmd {
    pub penalty: PenaltySpec,
    pub grid: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxCmd {
    pub penalty: PenaltySpec,
    pub w_hat: f64,
    /// Also run the brute-force grid oracle.
    #[serde(default)]
    pub oracle: bool,
    /// Emit the objective over the animation grids instead of one solve.
    #[serde(default)]
    pub animate_data: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdCmd {
    /// Its `lambda` is ignored.
    pub penalty: PenaltySpec,
    pub w_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertiesCmd {
    pub penalty: PenaltySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitCmd {
    pub data: PathBuf,
    pub penalty: PenaltySpec,
    #[serde(default = "default_loss")]
    pub loss: Loss,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_loss() -> Loss {
    Loss::Ls
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "study", rename_all = "snake_case", deny_unknown_fields)]
pub enum AsymCmd {
    Consistency { scenario: SimScenario, penalty: PenaltySpec },
    SqrtnBias { scenario: SimScenario, penalty: PenaltySpec },
    BiasFactor { penalty: PenaltySpec, w: Vec<f64> },
    Approximation { kind: ApproxKind, param: f64, a: Vec<f64> },
}

impl AsymCmd {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            AsymCmd::Consistency { scenario, .. } | AsymCmd::SqrtnBias { scenario, .. } => vec![scenario.seed],
            _ => Vec::new(),
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        if let AsymCmd::Consistency { scenario, .. } | AsymCmd::SqrtnBias { scenario, .. } = self {
            scenario.seed = seed;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// The built-in small-sample classification task.
    Synthetic(OverfitTask),
    Blobs { n: usize, p: usize, seed: u64 },
    /// Features then a class-index label column, optional `role` column.
    Csv { path: PathBuf },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default)]
        limit: Option<usize>,
        train: usize,
        validation: usize,
        test: usize,
    },
}

impl DataSource {
    pub fn load(&self) -> CliResult<(Dataset, Vec<InputFile>)> {
        Ok(match self {
            DataSource::Synthetic(task) => (overfit_task(task)?, Vec::new()),
            DataSource::Blobs { n, p, seed } => (blobs(*n, *p, *seed)?, Vec::new()),
            DataSource::Csv { path } => (Dataset::load_csv(path)?, vec![input_file(path)?]),
            DataSource::Idx { images, labels, limit, train, validation, test } => {
                let d = load_idx(images, labels, *limit)?;
                (assign_roles(&d, *train, *validation, *test)?, vec![input_file(images)?, input_file(labels)?])
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainCmd {
    pub data: DataSource,
    pub mlp: MlpConfig,
    #[serde(default)]
    pub train: TrainConfig,
    pub penalty: PenaltySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCmd {
    pub data: DataSource,
    pub mlp: MlpConfig,
    #[serde(default)]
    pub train: TrainConfig,
    /// Family and shape parameter; `lambda` is taken from the grid.
    pub penalty: ncreg::penalty::RawPenaltySpec,
    /// log10(lambda) values; defaults to -4.0 down to -7.0 in steps of 0.2.
    #[serde(default = "ncreg::nn::default_log10_grid")]
    pub grid: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Also train unpenalized networks and report their median.
    #[serde(default)]
    pub baseline: bool,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

impl SweepCmd {
    pub fn resolve(mut self) -> CliResult<Self> {
        if self.penalty.lambda.is_none() {
            self.penalty.lambda = Some(1.0);
        }
        self.penalty.build().map_err(CliError::from_spec_error)?;
        if self.grid.is_empty() || self.grid.iter().any(|g| !g.is_finite()) {
            return Err(CliError::usage("sweep grid must be a non-empty list of finite log10(lambda) values"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::usage("sweep needs at least one seed"));
        }
        self.mlp.validate().map_err(CliError::from_spec_error)?;
        self.train.validate().map_err(CliError::from_spec_error)?;
        Ok(self)
    }
}

pub fn input_file(path: &Path) -> CliResult<InputFile> {
    let bytes = std::fs::read(path)?;
    Ok(InputFile { path: path.display().to_string(), sha256: sha256_hex(&bytes) })
}

/// Reads a config file for `subcommand`. A run manifest is accepted too: its
/// `config` field is used after checking the subcommand matches.
pub fn load_config<T: DeserializeOwned>(path: &Path, subcommand: &str) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::flag("--config", format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::flag("--config", format!("config {} is not valid JSON: {e}", path.display())))?;
    let value = match value {
        serde_json::Value::Object(ref map) if map.contains_key("subcommand") && map.contains_key("config") => {
            let sub = map["subcommand"].as_str().unwrap_or_default();
            if sub != subcommand {
                return Err(CliError::flag("--config", format!("manifest is for `{sub}`, not `{subcommand}`")));
            }
            map["config"].clone()
        }
        other => other,
    };
    serde_json::from_value(value).map_err(|e| CliError::flag("--config", format!("invalid {subcommand} config: {e}")))
}
