use std::path::{Path, PathBuf};

use curvo::difficulty::{COMPONENTS, UNIFORM_WEIGHTS};
use curvo::io::TrajectoryFormat;
use curvo::surrogate::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DifficultyOptions {
    /// Per-component weights in profile order (tx, ty, tz, rx, ry, rz).
    pub weights: [f64; COMPONENTS],
    pub n_levels: usize,
    /// Fixed level cut points; equal-count quantiles when absent.
    pub thresholds: Option<Vec<f64>>,
    pub bins: usize,
}

impl Default for DifficultyOptions {
    fn default() -> Self {
        Self {
            weights: UNIFORM_WEIGHTS,
            n_levels: 3,
            thresholds: None,
            bins: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateOptions {
    /// Upper end of the AUC error window, meters.
    pub auc_max_error: f64,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        Self { auc_max_error: 1.0 }
    }
}

/// Everything a command can be configured with; loaded from TOML, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub format: TrajectoryFormat,
    pub train: TrainConfig,
    pub difficulty: DifficultyOptions,
    pub evaluate: EvaluateOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("runs"),
            format: TrajectoryFormat::Tum,
            train: TrainConfig::default(),
            difficulty: DifficultyOptions::default(),
            evaluate: EvaluateOptions::default(),
        }
    }
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<TrajectoryFormat>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::from_toml(&text)
            }
        }
    }

    /// Applies flag overrides; the top-level seed is also the training seed.
    pub fn resolve(mut self, o: &Overrides) -> Self {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(f) = o.format {
            self.format = f;
        }
        self.train.seed = self.seed;
        self
    }

    /// All problems at once, so a bad config fails before any work starts.
    pub fn problems(&self) -> Vec<String> {
        let mut out: Vec<String> = self.train.problems().into_iter().map(|p| format!("train: {p}")).collect();
        let d = &self.difficulty;
        if d.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || d.weights.iter().sum::<f64>() <= 0.0 {
            out.push(format!("difficulty: weights must be non-negative with a positive sum, got {:?}", d.weights));
        }
        if d.n_levels == 0 {
            out.push("difficulty: n_levels must be positive".into());
        }
        if let Some(t) = &d.thresholds {
            if t.len() + 1 != d.n_levels {
                out.push(format!("difficulty: {} thresholds given for {} levels", t.len(), d.n_levels));
            }
            if t.windows(2).any(|w| w[0] >= w[1]) || t.iter().any(|x| !x.is_finite()) {
                out.push(format!("difficulty: thresholds must be finite and increasing, got {t:?}"));
            }
        }
        if d.bins == 0 {
            out.push("difficulty: bins must be positive".into());
        }
        if !(self.evaluate.auc_max_error > 0.0 && self.evaluate.auc_max_error.is_finite()) {
            out.push(format!("evaluate: auc_max_error must be positive, got {}", self.evaluate.auc_max_error));
        }
        out
    }

    pub fn validate(&self) -> CliResult<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(p.join("\n")))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Run directory name: hash of the training config (seed excluded) plus the seed.
    pub fn run_name(&self) -> String {
        let mut t = self.train.clone();
        t.seed = 0;
        let digest = Sha256::digest(toml::to_string(&t).expect("config serializes").as_bytes());
        format!("{}-s{}", &hex::encode(digest)[..12], self.seed)
    }
}
