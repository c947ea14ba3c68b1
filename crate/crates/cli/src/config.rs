//! Pipeline configuration: a JSON document with sections for the input
//! bundle, the propagation stage, the hop combination, the classifier, and
//! the output location. Unknown keys are rejected, defaults are filled on
//! load, and the effective (fully defaulted) document is echoed next to the
//! artifacts so a run can always be reproduced from its output directory.

use std::path::{Path, PathBuf};

use rmask_core::classifier::TrainConfig;
use rmask_core::walk::WalkConfig;
use rmask_core::{BiasMode, CombineMethod, CombineSpec, Error, PropagationMode, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub graph: GraphSection,
    #[serde(default)]
    pub propagation: PropagationSection,
    #[serde(default)]
    pub combine: CombineSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub edge_list: PathBuf,
    #[serde(default)]
    pub features: Option<PathBuf>,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    #[serde(default)]
    pub splits: Option<SplitsSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitsSection {
    pub train: PathBuf,
    pub val: PathBuf,
    pub test: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationSection {
    pub mode: PropagationMode,
    /// Normalization exponent of the propagation operator.
    pub r: f64,
    #[serde(rename = "depth_H")]
    pub depth_h: usize,
    #[serde(rename = "walks_T")]
    pub walks_t: usize,
    pub bias: BiasMode,
    /// Restart probability of the importance scores.
    pub alpha: f64,
    /// Per-degree residual tolerance of the importance push.
    pub epsilon: f64,
    pub seed: u64,
    /// Extra attempts per rejected walk.
    pub max_retries: usize,
    /// Normalize walk rows by walks launched instead of walks accepted.
    pub divide_by_total: bool,
    /// Importance rows are truncated to this many entries.
    pub top_k: usize,
}

impl Default for PropagationSection {
    fn default() -> Self {
        PropagationSection {
            mode: PropagationMode::Rmask,
            r: 0.5,
            depth_h: 2,
            walks_t: 100,
            bias: BiasMode::Ppr,
            alpha: 0.15,
            epsilon: 1e-4,
            seed: 0,
            max_retries: 0,
            divide_by_total: false,
            top_k: 256,
        }
    }
}

impl PropagationSection {
    pub fn walk_config(&self) -> WalkConfig {
        WalkConfig {
            depth_h: self.depth_h,
            walks_t: self.walks_t,
            bias: self.bias,
            seed: self.seed,
            max_retries: self.max_retries,
            divide_by_total: self.divide_by_total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CombineSection {
    pub method: CombineMethod,
    pub beta: Option<f64>,
    pub include_raw: bool,
    /// Explicit hop selection; omitted = all hops (respecting include_raw).
    pub hops: Option<Vec<usize>>,
    pub gbp_renormalize: bool,
}

impl Default for CombineSection {
    fn default() -> Self {
        CombineSection {
            method: CombineMethod::SignConcat,
            beta: None,
            include_raw: true,
            hops: None,
            gbp_renormalize: false,
        }
    }
}

impl CombineSection {
    pub fn spec(&self) -> CombineSpec {
        CombineSpec {
            method: self.method,
            beta: self.beta,
            include_raw: self.include_raw,
            hops: self.hops.clone(),
            gbp_renormalize: self.gbp_renormalize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub standardize: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            hidden_dim: d.hidden_dim,
            learning_rate: d.learning_rate,
            weight_decay: d.weight_decay,
            dropout: d.dropout,
            max_epochs: d.max_epochs,
            patience: d.patience,
            seed: d.seed,
            standardize: d.standardize,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            hidden_dim: self.hidden_dim,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            dropout: self.dropout,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
            standardize: self.standardize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: Option<PathBuf>,
}

impl PipelineConfig {
    /// Parses and validates a config document.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text)
            .map_err(|e| Error::Param(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Param(format!("config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Cross-field checks run before any data is touched.
    pub fn validate(&self) -> Result<()> {
        let p = &self.propagation;
        if !(0.0..=1.0).contains(&p.r) || !p.r.is_finite() {
            return Err(Error::Param(format!(
                "normalization exponent must lie in [0, 1], got {}",
                p.r
            )));
        }
        if p.depth_h == 0 && p.mode == PropagationMode::Rmask {
            return Err(Error::Param(
                "propagation depth_H must be >= 1 for walk-based mode \
                 (0 is only meaningful as a baseline passthrough)"
                    .into(),
            ));
        }
        if !(0.0 < p.alpha && p.alpha < 1.0) {
            return Err(Error::Param(format!(
                "restart probability must lie in (0, 1), got {}",
                p.alpha
            )));
        }
        if !(p.epsilon > 0.0 && p.epsilon.is_finite()) {
            return Err(Error::Param(format!(
                "push tolerance must be positive, got {}",
                p.epsilon
            )));
        }
        if p.top_k == 0 {
            return Err(Error::Param("top_k must be >= 1".into()));
        }
        if p.mode == PropagationMode::Rmask {
            p.walk_config().validate()?;
        }
        let spec = self.combine.spec();
        spec.validate()?;
        if let Some(hops) = &spec.hops {
            if let Some(&max) = hops.iter().max() {
                if max > p.depth_h {
                    return Err(Error::Param(format!(
                        "combine selects hop {max} beyond depth_H {}",
                        p.depth_h
                    )));
                }
            }
        }
        self.train.train_config().validate()?;
        Ok(())
    }

    /// The fully defaulted document, echoed into the output directory.
    pub fn effective_json(&self) -> Result<String> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Param(format!("config serialization: {e}")))?;
        // The echoed document must itself parse and validate: a guard
        // against serialization drift between the schema and the struct.
        let back = Self::from_json(&text)?;
        if back != *self {
            return Err(Error::Param(
                "effective config does not round-trip".into(),
            ));
        }
        Ok(text + "\n")
    }
}
