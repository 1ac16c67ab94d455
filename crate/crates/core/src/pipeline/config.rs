//! Experiment configuration: schema, defaults and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::synth::SynthKind;
use crate::distributions::{Metric, WalkMode};
use crate::error::{Error, Result};
use crate::kernels::{Family, KernelSpec};
use crate::loss::Direction;
use crate::optim::OptimizerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Synthetic {
        kind: SynthKind,
        n: usize,
        #[serde(default)]
        noise: f64,
    },
    /// Point CSV; a trailing `label` column provides ground truth.
    Csv { path: PathBuf },
}

/// One supervisory component. Components are mixed with the configured
/// weights after walk propagation of the kNN components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BuilderSpec {
    Knn {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default)]
        metric: Metric,
    },
    /// Gaussian affinities with a global bandwidth or a perplexity target.
    Gaussian {
        #[serde(default)]
        sigma: Option<f64>,
        #[serde(default)]
        perplexity: Option<f64>,
    },
    /// Pair-indicator from a pairs JSON file.
    Pairs { path: PathBuf },
    /// Uniform over same-label points (needs labels).
    Labels,
}

fn default_k() -> usize {
    3
}

fn default_walks() -> usize {
    1
}

/// Where uniform debiasing sits relative to walk propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DebiasOrder {
    /// kNN → walks → mix → debias.
    #[default]
    PropagateThenDebias,
    /// kNN → debias → walks → mix.
    DebiasThenPropagate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupervisorySpec {
    pub builders: Vec<BuilderSpec>,
    /// Mixture weights, one per builder; uniform when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default = "default_walks")]
    pub walk_steps: usize,
    #[serde(default)]
    pub walk_mode: WalkMode,
    /// Uniform mixing weight on the supervisory side.
    #[serde(default)]
    pub alpha: f64,
    /// Uniform mixing weight on the learned side.
    #[serde(default)]
    pub q_alpha: f64,
    #[serde(default)]
    pub order: DebiasOrder,
    /// Weight of the EMA teacher's kernel in the supervisory side.
    #[serde(default)]
    pub teacher_weight: f64,
}

impl Default for SupervisorySpec {
    fn default() -> Self {
        Self {
            builders: vec![BuilderSpec::Knn {
                k: default_k(),
                metric: Metric::Euclidean,
            }],
            weights: None,
            walk_steps: 1,
            walk_mode: WalkMode::Weighted,
            alpha: 0.0,
            q_alpha: 0.0,
            order: DebiasOrder::PropagateThenDebias,
            teacher_weight: 0.0,
        }
    }
}

/// How the learned side is parameterized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// One free parameter vector per point.
    #[default]
    Free,
    /// Affine map of the standardized input points.
    Linear,
}

pub const METRIC_NAMES: [&str; 3] = ["hungarian_accuracy", "final_loss", "max_prob_histogram"];

fn default_metrics() -> Vec<String> {
    METRIC_NAMES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub supervisory: SupervisorySpec,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub direction: Direction,
    #[serde(default)]
    pub head: Head,
    /// Optimizer settings; its `seed` is replaced by the experiment seed.
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Seeds the synthetic data and every optimizer restart.
    #[serde(default)]
    pub seed: u64,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn config_error(pointer: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        pointer: pointer.into(),
        reason: reason.into(),
    }
}

fn check_alpha(pointer: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(config_error(pointer, format!("{v} outside [0, 1]")))
    }
}

impl ExperimentConfig {
    /// Parses and validates; schema errors carry the JSON pointer of the
    /// offending value. Paths are not checked here (see [`Self::check_paths`]).
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            pointer: super::json_pointer(e.path()),
            reason: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.dataset {
            DatasetSpec::Synthetic { n, noise, .. } => {
                if *n < 4 {
                    return Err(config_error("/dataset/synthetic/n", format!("{n} points; need at least 4")));
                }
                if !(*noise >= 0.0 && noise.is_finite()) {
                    return Err(config_error("/dataset/synthetic/noise", format!("{noise} must be nonnegative")));
                }
            }
            DatasetSpec::Csv { .. } => {}
        }
        let s = &self.supervisory;
        if s.builders.is_empty() {
            return Err(config_error("/supervisory/builders", "at least one builder is required"));
        }
        for (b, builder) in s.builders.iter().enumerate() {
            match builder {
                BuilderSpec::Knn { k, .. } if *k == 0 => {
                    return Err(config_error(&format!("/supervisory/builders/{b}/k"), "must be at least 1"))
                }
                BuilderSpec::Gaussian { sigma, perplexity } => match (sigma, perplexity) {
                    (Some(_), Some(_)) | (None, None) => {
                        return Err(config_error(
                            &format!("/supervisory/builders/{b}"),
                            "give exactly one of sigma and perplexity",
                        ))
                    }
                    (Some(v), None) | (None, Some(v)) if !(*v > 0.0 && v.is_finite()) => {
                        return Err(config_error(&format!("/supervisory/builders/{b}"), format!("{v} must be positive")))
                    }
                    _ => {}
                },
                _ => {}
            }
        }
        if let Some(w) = &s.weights {
            if w.len() != s.builders.len() {
                return Err(config_error(
                    "/supervisory/weights",
                    format!("{} weights for {} builders", w.len(), s.builders.len()),
                ));
            }
            if w.iter().any(|v| !(*v >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(config_error("/supervisory/weights", "must be nonnegative and sum to 1"));
            }
        }
        if s.walk_steps < 1 {
            return Err(config_error("/supervisory/walk_steps", "must be at least 1"));
        }
        check_alpha("/supervisory/alpha", s.alpha)?;
        check_alpha("/supervisory/q_alpha", s.q_alpha)?;
        check_alpha("/supervisory/teacher_weight", s.teacher_weight)?;
        if s.teacher_weight > 0.0 && self.optimizer.ema_momentum.is_none() {
            return Err(config_error("/supervisory/teacher_weight", "needs optimizer.ema_momentum"));
        }
        if let Some(a) = self.kernel.alpha {
            check_alpha("/kernel/alpha", a)?;
            if s.q_alpha != 0.0 && s.q_alpha != a {
                return Err(config_error("/kernel/alpha", "conflicts with supervisory.q_alpha"));
            }
        }
        match self.kernel.family {
            Family::PrototypeSoftmax | Family::Harmonic | Family::CrossModalCosine => {
                return Err(config_error(
                    "/kernel/family",
                    "experiments train point-to-point kernels: cluster, degree_cluster, gaussian, student_t or cosine_gaussian",
                ))
            }
            _ => {}
        }
        if self.kernel.clusters == Some(0) {
            return Err(config_error("/kernel/clusters", "must be at least 1"));
        }
        for (k, m) in self.metrics.iter().enumerate() {
            if !METRIC_NAMES.contains(&m.as_str()) {
                return Err(config_error(&format!("/metrics/{k}"), format!("unknown metric `{m}`")));
            }
        }
        self.optimizer.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => config_error(&format!("/optimizer/{name}"), reason),
            other => other,
        })
    }

    /// Every referenced file must exist.
    pub fn check_paths(&self) -> Result<()> {
        let mut paths = Vec::new();
        if let DatasetSpec::Csv { path } = &self.dataset {
            paths.push(("/dataset/csv/path".to_string(), path.clone()));
        }
        for (b, builder) in self.supervisory.builders.iter().enumerate() {
            if let BuilderSpec::Pairs { path } = builder {
                paths.push((format!("/supervisory/builders/{b}/path"), path.clone()));
            }
        }
        if let Some(g) = &self.kernel.graph {
            paths.push(("/kernel/graph".to_string(), g.clone()));
        }
        for (pointer, p) in paths {
            let full = self.resolve(&p);
            if !full.exists() {
                return Err(config_error(&pointer, format!("{} does not exist", full.display())));
            }
        }
        Ok(())
    }

    /// Learned-side uniform weight in effect.
    pub fn q_alpha(&self) -> f64 {
        if self.supervisory.q_alpha != 0.0 {
            self.supervisory.q_alpha
        } else {
            self.kernel.alpha.unwrap_or(0.0)
        }
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
