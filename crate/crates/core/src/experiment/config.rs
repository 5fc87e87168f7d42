use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{AgentId, PerformanceMetric};
use crate::error::{Result, SolaError};
use crate::fusion::{FusionMode, SignalPolicy};
use crate::local::ShardRule;
use crate::models::Arrival;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Linreg,
    Mnist,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Gd,
    Sgd,
    Dsgd,
    Fedavg,
}

/// One agent: its optimiser and, for regression, its noise level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub id: usize,
    pub algorithm: AlgorithmKind,
    pub learning_rate: f64,
    #[serde(default)]
    pub noise_scale: f64,
    /// Minibatch size of the SGD variant.
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default = "one")]
    pub sub_units: usize,
    #[serde(default = "one")]
    pub local_steps: usize,
    /// Per-sub-unit minibatch of DSGD and FedAvg; whole shard when absent.
    #[serde(default)]
    pub local_batch: Option<usize>,
    #[serde(default)]
    pub shard_rule: Option<ShardRule>,
    /// Regression noise variance `v^i`.
    #[serde(default)]
    pub noise_variance: f64,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinregConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_feature_variance")]
    pub feature_variance: f64,
    /// Samples per agent per event.
    #[serde(default = "default_linreg_batch")]
    pub batch_size: usize,
    #[serde(default = "default_arrival")]
    pub arrival: Arrival,
    /// Generating parameter; drawn from `N(0, I)` per seed when absent.
    #[serde(default)]
    pub x_star: Option<Vec<f64>>,
}

fn default_dim() -> usize {
    3
}
fn default_feature_variance() -> f64 {
    0.5
}
fn default_linreg_batch() -> usize {
    10
}
fn default_arrival() -> Arrival {
    Arrival::Blocked { block: 10 }
}

impl Default for LinregConfig {
    fn default() -> Self {
        Self {
            dim: default_dim(),
            feature_variance: default_feature_variance(),
            batch_size: default_linreg_batch(),
            arrival: default_arrival(),
            x_star: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MnistConfig {
    pub images_path: PathBuf,
    pub labels_path: PathBuf,
    pub test_images_path: PathBuf,
    pub test_labels_path: PathBuf,
    /// Use only the first `train_subset` training images.
    #[serde(default)]
    pub train_subset: Option<usize>,
    #[serde(default)]
    pub test_subset: Option<usize>,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    /// Clean images per event for single-unit agents.
    #[serde(default = "default_mnist_batch")]
    pub batch_size: usize,
    /// Images per sub-unit per event for composite agents.
    #[serde(default = "default_subunit_batch")]
    pub subunit_batch: usize,
    #[serde(default = "default_cap")]
    pub shard_cap: Option<usize>,
    #[serde(default = "default_shard_noise")]
    pub shard_noise_variance: f64,
    #[serde(default = "default_mnist_arrival")]
    pub arrival: Arrival,
    #[serde(default = "one")]
    pub eval_every: usize,
    #[serde(default = "default_reference_epochs")]
    pub reference_epochs: usize,
    #[serde(default = "default_reference_lr")]
    pub reference_learning_rate: f64,
}

fn default_hidden() -> usize {
    128
}
fn default_mnist_batch() -> usize {
    256
}
fn default_subunit_batch() -> usize {
    16
}
fn default_cap() -> Option<usize> {
    Some(128)
}
fn default_shard_noise() -> f64 {
    0.5
}
fn default_mnist_arrival() -> Arrival {
    Arrival::Blocked { block: 5 }
}
fn default_reference_epochs() -> usize {
    200
}
fn default_reference_lr() -> f64 {
    0.5
}

/// A quadratic `½(x − c)ᵀ diag(q) (x − c)`; every event carries one dummy sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomConfig {
    pub diagonal: Vec<f64>,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_arrival")]
    pub arrival: Arrival,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "yes")]
    pub regret: bool,
    #[serde(default = "yes")]
    pub contraction: bool,
    /// Chain certification; only meaningful for naive runs.
    #[serde(default)]
    pub chain: bool,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_directions")]
    pub chain_directions: usize,
    #[serde(default = "default_n0")]
    pub n0: f64,
    #[serde(default)]
    pub mu_bar: Option<f64>,
    #[serde(default)]
    pub beta_bar: Option<f64>,
}

fn yes() -> bool {
    true
}
fn default_samples() -> usize {
    256
}
fn default_directions() -> usize {
    4
}
fn default_n0() -> f64 {
    1.0
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            regret: true,
            contraction: true,
            chain: false,
            samples: default_samples(),
            chain_directions: default_directions(),
            n0: default_n0(),
            mu_bar: None,
            beta_bar: None,
        }
    }
}

/// A complete experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Horizon `|T|`.
    #[serde(default = "default_events")]
    pub events: usize,
    #[serde(default)]
    pub metric: PerformanceMetric,
    #[serde(default)]
    pub mode: FusionMode,
    #[serde(default = "default_signal")]
    pub signal: SignalPolicy,
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub linreg: Option<LinregConfig>,
    #[serde(default)]
    pub mnist: Option<MnistConfig>,
    #[serde(default)]
    pub custom: Option<CustomConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

fn default_events() -> usize {
    200
}

fn default_signal() -> SignalPolicy {
    SignalPolicy::Periodic {
        period: 10,
        order: None,
    }
}

/// Document syntax of a config file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl ExperimentConfig {
    /// Parses and validates; relative data paths resolve against `base`.
    pub fn parse(text: &str, format: Format, base: Option<&Path>) -> Result<Self> {
        let mut cfg: ExperimentConfig = match format {
            Format::Toml => toml::from_str(text).map_err(|e| SolaError::Config(e.to_string()))?,
            Format::Json => serde_json::from_str(text).map_err(|e| SolaError::Config(e.to_string()))?,
        };
        if let (Some(base), Some(m)) = (base, cfg.mnist.as_mut()) {
            for p in [
                &mut m.images_path,
                &mut m.labels_path,
                &mut m.test_images_path,
                &mut m.test_labels_path,
            ] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SolaError::Config(m));
        if self.events == 0 {
            return bad("events must be at least 1".into());
        }
        if self.agents.is_empty() {
            return bad("at least one agent is required".into());
        }
        let mut ids = BTreeSet::new();
        for (i, a) in self.agents.iter().enumerate() {
            if a.id == 0 {
                return bad(format!("agents[{i}].id: agent ids start at 1"));
            }
            if !ids.insert(a.id) {
                return bad(format!("agents[{i}].id: duplicate agent {}", a.id));
            }
            if !(a.learning_rate >= 0.0) {
                return bad(format!("agents[{i}].learning_rate must be nonnegative"));
            }
            if a.sub_units == 0 || a.local_steps == 0 {
                return bad(format!("agents[{i}]: sub_units and local_steps must be at least 1"));
            }
            if a.noise_variance < 0.0 || a.noise_scale < 0.0 {
                return bad(format!("agents[{i}]: noise parameters must be nonnegative"));
            }
        }
        if let SignalPolicy::Periodic { period, order } = &self.signal {
            if *period == 0 {
                return bad("signal.period must be at least 1".into());
            }
            if let Some(order) = order {
                for a in order {
                    if !ids.contains(&a.0) {
                        return bad(format!("signal.order names agent {a}, which is not configured"));
                    }
                }
                if let Some(missing) = ids.iter().find(|i| !order.contains(&AgentId(**i))) {
                    return bad(format!("signal.order is missing agent {missing}"));
                }
            }
        }
        if self.analysis.n0 <= 0.0 {
            return bad("analysis.n0 must be positive".into());
        }
        match self.kind {
            ExperimentKind::Linreg => {
                let l = self.linreg.clone().unwrap_or_default();
                if let Some(x) = &l.x_star {
                    if x.len() != l.dim {
                        return bad(format!("linreg.x_star has {} entries but dim is {}", x.len(), l.dim));
                    }
                }
            }
            ExperimentKind::Mnist => {
                let Some(m) = &self.mnist else {
                    return bad("mnist.images_path required".into());
                };
                for (key, p) in [
                    ("mnist.images_path", &m.images_path),
                    ("mnist.labels_path", &m.labels_path),
                    ("mnist.test_images_path", &m.test_images_path),
                    ("mnist.test_labels_path", &m.test_labels_path),
                ] {
                    if !p.exists() {
                        return bad(format!("{key}: {} does not exist", p.display()));
                    }
                }
                for a in &self.agents {
                    if a.sub_units > 1 && 10 % a.sub_units != 0 {
                        return bad(format!("agent {}: {} sub-units cannot split 10 labels evenly", a.id, a.sub_units));
                    }
                }
                if m.eval_every == 0 {
                    return bad("mnist.eval_every must be at least 1".into());
                }
            }
            ExperimentKind::Custom => {
                let Some(c) = &self.custom else {
                    return bad("custom.diagonal required".into());
                };
                let n = c.diagonal.len();
                if n == 0 || c.diagonal.iter().any(|v| !(*v >= 0.0)) {
                    return bad("custom.diagonal must be nonempty and nonnegative".into());
                }
                for (key, v) in [("custom.center", &c.center), ("custom.x0", &c.x0)] {
                    if v.as_ref().is_some_and(|v| v.len() != n) {
                        return bad(format!("{key} must have {n} entries"));
                    }
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, identifying the effective config.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let hash = Sha256::digest(&json);
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Reads a `.toml` or `.json` file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SolaError::io(path, e))?;
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        _ => Format::Toml,
    };
    ExperimentConfig::parse(&text, format, path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
kind = "linreg"

[[agents]]
id = 1
algorithm = "gd"
learning_rate = 0.05
noise_variance = 3.0

[[agents]]
id = 2
algorithm = "dsgd"
learning_rate = 0.05
sub_units = 5
noise_variance = 30.0
"#;

    #[test]
    fn minimal_linreg_defaults() {
        let c = ExperimentConfig::parse(MINIMAL, Format::Toml, None).unwrap();
        assert_eq!(c.events, 200);
        assert_eq!(c.seed, 0);
        assert_eq!(c.mode, FusionMode::Weighted);
        assert_eq!(c.analysis.n0, 1.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\nbogus = 1\n");
        let err = ExperimentConfig::parse(&text, Format::Toml, None).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn signal_naming_a_missing_agent() {
        let text = MINIMAL.replacen(
            "kind = \"linreg\"",
            "kind = \"linreg\"\nsignal = { kind = \"periodic\", period = 10, order = [1, 3] }",
            1,
        );
        let err = ExperimentConfig::parse(&text, Format::Toml, None).unwrap_err();
        assert!(err.to_string().contains("agent 3"), "{err}");
    }

    #[test]
    fn mnist_needs_paths() {
        let text = MINIMAL.replace("kind = \"linreg\"", "kind = \"mnist\"");
        let err = ExperimentConfig::parse(&text, Format::Toml, None).unwrap_err();
        assert!(err.to_string().contains("mnist.images_path required"));
    }

    #[test]
    fn type_mismatch_names_the_key() {
        let text = MINIMAL.replace("learning_rate = 0.05\nnoise_variance = 3.0", "learning_rate = \"fast\"");
        let err = ExperimentConfig::parse(&text, Format::Toml, None).unwrap_err();
        assert!(err.to_string().contains("learning_rate"), "{err}");
    }

    #[test]
    fn json_is_accepted() {
        let c = ExperimentConfig::parse(
            r#"{"kind":"custom","events":5,"agents":[{"id":1,"algorithm":"gd","learning_rate":0.1}],
                "custom":{"diagonal":[1.0,2.0]}}"#,
            Format::Json,
            None,
        )
        .unwrap();
        assert_eq!(c.events, 5);
    }

    #[test]
    fn digest_tracks_content() {
        let a = ExperimentConfig::parse(MINIMAL, Format::Toml, None).unwrap();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed = 1;
        assert_ne!(a.digest(), b.digest());
    }
}
