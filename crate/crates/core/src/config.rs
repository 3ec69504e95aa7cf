//! Run configuration: one TOML file with every tunable of training,
//! tracking, data generation and the experiment driver.
//!
//! Unknown keys are rejected. Missing keys take the desk-scale defaults
//! below (node dimension 64, 30 epochs); the remaining defaults are the
//! reference training recipe.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::guidance::GuidanceConfig;
use crate::inference::TrackConfig;
use crate::model::{IsgSource, ModelConfig};
use crate::synth::SynthConfig;
use crate::trainer::{GuidanceLevels, TrainConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub data: Option<PathBuf>,
    pub fixture: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Training seeds; each seed trains both arms.
    pub seeds: Vec<u64>,
    pub train_sequences: usize,
    pub eval_sequences: usize,
    /// Seed of all generated data; fixed across training seeds and arms.
    pub data_seed: u64,
    /// Style-half rotation of the shifted evaluation domain, degrees.
    pub cross_rotation_deg: f64,
    /// Norm of the style-half translation of the shifted domain.
    pub cross_offset: f64,
    /// Seed of the pseudo text encoder.
    pub embedding_seed: u64,
    /// Also train the unguided arm (alpha = beta = 0).
    pub baseline_arm: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2, 3, 4],
            train_sequences: 10,
            eval_sequences: 5,
            data_seed: 1000,
            cross_rotation_deg: 90.0,
            cross_offset: 1.0,
            embedding_seed: 0,
            baseline_arm: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub alpha: f64,
    pub beta: f64,
    pub levels: Vec<u32>,
    pub knn_k: usize,
    pub mp_steps: usize,
    pub node_dim: usize,
    pub edge_dim: usize,
    pub text_dim: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_clips: usize,
    pub focal_gamma: f64,
    pub threshold: f64,
    pub seed: u64,
    pub isg_source: IsgSource,
    pub guidance_levels: GuidanceLevels,
    pub paths: PathsConfig,
    pub synth: SynthConfig,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            levels: crate::graph::DEFAULT_LEVEL_SIZES.to_vec(),
            knn_k: crate::graph::DEFAULT_KNN_K,
            mp_steps: 8,
            node_dim: 64,
            edge_dim: 16,
            text_dim: 512,
            lr: 3e-4,
            weight_decay: 1e-4,
            epochs: 30,
            batch_clips: 8,
            focal_gamma: 1.0,
            threshold: 0.5,
            seed: 0,
            isg_source: IsgSource::PreMessagePassing,
            guidance_levels: GuidanceLevels::All,
            paths: PathsConfig::default(),
            synth: SynthConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&crate::io::read_text(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config(self.synth.appearance_dim).validate()?;
        self.train_config().validate()?;
        self.synth.validate()?;
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config("threshold must lie in (0, 1)".into()));
        }
        if self.epochs > 0 && self.experiment.train_sequences == 0 {
            return Err(Error::Config(
                "experiment.train_sequences must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Canonical TOML rendering; the digest is computed over it.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Hex SHA-256 of the canonical rendering.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn guidance(&self) -> GuidanceConfig {
        GuidanceConfig {
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn model_config(&self, appearance_dim: usize) -> ModelConfig {
        ModelConfig {
            appearance_dim,
            node_dim: self.node_dim,
            edge_dim: self.edge_dim,
            text_dim: self.text_dim,
            mp_steps: self.mp_steps,
            isg_source: self.isg_source,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            level_sizes: self.levels.clone(),
            knn_k: self.knn_k,
            batch_clips: self.batch_clips,
            epochs: self.epochs,
            lr: self.lr,
            weight_decay: self.weight_decay,
            focal_gamma: self.focal_gamma,
            guidance: self.guidance(),
            guidance_enabled: true,
            guidance_levels: self.guidance_levels,
            seed: self.seed,
        }
    }

    pub fn track_config(&self) -> TrackConfig {
        TrackConfig {
            level_sizes: self.levels.clone(),
            knn_k: self.knn_k,
            threshold: self.threshold,
        }
    }
}
