//! Experiment configuration: one JSON document that pins every knob and
//! seed, so a config hash identifies a run's entire artifact set.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::DatasetConfig;
use crate::error::{Error, Result};
use crate::model::{Activation, ModelSpec, TrainConfig};
use crate::pruner::ImpConfig;

/// Everything a full run needs. Unknown JSON keys are rejected so typos
/// fail loudly instead of silently running defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    /// Seed for weight initialization.
    pub init_seed: u64,
    pub dataset: DatasetConfig,
    pub imp: ImpConfig,
    pub finetune: TrainConfig,
    /// Fraction of layers frozen during fine-tune.
    pub freeze_ratio: f64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Small four-layer setup that runs in seconds on a laptop.
    pub fn default_desk() -> Self {
        ExperimentConfig {
            model: ModelSpec::with_default_names(
                vec![16, 48, 48, 48, 16],
                vec![Activation::Tanh, Activation::Tanh, Activation::Tanh],
            )
            .expect("desk model dims are valid"),
            init_seed: 13,
            dataset: DatasetConfig {
                n_train: 256,
                n_heldout: 128,
                n_categories: 10,
                d_in: 16,
                d_embed: 16,
                noise: 0.1,
                seed: 7,
            },
            imp: ImpConfig::default(),
            finetune: TrainConfig {
                learning_rate: 0.005,
                iterations: 1000,
                batch_size: 32,
                seed: 1,
            },
            freeze_ratio: 0.5,
            output_dir: PathBuf::from("runs/desk"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.dataset.validate()?;
        self.imp.validate()?;
        self.finetune.validate()?;
        if !(0.0..=1.0).contains(&self.freeze_ratio) {
            return Err(Error::InvalidArgument(format!(
                "freeze_ratio must be in [0, 1], got {}",
                self.freeze_ratio
            )));
        }
        if self.dataset.d_in != self.model.input_dim() {
            return Err(Error::InvalidArgument(format!(
                "dataset d_in {} does not match model input width {}",
                self.dataset.d_in,
                self.model.input_dim()
            )));
        }
        if self.dataset.d_embed != self.model.embed_dim() {
            return Err(Error::InvalidArgument(format!(
                "dataset d_embed {} does not match model output width {}",
                self.dataset.d_embed,
                self.model.embed_dim()
            )));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::InvalidArgument("output_dir must not be empty".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// Hex SHA-256 of the canonical (compact) JSON form. Struct fields
    /// serialize in declaration order, so the encoding is deterministic.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Replace every seed with one derived from `seed`, for paired-seed
    /// experiment arms.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.init_seed = seed;
        cfg.dataset.seed = seed.wrapping_add(1);
        cfg.imp.seed = seed.wrapping_add(2);
        cfg.finetune.seed = seed.wrapping_add(3);
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_default_is_valid() {
        let cfg = ExperimentConfig::default_desk();
        cfg.validate().unwrap();
        assert_eq!(cfg.model.weight_count(), 6144);
    }

    #[test]
    fn json_round_trip_preserves_hash() {
        let cfg = ExperimentConfig::default_desk();
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut doc: serde_json::Value =
            serde_json::from_str(&ExperimentConfig::default_desk().to_json()).unwrap();
        doc["surprise"] = serde_json::json!(1);
        assert!(ExperimentConfig::from_json(&doc.to_string()).is_err());
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let mut cfg = ExperimentConfig::default_desk();
        cfg.dataset.d_in = 8;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default_desk();
        cfg.dataset.d_embed = 8;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default_desk();
        cfg.freeze_ratio = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn seed_override_changes_hash_but_not_structure() {
        let cfg = ExperimentConfig::default_desk();
        let alt = cfg.with_seed(99);
        assert_ne!(alt.hash(), cfg.hash());
        assert_eq!(alt.model, cfg.model);
        assert_eq!(alt.with_seed(99), alt);
        assert_ne!(alt.init_seed, alt.imp.seed);
    }
}
