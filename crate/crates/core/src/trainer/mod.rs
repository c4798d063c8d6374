//! Alternating child/parent training with AdamW, metrics and checkpoints.

mod checkpoint;
mod gradcheck;
mod optim;
mod run;
mod schedule;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{EmbedError, HashEmbedderConfig};
use crate::losses::{LossConfig, LossError};
use crate::model::{ModelConfig, Pool};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT};
pub use gradcheck::{check_objectives, ObjectiveCheck, GRADCHECK_TOLERANCE};
pub use optim::{adamw_step, OptimizerState};
pub use run::{
    child_batch, evaluate_child_loss, parent_batch, train, MetricsLog, MetricsRecord, StepKind, TrainOutput,
};
pub use schedule::{make_schedule, Step};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("corpus has no clips or no videos")]
    EmptyCorpus,
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("no embedding for text {0:?}")]
    MissingEmbedding(String),
    #[error("checkpoint shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("checkpoint format {found:?}, expected {expected:?}")]
    VersionMismatch { found: String, expected: String },
    #[error("checkpoint io: {0}")]
    Io(String),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub d_in: usize,
    pub d_h: usize,
    pub d: usize,
    /// Frames per clip.
    #[serde(rename = "K")]
    pub k: usize,
    pub batch_size: usize,
    pub video_batch: usize,
    pub child_steps_per_parent: usize,
    pub epochs: usize,
    /// Stop after this many executed steps.
    pub max_steps: Option<usize>,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub loss: LossConfig,
    pub seed: u64,
    pub pool: Pool,
    pub positional: bool,
    /// Parent steps update the aggregator only.
    pub parent_stop_encoder_grad: bool,
    pub hash_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d_in: 16,
            d_h: 64,
            d: 64,
            k: 4,
            batch_size: 8,
            video_batch: 4,
            child_steps_per_parent: 5,
            epochs: 285,
            max_steps: None,
            lr: 1e-5,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            loss: LossConfig::default(),
            seed: 0,
            pool: Pool::Mean,
            positional: false,
            parent_stop_encoder_grad: false,
            hash_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            d_in: self.d_in,
            d_h: self.d_h,
            d: self.d,
            pool: self.pool,
            positional: self.positional,
        }
    }

    pub fn embedder(&self) -> HashEmbedderConfig {
        HashEmbedderConfig {
            d: self.d,
            hash_seed: self.hash_seed,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_owned()));
        if self.d_in == 0 || self.d_h == 0 || self.d < 8 {
            return bad("dimensions must be positive and d >= 8");
        }
        if self.k == 0 || self.batch_size == 0 || self.video_batch == 0 {
            return bad("K, batch_size and video_batch must be positive");
        }
        if self.child_steps_per_parent == 0 {
            return bad("child_steps_per_parent must be >= 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0) {
            return bad("lr must be positive and weight_decay nonnegative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps_adam > 0.0) {
            return bad("betas must lie in [0, 1) and eps_adam be positive");
        }
        self.loss.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_uses_field_names_and_defaults() {
        let cfg: TrainConfig = serde_json::from_str(r#"{"lr": 0.001, "K": 4, "loss": {"tau": 0.1}}"#).unwrap();
        assert_eq!(cfg.lr, 1e-3);
        assert_eq!(cfg.loss.tau, 0.1);
        assert_eq!(cfg.loss.lambda, 1.0);
        assert_eq!(cfg.child_steps_per_parent, 5);
        assert_eq!(cfg.weight_decay, 1e-4);
        cfg.validate().unwrap();
        let back: TrainConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn zero_child_steps_per_parent_rejected() {
        let cfg = TrainConfig {
            child_steps_per_parent: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(TrainError::InvalidConfig(_))));
    }
}
