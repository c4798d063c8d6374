//! Frame-level state losses, clip-level narration alignment and the
//! video-level parent loss with counterfactual negatives.
//!
//! Every loss returns its value together with gradients with respect to the
//! visual embeddings it was given. Text embeddings come from a frozen encoder
//! and never receive gradient.

mod assembly;
mod clip;
mod frame;
mod objective;
mod parent;
pub mod primitives;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelError;

pub use assembly::{assemble_frame_sets, Arena, AnchorFamily, BatchAssembly, EmbeddingKind, FrameClip};
pub use clip::{clip_alignment_loss, mine_positives, ClipLossOutput};
pub use frame::{frame_state_loss, FrameLossOutput};
pub use objective::{
    child_loss, parent_objective, ChildClip, ChildLossOutput, ParentLossBreakdown, ParentVideo,
    StateEmbeddings,
};
pub use parent::{counterfactual_margin, parent_loss, ParentLossOutput};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("anchor {0} has no negatives")]
    EmptyNegatives(usize),
    #[error("anchor {0} has no positives")]
    EmptyPositives(usize),
    #[error("video {0} has an empty denominator")]
    EmptyDenominator(usize),
    #[error("clip {0:?} lacks a before/after annotation")]
    MissingAnnotation(String),
    #[error("frame-level sets need at least 3 frames per clip, got {0}")]
    TooFewFrames(usize),
    #[error("batch shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid loss config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How positives are chosen for the clip- and video-level softmax losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mining {
    /// `P(i) = {i}`.
    #[default]
    SelfOnly,
    /// `P(i)` adds every item whose text shares a verb-like and a noun-like
    /// token with item `i`.
    TokenOverlap,
}

/// Whose counterfactuals enter a video's parent-loss denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfAttachment {
    /// Only the anchor video's own counterfactuals.
    #[default]
    Own,
    /// Counterfactuals of every video in the batch.
    Batch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub tau: f64,
    pub lambda: f64,
    pub frame_batch_negatives: bool,
    pub mining: Mining,
    pub parent_positive_in_denominator: bool,
    pub cf_attachment: CfAttachment,
    pub w_cap: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            tau: 0.05,
            lambda: 1.0,
            frame_batch_negatives: true,
            mining: Mining::SelfOnly,
            parent_positive_in_denominator: true,
            cf_attachment: CfAttachment::Own,
            w_cap: 4,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), LossError> {
        if !(self.tau > 0.0 && self.tau <= 10.0) {
            return Err(LossError::InvalidConfig(format!("tau {} outside (0, 10]", self.tau)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(LossError::InvalidConfig(format!("lambda {} must be >= 0", self.lambda)));
        }
        Ok(())
    }
}
