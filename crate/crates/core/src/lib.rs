//! Hierarchical, procedure-aware contrastive pretraining at desk scale.

pub mod corpus;
pub mod embed;
pub mod eval;
pub mod linalg;
pub mod losses;
pub mod model;
pub mod textgen;
pub mod trainer;
