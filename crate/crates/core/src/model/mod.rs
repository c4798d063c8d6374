//! Trainable pieces: frame encoder, frame→clip pooling and the self-attention
//! aggregator. Every forward returns a trace that its backward consumes.

mod aggregator;
mod encoder;
mod gradcheck;
mod pool;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Mat;

pub use aggregator::{aggregate, aggregate_backward, sinusoidal_positions, AggregatorTrace};
pub use encoder::{encode_frames, encode_frames_backward, min_preactivation_margin, EncoderTrace};
pub use gradcheck::{grad_check, GradCheckError, GradCheckReport, REL_ERR_FLOOR};
pub use pool::{clip_embedding, clip_embedding_backward, PoolTrace};

/// Pre-normalization norms below this are treated as degenerate.
pub const MIN_NORM: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("vector norm {0:e} is too small to normalize")]
    DegenerateNorm(f64),
    #[error("expected dimension {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("empty input")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pool {
    #[default]
    Mean,
    LastFrame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_in: usize,
    pub d_h: usize,
    pub d: usize,
    #[serde(default)]
    pub pool: Pool,
    /// Add sinusoidal positions to the aggregator input.
    #[serde(default)]
    pub positional: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    /// `d_h × d_in`
    pub w1: Mat,
    pub b1: Vec<f64>,
    /// `d × d_h`
    pub w2: Mat,
    pub b2: Vec<f64>,
}

/// Right-multiplied projections: `Q = X·Wq` etc., all `d × d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatorParams {
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
    pub wo: Mat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub encoder: EncoderParams,
    pub aggregator: AggregatorParams,
}

/// Gradients share the parameter layout.
pub type Gradients = ModelParams;

/// Tensor names in canonical order, matching [`ModelParams::tensors`].
pub const TENSOR_NAMES: [&str; 8] = [
    "encoder.w1",
    "encoder.b1",
    "encoder.w2",
    "encoder.b2",
    "aggregator.wq",
    "aggregator.wk",
    "aggregator.wv",
    "aggregator.wo",
];

impl ModelParams {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let (d_in, d_h, d) = (cfg.d_in, cfg.d_h, cfg.d);
        Self {
            encoder: EncoderParams {
                w1: Mat::zeros(d_h, d_in),
                b1: vec![0.0; d_h],
                w2: Mat::zeros(d, d_h),
                b2: vec![0.0; d],
            },
            aggregator: AggregatorParams {
                wq: Mat::zeros(d, d),
                wk: Mat::zeros(d, d),
                wv: Mat::zeros(d, d),
                wo: Mat::zeros(d, d),
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        z
    }

    /// Uniform(±1/√fan_in) weights, zero biases, aggregator scaled by 0.1.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(cfg);
        let mut fill = |m: &mut Mat, fan_in: usize, scale: f64| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in m.as_mut_slice() {
                *v = scale * rng.random_range(-bound..bound);
            }
        };
        fill(&mut p.encoder.w1, cfg.d_in, 1.0);
        fill(&mut p.encoder.w2, cfg.d_h, 1.0);
        for m in [
            &mut p.aggregator.wq,
            &mut p.aggregator.wk,
            &mut p.aggregator.wv,
            &mut p.aggregator.wo,
        ] {
            fill(m, cfg.d, 0.1);
        }
        p
    }

    /// `(rows, cols)` per tensor; biases are `(n, 1)`.
    pub fn shapes(&self) -> [(usize, usize); 8] {
        let e = &self.encoder;
        let a = &self.aggregator;
        [
            e.w1.shape(),
            (e.b1.len(), 1),
            e.w2.shape(),
            (e.b2.len(), 1),
            a.wq.shape(),
            a.wk.shape(),
            a.wv.shape(),
            a.wo.shape(),
        ]
    }

    pub fn expected_shapes(cfg: &ModelConfig) -> [(usize, usize); 8] {
        let (d_in, d_h, d) = (cfg.d_in, cfg.d_h, cfg.d);
        [(d_h, d_in), (d_h, 1), (d, d_h), (d, 1), (d, d), (d, d), (d, d), (d, d)]
    }

    pub fn tensors(&self) -> [&[f64]; 8] {
        let e = &self.encoder;
        let a = &self.aggregator;
        [
            e.w1.as_slice(),
            &e.b1,
            e.w2.as_slice(),
            &e.b2,
            a.wq.as_slice(),
            a.wk.as_slice(),
            a.wv.as_slice(),
            a.wo.as_slice(),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        let e = &mut self.encoder;
        let a = &mut self.aggregator;
        [
            e.w1.as_mut_slice(),
            &mut e.b1,
            e.w2.as_mut_slice(),
            &mut e.b2,
            a.wq.as_mut_slice(),
            a.wk.as_mut_slice(),
            a.wv.as_mut_slice(),
            a.wo.as_mut_slice(),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// `self += other`
    pub fn accumulate(&mut self, other: &ModelParams) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            crate::linalg::axpy(dst, 1.0, src);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Forward-only clip embedding from raw frame features.
pub fn embed_clip(p: &ModelParams, cfg: &ModelConfig, frames: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
    let (f, _) = encode_frames(p, frames)?;
    Ok(clip_embedding(&f, cfg.pool)?.0)
}

/// Forward-only video embedding from the raw frames of its ordered clips.
pub fn embed_video(p: &ModelParams, cfg: &ModelConfig, clips: &[&[Vec<f64>]]) -> Result<Vec<f64>, ModelError> {
    let vs = clips
        .iter()
        .map(|frames| embed_clip(p, cfg, frames))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(p, cfg, &vs)?.0)
}

fn check_dim(expected: usize, got: usize) -> Result<(), ModelError> {
    if expected == got {
        Ok(())
    } else {
        Err(ModelError::ShapeMismatch { expected, got })
    }
}
