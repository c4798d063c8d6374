use crate::linalg::{self, normalize_backward};

use super::{ModelError, Pool, MIN_NORM};

pub struct PoolTrace {
    pool: Pool,
    k: usize,
    unit: Vec<f64>,
    norm: f64,
}

/// Clip embedding from its frame embeddings.
///
/// `Mean` returns `normalize(mean_k f_k)`; `LastFrame` returns `f_{K-1}`.
pub fn clip_embedding(f: &[Vec<f64>], pool: Pool) -> Result<(Vec<f64>, PoolTrace), ModelError> {
    let k = f.len();
    if k == 0 {
        return Err(ModelError::EmptyInput);
    }
    match pool {
        Pool::LastFrame => {
            let v = f[k - 1].clone();
            Ok((
                v.clone(),
                PoolTrace {
                    pool,
                    k,
                    unit: v,
                    norm: 1.0,
                },
            ))
        }
        Pool::Mean => {
            let d = f[0].len();
            let mut mean = vec![0.0; d];
            for fk in f {
                linalg::axpy(&mut mean, 1.0 / k as f64, fk);
            }
            let norm = linalg::norm(&mean);
            if !(norm >= MIN_NORM) {
                return Err(ModelError::DegenerateNorm(norm));
            }
            let v: Vec<f64> = mean.iter().map(|x| x / norm).collect();
            Ok((
                v.clone(),
                PoolTrace {
                    pool,
                    k,
                    unit: v,
                    norm,
                },
            ))
        }
    }
}

/// `∂L/∂f_k` for every frame given `∂L/∂v`.
pub fn clip_embedding_backward(trace: PoolTrace, grad_v: &[f64]) -> Vec<Vec<f64>> {
    let d = grad_v.len();
    match trace.pool {
        Pool::LastFrame => {
            let mut out = vec![vec![0.0; d]; trace.k];
            out[trace.k - 1] = grad_v.to_vec();
            out
        }
        Pool::Mean => {
            let gm = normalize_backward(&trace.unit, trace.norm, grad_v);
            let share = linalg::scaled(&gm, 1.0 / trace.k as f64);
            vec![share; trace.k]
        }
    }
}
