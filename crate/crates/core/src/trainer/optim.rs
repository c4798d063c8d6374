use serde::{Deserialize, Serialize};

use crate::model::{Gradients, ModelParams};

use super::{TrainConfig, TrainError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(p: &ModelParams) -> Self {
        Self {
            m: p.zeros_like(),
            v: p.zeros_like(),
            step: 0,
        }
    }
}

/// One AdamW update with decoupled weight decay:
///
/// `θ ← θ − lr·m̂/(√v̂ + ε) − lr·wd·θ`
pub fn adamw_step(p: &mut ModelParams, g: &Gradients, s: &mut OptimizerState, cfg: &TrainConfig) -> Result<(), TrainError> {
    if !g.is_finite() {
        return Err(TrainError::NonFiniteGradient);
    }
    if p.shapes() != g.shapes() || p.shapes() != s.m.shapes() {
        return Err(TrainError::ShapeMismatch("gradient/optimizer shapes differ from params".into()));
    }
    s.step += 1;
    let t = s.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let (lr, wd, eps) = (cfg.lr, cfg.weight_decay, cfg.eps_adam);

    let grads = g.tensors();
    let mut ms = s.m.tensors_mut();
    let mut vs = s.v.tensors_mut();
    for (ti, theta) in p.tensors_mut().into_iter().enumerate() {
        let (m, v, gt) = (&mut ms[ti], &mut vs[ti], grads[ti]);
        for j in 0..theta.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * gt[j];
            v[j] = b2 * v[j] + (1.0 - b2) * gt[j] * gt[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            theta[j] -= lr * m_hat / (v_hat.sqrt() + eps) + lr * wd * theta[j];
        }
    }
    Ok(())
}
