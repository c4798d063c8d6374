//! Central-difference verification of analytic gradients.

use serde::Serialize;
use thiserror::Error;

use super::{Gradients, ModelParams, TENSOR_NAMES};

pub const REL_ERR_FLOOR: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradCheckError {
    #[error("loss is not finite ({0})")]
    NonFiniteLoss(f64),
    #[error("analytic gradient shape differs from parameters")]
    ShapeMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Tensor name and flat index of the worst entry.
    pub worst_tensor: &'static str,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub n_checked: usize,
}

/// Compares `analytic` against `(L(θ+ε) − L(θ−ε)) / 2ε` for every
/// parameter. The relative error of one entry is
/// `|a − n| / max(|a|, |n|, REL_ERR_FLOOR)`; the floor keeps entries whose
/// true gradient is below finite-difference resolution from dominating.
pub fn grad_check<F>(loss: F, p: &ModelParams, analytic: &Gradients, eps: f64) -> Result<GradCheckReport, GradCheckError>
where
    F: Fn(&ModelParams) -> f64,
{
    if p.shapes() != analytic.shapes() {
        return Err(GradCheckError::ShapeMismatch);
    }
    let base = loss(p);
    if !base.is_finite() {
        return Err(GradCheckError::NonFiniteLoss(base));
    }
    let mut probe = p.clone();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_tensor: TENSOR_NAMES[0],
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        n_checked: 0,
    };
    let grads = analytic.tensors();
    for t in 0..TENSOR_NAMES.len() {
        for i in 0..grads[t].len() {
            let orig = probe.tensors()[t][i];
            probe.tensors_mut()[t][i] = orig + eps;
            let up = loss(&probe);
            probe.tensors_mut()[t][i] = orig - eps;
            let down = loss(&probe);
            probe.tensors_mut()[t][i] = orig;
            for v in [up, down] {
                if !v.is_finite() {
                    return Err(GradCheckError::NonFiniteLoss(v));
                }
            }
            let numeric = (up - down) / (2.0 * eps);
            let a = grads[t][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
            report.n_checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_tensor = TENSOR_NAMES[t];
                report.worst_index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, Pool};

    fn cfg() -> ModelConfig {
        ModelConfig {
            d_in: 3,
            d_h: 4,
            d: 3,
            pool: Pool::Mean,
            positional: false,
        }
    }

    #[test]
    fn quadratic_closure_is_exact() {
        let p = ModelParams::init(&cfg(), 9);
        let half_sq = |q: &ModelParams| 0.5 * q.l2_norm().powi(2);
        // central differences are exact on quadratics; a wide step keeps
        // roundoff in L(θ±ε) far below the tolerance
        let report = grad_check(half_sq, &p, &p, 1e-2).unwrap();
        assert!(report.max_rel_err < 1e-9, "{report:?}");
        assert_eq!(report.n_checked, p.num_params());
    }

    #[test]
    fn nan_closure_is_rejected() {
        let p = ModelParams::init(&cfg(), 9);
        assert!(matches!(
            grad_check(|_| f64::NAN, &p, &p, 1e-5),
            Err(GradCheckError::NonFiniteLoss(_))
        ));
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let p = ModelParams::init(&cfg(), 9);
        let mut wrong = p.clone();
        wrong.encoder.w1.as_mut_slice()[0] += 1.0;
        let half_sq = |q: &ModelParams| 0.5 * q.l2_norm().powi(2);
        let report = grad_check(half_sq, &p, &wrong, 1e-5).unwrap();
        assert!(report.max_rel_err > 0.1);
        assert_eq!(report.worst_tensor, "encoder.w1");
    }
}
