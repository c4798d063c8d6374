use crate::linalg::{self, axpy};

use super::primitives::infonce_term;
use super::{CfAttachment, LossConfig, LossError};

#[derive(Debug, Clone)]
pub struct ParentLossOutput {
    pub value: f64,
    pub per_video: Vec<f64>,
    /// `∂L/∂V_i`.
    pub grad_v: Vec<Vec<f64>>,
}

/// Video-to-summary loss with counterfactual summaries as extra negatives,
/// summed (not averaged) over the batch:
///
/// `L = −Σ_i log( Σ_{p∈P(i)} exp(V_iᵀS_p/τ) / D_i )`
///
/// `D_i` holds the batch summaries (positives only when
/// `parent_positive_in_denominator`) plus the counterfactuals chosen by
/// `cf_attachment`.
pub fn parent_loss(
    v: &[Vec<f64>],
    s: &[Vec<f64>],
    cf: &[Vec<Vec<f64>>],
    positives: &[Vec<usize>],
    cfg: &LossConfig,
) -> Result<ParentLossOutput, LossError> {
    let b = v.len();
    if b == 0 || s.len() != b || cf.len() != b || positives.len() != b {
        return Err(LossError::ShapeMismatch(format!(
            "{} videos, {} summaries, {} cf lists, {} positive sets",
            b,
            s.len(),
            cf.len(),
            positives.len()
        )));
    }
    let tau = cfg.tau;
    let d = v[0].len();
    let mut value = 0.0;
    let mut per_video = Vec::with_capacity(b);
    let mut grad_v = vec![vec![0.0; d]; b];

    for i in 0..b {
        let pos = &positives[i];
        if pos.is_empty() {
            return Err(LossError::EmptyPositives(i));
        }
        let mut targets: Vec<&[f64]> = (0..b)
            .filter(|j| cfg.parent_positive_in_denominator || !pos.contains(j))
            .map(|j| s[j].as_slice())
            .collect();
        match cfg.cf_attachment {
            CfAttachment::Own => targets.extend(cf[i].iter().map(Vec::as_slice)),
            CfAttachment::Batch => targets.extend(cf.iter().flatten().map(Vec::as_slice)),
        }
        if targets.is_empty() {
            return Err(LossError::EmptyDenominator(i));
        }
        let denom: Vec<f64> = targets.iter().map(|z| linalg::dot(&v[i], z) / tau).collect();
        let sp: Vec<f64> = pos.iter().map(|&p| linalg::dot(&v[i], &s[p]) / tau).collect();
        let (term, dp, dd) = infonce_term(&sp, &denom);
        per_video.push(term);
        value += term;
        for (z, c) in targets.iter().zip(&dd) {
            axpy(&mut grad_v[i], c / tau, z);
        }
        for (&p, c) in pos.iter().zip(&dp) {
            axpy(&mut grad_v[i], c / tau, &s[p]);
        }
    }
    Ok(ParentLossOutput {
        value,
        per_video,
        grad_v,
    })
}

/// `V_iᵀS_i − max_w V_iᵀS^cf_{i,w}` per video; `None` when video `i` has no
/// counterfactuals.
pub fn counterfactual_margin(v: &[Vec<f64>], s: &[Vec<f64>], cf: &[Vec<Vec<f64>>]) -> Vec<Option<f64>> {
    v.iter()
        .zip(s)
        .zip(cf)
        .map(|((vi, si), cfi)| {
            let best = cfi
                .iter()
                .map(|c| linalg::dot(vi, c))
                .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))))?;
            Some(linalg::dot(vi, si) - best)
        })
        .collect()
}
