//! Per-anchor contrastive terms over precomputed logits (`zᵀa / τ`).
//!
//! Both return the term and its derivative with respect to each logit.

use crate::linalg::{log_sum_exp, softmax};

/// Positives summed outside the log, negatives-only denominator:
///
/// `−(1/|P|) Σ_p log( exp(s_p) / Σ_n exp(s_n) )`
pub fn supcon_term(pos: &[f64], neg: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let lse = log_sum_exp(neg);
    let np = pos.len() as f64;
    let mean_pos = pos.iter().sum::<f64>() / np;
    let d_pos = vec![-1.0 / np; pos.len()];
    (lse - mean_pos, d_pos, softmax(neg))
}

/// Positives summed inside the log:
///
/// `−log( Σ_p exp(s_p) / Σ_d exp(s_d) )`
///
/// `denom` is the full denominator; when positives belong to it they must be
/// listed there as well.
pub fn infonce_term(pos: &[f64], denom: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let value = log_sum_exp(denom) - log_sum_exp(pos);
    let d_pos = softmax(pos).into_iter().map(|p| -p).collect();
    (value, d_pos, softmax(denom))
}
