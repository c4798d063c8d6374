use std::collections::BTreeSet;

use crate::embed::tokenize;
use crate::linalg::{self, axpy};

use super::primitives::infonce_term;
use super::{LossError, Mining};

const ACTOR: &str = "c";
const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "to", "from", "in", "on", "at", "into", "onto", "with", "and", "or", "his", "her", "its",
    "their", "some", "is", "are", "was",
];

#[derive(Debug, Clone)]
pub struct ClipLossOutput {
    pub value: f64,
    pub per_item: Vec<f64>,
    /// `∂L/∂v_i`.
    pub grad_v: Vec<Vec<f64>>,
}

/// Verb-like tokens follow the actor token; noun-like tokens are the rest
/// minus stopwords.
fn rough_tags(text: &str) -> (BTreeSet<String>, BTreeSet<String>) {
    let toks = tokenize(text);
    let mut verbs = BTreeSet::new();
    let mut verb_pos = BTreeSet::new();
    for i in 0..toks.len().saturating_sub(1) {
        if toks[i] == ACTOR && toks[i + 1] != ACTOR {
            verbs.insert(toks[i + 1].clone());
            verb_pos.insert(i + 1);
        }
    }
    let nouns = toks
        .iter()
        .enumerate()
        .filter(|(i, t)| *t != ACTOR && !verb_pos.contains(i) && !STOPWORDS.contains(&t.as_str()))
        .map(|(_, t)| t.clone())
        .collect();
    (verbs, nouns)
}

/// `P(i)` for every item of a batch. Always contains `i`.
pub fn mine_positives(texts: &[&str], mining: Mining) -> Vec<Vec<usize>> {
    match mining {
        Mining::SelfOnly => (0..texts.len()).map(|i| vec![i]).collect(),
        Mining::TokenOverlap => {
            let tags: Vec<_> = texts.iter().map(|t| rough_tags(t)).collect();
            (0..texts.len())
                .map(|i| {
                    (0..texts.len())
                        .filter(|&j| {
                            j == i
                                || (!tags[i].0.is_disjoint(&tags[j].0) && !tags[i].1.is_disjoint(&tags[j].1))
                        })
                        .collect()
                })
                .collect()
        }
    }
}

/// Visual-to-text InfoNCE averaged over the batch:
/// `−(1/|B|) Σ_i log( Σ_{p∈P(i)} exp(v_iᵀt_p/τ) / Σ_j exp(v_iᵀt_j/τ) )`.
pub fn clip_alignment_loss(
    v: &[Vec<f64>],
    t: &[Vec<f64>],
    positives: &[Vec<usize>],
    tau: f64,
) -> Result<ClipLossOutput, LossError> {
    let b = v.len();
    if b == 0 || t.len() != b || positives.len() != b {
        return Err(LossError::ShapeMismatch(format!(
            "{} visual, {} text, {} positive sets",
            b,
            t.len(),
            positives.len()
        )));
    }
    let mut value = 0.0;
    let mut per_item = Vec::with_capacity(b);
    let mut grad_v = vec![vec![0.0; v[0].len()]; b];
    for i in 0..b {
        let pos = &positives[i];
        if pos.is_empty() {
            return Err(LossError::EmptyPositives(i));
        }
        if let Some(&bad) = pos.iter().find(|&&p| p >= b) {
            return Err(LossError::ShapeMismatch(format!("positive index {bad} outside batch of {b}")));
        }
        let logits: Vec<f64> = t.iter().map(|tj| linalg::dot(&v[i], tj) / tau).collect();
        let sp: Vec<f64> = pos.iter().map(|&p| logits[p]).collect();
        let (term, dp, dd) = infonce_term(&sp, &logits);
        per_item.push(term);
        value += term / b as f64;
        for (j, c) in dd.iter().enumerate() {
            axpy(&mut grad_v[i], c / (tau * b as f64), &t[j]);
        }
        for (&p, c) in pos.iter().zip(&dp) {
            axpy(&mut grad_v[i], c / (tau * b as f64), &t[p]);
        }
    }
    Ok(ClipLossOutput {
        value,
        per_item,
        grad_v,
    })
}
