use crate::linalg::{self, axpy};

use super::primitives::supcon_term;
use super::{AnchorFamily, Arena, BatchAssembly, LossError};

#[derive(Debug, Clone)]
pub struct FrameLossOutput {
    /// Mean over before-family anchors.
    pub before: f64,
    /// Mean over after-family anchors.
    pub after: f64,
    /// Unaveraged per-anchor terms in assembly order.
    pub per_anchor: Vec<f64>,
    /// `∂(before + after)/∂z` for every arena entry; zero for text entries.
    pub grads: Vec<Vec<f64>>,
}

impl FrameLossOutput {
    pub fn total(&self) -> f64 {
        self.before + self.after
    }
}

/// `L_before + L_after`, each the mean over its anchors of
/// `−(1/|P|) Σ_p log( exp(fᵀz_p/τ) / Σ_n exp(fᵀz_n/τ) )`.
pub fn frame_state_loss(arena: &Arena, asm: &BatchAssembly, tau: f64) -> Result<FrameLossOutput, LossError> {
    let d = arena.vectors.first().map_or(0, Vec::len);
    let mut grads = vec![vec![0.0; d]; arena.len()];
    let count = |fam| asm.families.iter().filter(|f| **f == fam).count();
    let (n_before, n_after) = (count(AnchorFamily::Before), count(AnchorFamily::After));
    let mut before = 0.0;
    let mut after = 0.0;
    let mut per_anchor = Vec::with_capacity(asm.anchors.len());

    for (i, &a) in asm.anchors.iter().enumerate() {
        let pos = &asm.positives[i];
        let neg = &asm.negatives[i];
        if pos.is_empty() {
            return Err(LossError::EmptyPositives(i));
        }
        if neg.is_empty() {
            return Err(LossError::EmptyNegatives(i));
        }
        let anchor = &arena.vectors[a];
        let logit = |z: usize| linalg::dot(anchor, &arena.vectors[z]) / tau;
        let sp: Vec<f64> = pos.iter().map(|&z| logit(z)).collect();
        let sn: Vec<f64> = neg.iter().map(|&z| logit(z)).collect();
        let (term, dp, dn) = supcon_term(&sp, &sn);
        per_anchor.push(term);

        let weight = match asm.families[i] {
            AnchorFamily::Before => {
                before += term / n_before as f64;
                1.0 / n_before as f64
            }
            AnchorFamily::After => {
                after += term / n_after as f64;
                1.0 / n_after as f64
            }
        };

        let mut g_anchor = vec![0.0; d];
        for (&z, ds) in pos.iter().zip(&dp).chain(neg.iter().zip(&dn)) {
            let c = weight * ds / tau;
            axpy(&mut g_anchor, c, &arena.vectors[z]);
            if !arena.kinds[z].is_text() {
                axpy(&mut grads[z], c, anchor);
            }
        }
        if !arena.kinds[a].is_text() {
            axpy(&mut grads[a], 1.0, &g_anchor);
        }
    }

    Ok(FrameLossOutput {
        before,
        after,
        per_anchor,
        grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{assemble_frame_sets, FrameClip};

    #[test]
    fn identical_vectors_give_ln_of_negative_count() {
        // every embedding equal → every logit equal
        let u = vec![0.0, 1.0, 0.0];
        let frames = vec![u.clone(); 4];
        let clip = FrameClip {
            id: "c",
            frames: &frames,
            before: Some(&u),
            after: Some(&u),
            cfs: vec![&u, &u, &u],
        };
        let (arena, asm) = assemble_frame_sets(&[clip], false).unwrap();
        let out = frame_state_loss(&arena, &asm, 0.1).unwrap();
        for t in &out.per_anchor {
            assert!((t - 5f64.ln()).abs() < 1e-9);
        }
        assert!((out.total() - 2.0 * 5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn text_entries_receive_no_gradient() {
        let e = |i: usize| {
            let mut v = vec![0.0; 4];
            v[i % 4] = 1.0;
            v
        };
        let frames: Vec<_> = (0..4).map(e).collect();
        let (b, a, c) = (vec![0.6, 0.8, 0.0, 0.0], vec![0.0, 0.0, 0.8, 0.6], vec![0.5; 4]);
        let clip = FrameClip {
            id: "c",
            frames: &frames,
            before: Some(&b),
            after: Some(&a),
            cfs: vec![&c],
        };
        let (arena, asm) = assemble_frame_sets(&[clip], false).unwrap();
        let out = frame_state_loss(&arena, &asm, 0.1).unwrap();
        for (i, g) in out.grads.iter().enumerate() {
            if arena.kinds[i].is_text() {
                assert!(g.iter().all(|v| *v == 0.0));
            }
        }
        assert!(out.grads[0].iter().any(|v| *v != 0.0));
    }
}
