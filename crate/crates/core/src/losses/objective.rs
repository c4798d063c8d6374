//! The child and parent objectives evaluated end to end through the model.

use crate::linalg::axpy;
use crate::model::{
    aggregate, aggregate_backward, clip_embedding, clip_embedding_backward, encode_frames, encode_frames_backward,
    EncoderTrace, Gradients, ModelConfig, ModelParams, PoolTrace,
};

use super::{
    assemble_frame_sets, clip_alignment_loss, counterfactual_margin, frame_state_loss, mine_positives, parent_loss,
    FrameClip, LossConfig, LossError,
};

/// Frozen text embeddings describing a clip's state change.
#[derive(Debug, Clone)]
pub struct StateEmbeddings<'a> {
    pub before: &'a [f64],
    pub after: &'a [f64],
    pub cfs: Vec<&'a [f64]>,
}

#[derive(Debug, Clone)]
pub struct ChildClip<'a> {
    pub id: &'a str,
    /// Raw frame features, time-ordered.
    pub frames: &'a [Vec<f64>],
    pub narration: &'a [f64],
    /// Narration source text, used by token-overlap mining.
    pub narration_text: &'a str,
    /// Clips without states are left out of the frame-level loss.
    pub states: Option<StateEmbeddings<'a>>,
}

#[derive(Debug, Clone)]
pub struct ChildLossOutput {
    /// `v2t + λ(before + after)`
    pub value: f64,
    pub v2t: f64,
    pub before: f64,
    pub after: f64,
    /// Clips that entered the frame-level loss.
    pub n_state_clips: usize,
    pub grads: Gradients,
}

struct ClipForward {
    frames: Vec<Vec<f64>>,
    enc: EncoderTrace,
    v: Vec<f64>,
    pool: PoolTrace,
}

fn forward_clip(p: &ModelParams, cfg: &ModelConfig, frames: &[Vec<f64>]) -> Result<ClipForward, LossError> {
    let (f, enc) = encode_frames(p, frames)?;
    let (v, pool) = clip_embedding(&f, cfg.pool)?;
    Ok(ClipForward { frames: f, enc, v, pool })
}

/// Clip-level alignment plus `λ` times the before/after frame losses, with
/// gradients backpropagated through pooling and the frame encoder.
pub fn child_loss(
    p: &ModelParams,
    cfg: &ModelConfig,
    batch: &[ChildClip<'_>],
    loss: &LossConfig,
) -> Result<ChildLossOutput, LossError> {
    loss.validate()?;
    let fwd = batch
        .iter()
        .map(|c| forward_clip(p, cfg, c.frames))
        .collect::<Result<Vec<_>, _>>()?;

    let v: Vec<Vec<f64>> = fwd.iter().map(|c| c.v.clone()).collect();
    let t: Vec<Vec<f64>> = batch.iter().map(|c| c.narration.to_vec()).collect();
    let texts: Vec<&str> = batch.iter().map(|c| c.narration_text).collect();
    let clip_out = clip_alignment_loss(&v, &t, &mine_positives(&texts, loss.mining), loss.tau)?;

    let mut grad_f: Vec<Vec<Vec<f64>>> = fwd.iter().map(|c| vec![vec![0.0; c.v.len()]; c.frames.len()]).collect();
    let state_idx: Vec<usize> = (0..batch.len()).filter(|&i| batch[i].states.is_some()).collect();
    let (mut before, mut after) = (0.0, 0.0);
    if !state_idx.is_empty() && loss.lambda > 0.0 {
        let frame_clips: Vec<FrameClip<'_>> = state_idx
            .iter()
            .map(|&i| {
                let s = batch[i].states.as_ref().expect("filtered");
                FrameClip {
                    id: batch[i].id,
                    frames: &fwd[i].frames,
                    before: Some(s.before),
                    after: Some(s.after),
                    cfs: s.cfs.clone(),
                }
            })
            .collect();
        let (arena, asm) = assemble_frame_sets(&frame_clips, loss.frame_batch_negatives)?;
        let out = frame_state_loss(&arena, &asm, loss.tau)?;
        before = out.before;
        after = out.after;
        for (z, g) in out.grads.iter().enumerate() {
            if let Some(pos) = arena.frame_pos[z] {
                let clip = state_idx[arena.owners[z]];
                axpy(&mut grad_f[clip][pos], loss.lambda, g);
            }
        }
    }

    let mut grads = p.zeros_like();
    for ((c, gv), mut gf) in fwd.into_iter().zip(&clip_out.grad_v).zip(grad_f) {
        let from_pool = clip_embedding_backward(c.pool, gv);
        for (a, b) in gf.iter_mut().zip(&from_pool) {
            axpy(a, 1.0, b);
        }
        encode_frames_backward(p, c.enc, &gf, &mut grads);
    }

    Ok(ChildLossOutput {
        value: clip_out.value + loss.lambda * (before + after),
        v2t: clip_out.value,
        before,
        after,
        n_state_clips: state_idx.len(),
        grads,
    })
}

#[derive(Debug, Clone)]
pub struct ParentVideo<'a> {
    pub id: &'a str,
    /// Raw frames of each clip, in temporal order.
    pub clips: Vec<&'a [Vec<f64>]>,
    pub summary: &'a [f64],
    pub summary_text: &'a str,
    /// Counterfactual summaries sampled for this step.
    pub cfs: Vec<&'a [f64]>,
}

#[derive(Debug, Clone)]
pub struct ParentLossBreakdown {
    pub value: f64,
    pub per_video: Vec<f64>,
    pub margins: Vec<Option<f64>>,
    pub grads: Gradients,
}

/// Video-level loss through the aggregator and, unless `stop_encoder_grad`,
/// through pooling and the frame encoder.
pub fn parent_objective(
    p: &ModelParams,
    cfg: &ModelConfig,
    videos: &[ParentVideo<'_>],
    loss: &LossConfig,
    stop_encoder_grad: bool,
) -> Result<ParentLossBreakdown, LossError> {
    loss.validate()?;
    let mut clip_fwd = Vec::with_capacity(videos.len());
    let mut vids = Vec::with_capacity(videos.len());
    let mut agg_traces = Vec::with_capacity(videos.len());
    for video in videos {
        let fwd = video
            .clips
            .iter()
            .map(|frames| forward_clip(p, cfg, frames))
            .collect::<Result<Vec<_>, _>>()?;
        let vs: Vec<Vec<f64>> = fwd.iter().map(|c| c.v.clone()).collect();
        let (vid, trace) = aggregate(p, cfg, &vs)?;
        vids.push(vid);
        agg_traces.push(trace);
        clip_fwd.push(fwd);
    }

    let s: Vec<Vec<f64>> = videos.iter().map(|v| v.summary.to_vec()).collect();
    let cf: Vec<Vec<Vec<f64>>> = videos
        .iter()
        .map(|v| v.cfs.iter().map(|c| c.to_vec()).collect())
        .collect();
    let texts: Vec<&str> = videos.iter().map(|v| v.summary_text).collect();
    let out = parent_loss(&vids, &s, &cf, &mine_positives(&texts, loss.mining), loss)?;
    let margins = counterfactual_margin(&vids, &s, &cf);

    let mut grads = p.zeros_like();
    for ((fwd, trace), gv) in clip_fwd.into_iter().zip(agg_traces).zip(&out.grad_v) {
        let g_clips = aggregate_backward(p, trace, gv, &mut grads);
        if stop_encoder_grad {
            continue;
        }
        for (c, gc) in fwd.into_iter().zip(&g_clips) {
            let gf = clip_embedding_backward(c.pool, gc);
            encode_frames_backward(p, c.enc, &gf, &mut grads);
        }
    }

    Ok(ParentLossBreakdown {
        value: out.value,
        per_video: out.per_video,
        margins,
        grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{grad_check, min_preactivation_margin, Pool};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> ModelConfig {
        ModelConfig {
            d_in: 6,
            d_h: 8,
            d: 5,
            pool: Pool::Mean,
            positional: false,
        }
    }

    fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = crate::linalg::norm(&v);
        v.into_iter().map(|x| x / n).collect()
    }

    fn frames(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..4).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    fn randomized(seed: u64, rng: &mut ChaCha8Rng) -> ModelParams {
        let mut p = ModelParams::init(&cfg(), seed);
        for b in p.encoder.b1.iter_mut().chain(p.encoder.b2.iter_mut()) {
            *b = rng.random_range(-0.5..0.5);
        }
        for t in [&mut p.aggregator.wq, &mut p.aggregator.wk, &mut p.aggregator.wv, &mut p.aggregator.wo] {
            t.as_mut_slice().iter_mut().for_each(|x| *x = rng.random_range(-0.5..0.5));
        }
        p
    }

    #[test]
    fn child_components_add_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = randomized(2, &mut rng);
        let fr: Vec<_> = (0..2).map(|_| frames(&mut rng)).collect();
        let texts: Vec<Vec<f64>> = (0..8).map(|_| unit(&mut rng, 5)).collect();
        let batch: Vec<ChildClip> = (0..2)
            .map(|i| ChildClip {
                id: "c",
                frames: &fr[i],
                narration: &texts[4 * i],
                narration_text: "",
                states: Some(StateEmbeddings {
                    before: &texts[4 * i + 1],
                    after: &texts[4 * i + 2],
                    cfs: vec![&texts[4 * i + 3]],
                }),
            })
            .collect();
        let l1 = child_loss(&p, &cfg(), &batch, &LossConfig::default()).unwrap();
        assert!((l1.value - (l1.v2t + l1.before + l1.after)).abs() < 1e-12);
        let l0 = child_loss(&p, &cfg(), &batch, &LossConfig { lambda: 0.0, ..LossConfig::default() }).unwrap();
        assert_eq!(l0.value, l0.v2t);
        assert_eq!(l0.v2t, l1.v2t);
    }

    #[test]
    fn child_and_parent_closures_pass_grad_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let loss = LossConfig {
            tau: 0.1,
            ..LossConfig::default()
        };
        let eps = 1e-5;
        let mut checked = 0;
        for seed in 0..6u64 {
            let p = randomized(seed, &mut rng);
            let fr: Vec<_> = (0..4).map(|_| frames(&mut rng)).collect();
            let texts: Vec<Vec<f64>> = (0..16).map(|_| unit(&mut rng, 5)).collect();
            let all: Vec<Vec<f64>> = fr.iter().flatten().cloned().collect();
            if min_preactivation_margin(&p, &all) < 10.0 * eps {
                continue;
            }
            let child: Vec<ChildClip> = (0..2)
                .map(|i| ChildClip {
                    id: "c",
                    frames: &fr[i],
                    narration: &texts[i],
                    narration_text: "",
                    states: Some(StateEmbeddings {
                        before: &texts[2 + i],
                        after: &texts[4 + i],
                        cfs: vec![&texts[6 + i], &texts[8 + i]],
                    }),
                })
                .collect();
            let out = child_loss(&p, &cfg(), &child, &loss).unwrap();
            let r = grad_check(|q| child_loss(q, &cfg(), &child, &loss).unwrap().value, &p, &out.grads, eps).unwrap();
            assert!(r.max_rel_err < 1e-4, "child seed {seed}: {r:?}");

            let videos: Vec<ParentVideo> = (0..2)
                .map(|i| ParentVideo {
                    id: "v",
                    clips: vec![&fr[2 * i], &fr[2 * i + 1]],
                    summary: &texts[10 + i],
                    summary_text: "",
                    cfs: vec![&texts[12 + i], &texts[14 + i]],
                })
                .collect();
            let out = parent_objective(&p, &cfg(), &videos, &loss, false).unwrap();
            let r = grad_check(
                |q| parent_objective(q, &cfg(), &videos, &loss, false).unwrap().value,
                &p,
                &out.grads,
                eps,
            )
            .unwrap();
            assert!(r.max_rel_err < 1e-4, "parent seed {seed}: {r:?}");
            checked += 1;
        }
        assert!(checked >= 3);
    }

    #[test]
    fn stop_grad_leaves_encoder_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = randomized(4, &mut rng);
        let fr = frames(&mut rng);
        let s = unit(&mut rng, 5);
        let c = unit(&mut rng, 5);
        let videos = [ParentVideo {
            id: "v",
            clips: vec![&fr, &fr],
            summary: &s,
            summary_text: "",
            cfs: vec![&c],
        }];
        let out = parent_objective(&p, &cfg(), &videos, &LossConfig::default(), true).unwrap();
        assert!(out.grads.encoder.w1.as_slice().iter().all(|v| *v == 0.0));
        assert!(out.grads.aggregator.wo.as_slice().iter().any(|v| *v != 0.0));
    }
}
