use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::losses::{child_loss, parent_objective, ChildClip, ParentVideo, StateEmbeddings};
use crate::model::{grad_check, min_preactivation_margin, GradCheckReport, ModelParams};

use super::{TrainConfig, TrainError};

/// Relative-error bound both closures must meet.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
const EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectiveCheck {
    pub seed: u64,
    pub child: GradCheckReport,
    pub parent: GradCheckReport,
}

impl ObjectiveCheck {
    pub fn max_rel_err(&self) -> f64 {
        self.child.max_rel_err.max(self.parent.max_rel_err)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() < GRADCHECK_TOLERANCE
    }
}

fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = crate::linalg::norm(&v);
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Finite-difference check of the child closure (frames → encoder → pooling
/// → v2t + state losses) and the parent closure (frames → encoder → pooling
/// → aggregator → parent loss) on a random problem sized by `cfg`.
///
/// Biases and aggregator weights are drawn from ±0.5 so that no gradient
/// path is trivially zero. Frames are redrawn until every ReLU
/// pre-activation sits well clear of its kink.
pub fn check_objectives(cfg: &TrainConfig, seed: u64) -> Result<ObjectiveCheck, TrainError> {
    cfg.validate()?;
    let model = cfg.model();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ModelParams::init(&model, seed);
    for b in p.encoder.b1.iter_mut().chain(p.encoder.b2.iter_mut()) {
        *b = rng.random_range(-0.5..0.5);
    }
    for t in [
        &mut p.aggregator.wq,
        &mut p.aggregator.wk,
        &mut p.aggregator.wv,
        &mut p.aggregator.wo,
    ] {
        t.as_mut_slice().iter_mut().for_each(|x| *x = rng.random_range(-0.5..0.5));
    }

    let mut clips: Vec<Vec<Vec<f64>>> = Vec::new();
    for attempt in 0.. {
        clips = (0..4)
            .map(|_| {
                (0..cfg.k)
                    .map(|_| (0..cfg.d_in).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect();
        let all: Vec<Vec<f64>> = clips.iter().flatten().cloned().collect();
        if min_preactivation_margin(&p, &all) > 10.0 * EPS {
            break;
        }
        if attempt == 1000 {
            return Err(TrainError::InvalidConfig("could not draw frames away from ReLU kinks".into()));
        }
    }
    let texts: Vec<Vec<f64>> = (0..16).map(|_| unit(&mut rng, cfg.d)).collect();

    let child: Vec<ChildClip> = (0..2)
        .map(|i| ChildClip {
            id: "gradcheck",
            frames: &clips[i],
            narration: &texts[i],
            narration_text: "",
            states: Some(StateEmbeddings {
                before: &texts[2 + i],
                after: &texts[4 + i],
                cfs: vec![&texts[6 + i], &texts[8 + i]],
            }),
        })
        .collect();
    let out = child_loss(&p, &model, &child, &cfg.loss)?;
    let child_report = grad_check(
        |q| child_loss(q, &model, &child, &cfg.loss).map_or(f64::NAN, |o| o.value),
        &p,
        &out.grads,
        EPS,
    )
    .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;

    let videos: Vec<ParentVideo> = (0..2)
        .map(|i| ParentVideo {
            id: "gradcheck",
            clips: vec![&clips[2 * i], &clips[2 * i + 1]],
            summary: &texts[10 + i],
            summary_text: "",
            cfs: vec![&texts[12 + i], &texts[14 + i]],
        })
        .collect();
    // always the full closure; the stop-gradient variant is a training switch
    let out = parent_objective(&p, &model, &videos, &cfg.loss, false)?;
    let parent_report = grad_check(
        |q| parent_objective(q, &model, &videos, &cfg.loss, false).map_or(f64::NAN, |o| o.value),
        &p,
        &out.grads,
        EPS,
    )
    .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;

    Ok(ObjectiveCheck {
        seed,
        child: child_report,
        parent: parent_report,
    })
}
