use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embed::EmbeddingTable;
use crate::losses::{child_loss, parent_objective, ChildClip, ParentVideo, StateEmbeddings};
use crate::model::ModelParams;

use super::{adamw_step, make_schedule, OptimizerState, Step, TrainConfig, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Child,
    Parent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub epoch: usize,
    pub kind: StepKind,
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v2t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub before: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub after: Option<f64>,
    pub grad_norm: f64,
    /// Kept in memory only so that serialized logs are reproducible.
    #[serde(skip)]
    pub wall_secs: f64,
}

/// Append-only per-step log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub records: Vec<MetricsRecord>,
}

impl MetricsLog {
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { records })
    }

    pub fn of_kind(&self, kind: StepKind) -> impl Iterator<Item = &MetricsRecord> {
        self.records.iter().filter(move |r| r.kind == kind)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ModelParams,
    pub optimizer: OptimizerState,
    pub log: MetricsLog,
}

fn lookup<'t>(table: &'t EmbeddingTable, text: &str) -> Result<&'t [f64], TrainError> {
    table
        .get(text)
        .map(|v| v.values())
        .ok_or_else(|| TrainError::MissingEmbedding(text.to_owned()))
}

/// Child-step inputs for `clip_ids`, in the given order.
pub fn child_batch<'a>(
    c: &'a Corpus,
    table: &'a EmbeddingTable,
    clip_ids: &[String],
) -> Result<Vec<ChildClip<'a>>, TrainError> {
    clip_ids
        .iter()
        .map(|id| {
            let clip = c.clips.get(id).ok_or_else(|| TrainError::InvalidConfig(format!("unknown clip {id}")))?;
            let states = match (&clip.before, &clip.after) {
                (Some(b), Some(a)) => Some(StateEmbeddings {
                    before: lookup(table, b)?,
                    after: lookup(table, a)?,
                    cfs: clip.sc_cf.iter().map(|t| lookup(table, t)).collect::<Result<_, _>>()?,
                }),
                _ => None,
            };
            Ok(ChildClip {
                id: &clip.clip_id,
                frames: &clip.frame_features,
                narration: lookup(table, &clip.narration)?,
                narration_text: &clip.narration,
                states,
            })
        })
        .collect()
}

/// Parent-step inputs; `cf_indices[i]` selects from video `i`'s
/// `k_cf ++ m_cf`.
pub fn parent_batch<'a>(
    c: &'a Corpus,
    table: &'a EmbeddingTable,
    video_ids: &[String],
    cf_indices: &[Vec<usize>],
) -> Result<Vec<ParentVideo<'a>>, TrainError> {
    video_ids
        .iter()
        .zip(cf_indices)
        .map(|(id, idx)| {
            let v = c.videos.get(id).ok_or_else(|| TrainError::InvalidConfig(format!("unknown video {id}")))?;
            let cfs: Vec<&String> = v.counterfactuals().collect();
            Ok(ParentVideo {
                id: &v.video_id,
                clips: c.video_clips(v).map(|cl| cl.frame_features.as_slice()).collect(),
                summary: lookup(table, &v.summary)?,
                summary_text: &v.summary,
                cfs: idx.iter().map(|&i| lookup(table, cfs[i])).collect::<Result<_, _>>()?,
            })
        })
        .collect()
}

/// Mean child loss over fixed batches of `batch_size` clips in id order.
/// A deterministic yardstick for comparing parameters.
pub fn evaluate_child_loss(
    p: &ModelParams,
    c: &Corpus,
    table: &EmbeddingTable,
    cfg: &TrainConfig,
) -> Result<f64, TrainError> {
    let ids: Vec<String> = c.clips.keys().cloned().collect();
    if ids.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut total = 0.0;
    let mut n = 0;
    for chunk in ids.chunks(cfg.batch_size) {
        let batch = child_batch(c, table, chunk)?;
        total += child_loss(p, &cfg.model(), &batch, &cfg.loss)?.value;
        n += 1;
    }
    Ok(total / n as f64)
}

/// Runs the schedule from `init` (or seeded initialization).
pub fn train(
    c: &Corpus,
    table: &EmbeddingTable,
    cfg: &TrainConfig,
    init: Option<(ModelParams, OptimizerState)>,
) -> Result<TrainOutput, TrainError> {
    cfg.validate()?;
    if c.d_in != cfg.d_in {
        return Err(TrainError::InvalidConfig(format!(
            "corpus d_in {} differs from config d_in {}",
            c.d_in, cfg.d_in
        )));
    }
    let (mut params, mut opt) = init.unwrap_or_else(|| {
        let p = ModelParams::init(&cfg.model(), cfg.seed);
        let s = OptimizerState::new(&p);
        (p, s)
    });
    let mut log = MetricsLog::default();
    if cfg.epochs == 0 {
        return Ok(TrainOutput {
            params,
            optimizer: opt,
            log,
        });
    }
    let schedule = make_schedule(c, cfg)?;
    let limit = cfg.max_steps.unwrap_or(usize::MAX);
    let model = cfg.model();

    for (i, step) in schedule.iter().take(limit).enumerate() {
        let t0 = Instant::now();
        let (grads, rec) = match step {
            Step::Child { epoch, clip_ids } => {
                let batch = child_batch(c, table, clip_ids)?;
                let out = child_loss(&params, &model, &batch, &cfg.loss)?;
                let rec = MetricsRecord {
                    step: i as u64,
                    epoch: *epoch,
                    kind: StepKind::Child,
                    loss: out.value,
                    v2t: Some(out.v2t),
                    before: Some(out.before),
                    after: Some(out.after),
                    grad_norm: out.grads.l2_norm(),
                    wall_secs: 0.0,
                };
                (out.grads, rec)
            }
            Step::Parent {
                epoch,
                video_ids,
                cf_indices,
            } => {
                let batch = parent_batch(c, table, video_ids, cf_indices)?;
                let out = parent_objective(&params, &model, &batch, &cfg.loss, cfg.parent_stop_encoder_grad)?;
                let rec = MetricsRecord {
                    step: i as u64,
                    epoch: *epoch,
                    kind: StepKind::Parent,
                    loss: out.value,
                    v2t: None,
                    before: None,
                    after: None,
                    grad_norm: out.grads.l2_norm(),
                    wall_secs: 0.0,
                };
                (out.grads, rec)
            }
        };
        adamw_step(&mut params, &grads, &mut opt, cfg)?;
        log.records.push(MetricsRecord {
            wall_secs: t0.elapsed().as_secs_f64(),
            ..rec
        });
        if i % 100 == 0 {
            log::debug!("step {i}: {:?} loss {:.4}", step_kind(step), log.records[i].loss);
        }
    }
    Ok(TrainOutput {
        params,
        optimizer: opt,
        log,
    })
}

fn step_kind(s: &Step) -> StepKind {
    if s.is_parent() {
        StepKind::Parent
    } else {
        StepKind::Child
    }
}
