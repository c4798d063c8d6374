//! Desk-scale probes of procedure awareness: retrieval, a before/after phase
//! probe and counterfactual margins.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::embed::EmbeddingTable;
use crate::linalg;
use crate::losses::counterfactual_margin;
use crate::model::{embed_clip, embed_video, encode_frames, ModelConfig, ModelError, ModelParams};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no embedding for text {0:?}")]
    MissingEmbedding(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Clip,
    Video,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub recall_at_1: f64,
    pub recall_at_5: f64,
    pub mean_rank: f64,
    pub n_queries: usize,
    pub n_candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub accuracy: f64,
    /// `confusion[truth][predicted]`, 0 = before, 1 = after.
    pub confusion: [[u64; 2]; 2],
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSummary {
    pub n: usize,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub fraction_positive: Option<f64>,
}

fn lookup<'t>(table: &'t EmbeddingTable, text: &str) -> Result<&'t [f64], EvalError> {
    table
        .get(text)
        .map(|v| v.values())
        .ok_or_else(|| EvalError::MissingEmbedding(text.to_owned()))
}

/// 1-based rank of `target` when `candidates` are sorted by descending
/// `queryᵀc`; equal scores are ordered by candidate index.
pub fn rank_of(query: &[f64], candidates: &[Vec<f64>], target: usize) -> usize {
    let score = |j: usize| linalg::dot(query, &candidates[j]);
    let st = score(target);
    1 + (0..candidates.len())
        .filter(|&j| {
            let s = score(j);
            s > st || (s == st && j < target)
        })
        .count()
}

/// Ranks every query against every candidate; `targets[i]` is the index of
/// query `i`'s true candidate.
pub fn rank_retrieval(queries: &[Vec<f64>], candidates: &[Vec<f64>], targets: &[usize]) -> RetrievalReport {
    let ranks: Vec<usize> = queries
        .iter()
        .zip(targets)
        .map(|(q, &t)| rank_of(q, candidates, t))
        .collect();
    let n = ranks.len().max(1) as f64;
    RetrievalReport {
        recall_at_1: ranks.iter().filter(|&&r| r == 1).count() as f64 / n,
        recall_at_5: ranks.iter().filter(|&&r| r <= 5).count() as f64 / n,
        mean_rank: ranks.iter().sum::<usize>() as f64 / n,
        n_queries: ranks.len(),
        n_candidates: candidates.len(),
    }
}

/// Visual→text retrieval at clip level (narrations) or video level
/// (summaries). Candidates are listed in id order, which breaks ties.
pub fn retrieval_eval(
    p: &ModelParams,
    cfg: &ModelConfig,
    c: &Corpus,
    table: &EmbeddingTable,
    level: Level,
) -> Result<RetrievalReport, EvalError> {
    let (queries, texts) = match level {
        Level::Clip => {
            let q = c
                .clips
                .values()
                .map(|cl| embed_clip(p, cfg, &cl.frame_features))
                .collect::<Result<Vec<_>, _>>()?;
            let t = c
                .clips
                .values()
                .map(|cl| lookup(table, &cl.narration).map(<[f64]>::to_vec))
                .collect::<Result<Vec<_>, _>>()?;
            (q, t)
        }
        Level::Video => {
            let q = c
                .videos
                .values()
                .map(|v| {
                    let frames: Vec<&[Vec<f64>]> = c.video_clips(v).map(|cl| cl.frame_features.as_slice()).collect();
                    embed_video(p, cfg, &frames)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let t = c
                .videos
                .values()
                .map(|v| lookup(table, &v.summary).map(<[f64]>::to_vec))
                .collect::<Result<Vec<_>, _>>()?;
            (q, t)
        }
    };
    let targets: Vec<usize> = (0..queries.len()).collect();
    Ok(rank_retrieval(&queries, &texts, &targets))
}

/// Classifies each first frame and last frame by its nearer state text.
/// Ties go to "before".
pub fn phase_from_embeddings(items: &[(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)]) -> PhaseReport {
    let mut confusion = [[0u64; 2]; 2];
    for (first, last, tb, ta) in items {
        for (truth, f) in [(0usize, first), (1usize, last)] {
            let pred = usize::from(linalg::dot(f, ta) > linalg::dot(f, tb));
            confusion[truth][pred] += 1;
        }
    }
    let n = confusion.iter().flatten().sum::<u64>();
    PhaseReport {
        accuracy: if n == 0 {
            0.0
        } else {
            (confusion[0][0] + confusion[1][1]) as f64 / n as f64
        },
        confusion,
        n,
    }
}

/// Phase probe over every clip that carries a before/after pair.
pub fn phase_probe(
    p: &ModelParams,
    c: &Corpus,
    table: &EmbeddingTable,
) -> Result<PhaseReport, EvalError> {
    let mut items = Vec::new();
    for clip in c.clips.values() {
        let (Some(b), Some(a)) = (&clip.before, &clip.after) else {
            continue;
        };
        let (f, _) = encode_frames(p, &clip.frame_features)?;
        let (first, last) = (f[0].clone(), f[f.len() - 1].clone());
        items.push((first, last, lookup(table, b)?.to_vec(), lookup(table, a)?.to_vec()));
    }
    Ok(phase_from_embeddings(&items))
}

/// Mean, min and positive fraction over the defined margins.
pub fn summarize_margins(margins: &[Option<f64>]) -> MarginSummary {
    let m: Vec<f64> = margins.iter().flatten().copied().collect();
    if m.is_empty() {
        return MarginSummary {
            n: 0,
            mean: None,
            min: None,
            fraction_positive: None,
        };
    }
    let n = m.len() as f64;
    MarginSummary {
        n: m.len(),
        mean: Some(m.iter().sum::<f64>() / n),
        min: Some(m.iter().copied().fold(f64::INFINITY, f64::min)),
        fraction_positive: Some(m.iter().filter(|&&x| x > 0.0).count() as f64 / n),
    }
}

/// Counterfactual margins of every video against all of its counterfactuals.
pub fn margin_eval(
    p: &ModelParams,
    cfg: &ModelConfig,
    c: &Corpus,
    table: &EmbeddingTable,
) -> Result<MarginSummary, EvalError> {
    let mut vids = Vec::new();
    let mut sums = Vec::new();
    let mut cfs = Vec::new();
    for v in c.videos.values() {
        let frames: Vec<&[Vec<f64>]> = c.video_clips(v).map(|cl| cl.frame_features.as_slice()).collect();
        vids.push(embed_video(p, cfg, &frames)?);
        sums.push(lookup(table, &v.summary)?.to_vec());
        cfs.push(
            v.counterfactuals()
                .map(|t| lookup(table, t).map(<[f64]>::to_vec))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok(summarize_margins(&counterfactual_margin(&vids, &sums, &cfs)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub retrieval: RetrievalReport,
    pub level: Level,
    pub phase: PhaseReport,
    pub margin: MarginSummary,
}

/// Retrieval at `level` plus the phase probe and margin summary.
pub fn evaluate(
    p: &ModelParams,
    cfg: &ModelConfig,
    c: &Corpus,
    table: &EmbeddingTable,
    level: Level,
) -> Result<EvalReport, EvalError> {
    Ok(EvalReport {
        retrieval: retrieval_eval(p, cfg, c, table, level)?,
        level,
        phase: phase_probe(p, c, table)?,
        margin: margin_eval(p, cfg, c, table)?,
    })
}
