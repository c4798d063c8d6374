use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;

use super::{TrainConfig, TrainError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Step {
    Child {
        epoch: usize,
        clip_ids: Vec<String>,
    },
    Parent {
        epoch: usize,
        video_ids: Vec<String>,
        /// Indices into each video's `k_cf ++ m_cf`, parallel to `video_ids`.
        cf_indices: Vec<Vec<usize>>,
    },
}

impl Step {
    pub fn is_parent(&self) -> bool {
        matches!(self, Self::Parent { .. })
    }

    pub fn epoch(&self) -> usize {
        match self {
            Self::Child { epoch, .. } | Self::Parent { epoch, .. } => *epoch,
        }
    }
}

/// Independent stream per `(tag, n)` under one seed.
fn stream(seed: u64, tag: u64, n: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ n.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    r.set_stream(tag);
    r
}

/// Every step of training, in order.
///
/// Each epoch shuffles the clips (seeded by `(seed, epoch)`) into batches of
/// `batch_size`, the remainder forming a final short batch, and inserts a
/// parent step after every `child_steps_per_parent` child steps. Parent
/// batches draw `video_batch` videos without replacement from a shuffled
/// cycle that runs independently of epochs, and up to `w_cap`
/// counterfactuals per video.
pub fn make_schedule(c: &Corpus, cfg: &TrainConfig) -> Result<Vec<Step>, TrainError> {
    if c.clips.is_empty() || c.videos.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let clip_ids: Vec<&String> = c.clips.keys().collect();
    let video_ids: Vec<&String> = c.videos.keys().collect();
    let per_parent = cfg.video_batch.min(video_ids.len());

    let mut steps = Vec::new();
    let mut cycle: Vec<&String> = Vec::new();
    let mut n_cycles = 0u64;
    let mut n_parent = 0u64;
    for epoch in 0..cfg.epochs {
        let mut order = clip_ids.clone();
        order.shuffle(&mut stream(cfg.seed, 1, epoch as u64));
        for (i, batch) in order.chunks(cfg.batch_size).enumerate() {
            steps.push(Step::Child {
                epoch,
                clip_ids: batch.iter().map(|s| (*s).clone()).collect(),
            });
            if (i + 1) % cfg.child_steps_per_parent != 0 {
                continue;
            }
            let mut chosen = Vec::with_capacity(per_parent);
            while chosen.len() < per_parent {
                if cycle.is_empty() {
                    cycle = video_ids.clone();
                    cycle.shuffle(&mut stream(cfg.seed, 2, n_cycles));
                    n_cycles += 1;
                    cycle.reverse();
                }
                let v = cycle.pop().expect("refilled");
                if !chosen.contains(&v) {
                    chosen.push(v);
                }
            }
            let mut rng = stream(cfg.seed, 3, n_parent);
            n_parent += 1;
            let cf_indices = chosen
                .iter()
                .map(|v| {
                    let n = c.videos[*v].counterfactuals().count();
                    let mut idx: Vec<usize> = (0..n).collect();
                    idx.shuffle(&mut rng);
                    idx.truncate(cfg.loss.w_cap);
                    idx
                })
                .collect();
            steps.push(Step::Parent {
                epoch,
                video_ids: chosen.into_iter().cloned().collect(),
                cf_indices,
            });
        }
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synthesize_corpus, SynthSpec};

    fn corpus(n_videos: usize, clips: usize) -> Corpus {
        synthesize_corpus(&SynthSpec::new(n_videos, clips, 4, 0.0, 1)).unwrap().corpus
    }

    #[test]
    fn thirty_child_batches_give_six_parent_steps() {
        let c = corpus(5, 6);
        let cfg = TrainConfig {
            batch_size: 1,
            epochs: 1,
            ..TrainConfig::default()
        };
        let s = make_schedule(&c, &cfg).unwrap();
        assert_eq!(s.iter().filter(|x| !x.is_parent()).count(), 30);
        assert_eq!(s.iter().filter(|x| x.is_parent()).count(), 6);
        assert_eq!(s, make_schedule(&c, &cfg).unwrap());
    }

    #[test]
    fn three_batches_give_no_parent_step() {
        let c = corpus(1, 3);
        let cfg = TrainConfig {
            batch_size: 1,
            epochs: 1,
            ..TrainConfig::default()
        };
        let s = make_schedule(&c, &cfg).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|x| !x.is_parent()));
    }

    #[test]
    fn leftover_clips_form_short_batch_and_epochs_reshuffle() {
        let c = corpus(2, 5);
        let cfg = TrainConfig {
            batch_size: 4,
            epochs: 2,
            ..TrainConfig::default()
        };
        let s = make_schedule(&c, &cfg).unwrap();
        let sizes: Vec<usize> = s
            .iter()
            .map(|x| match x {
                Step::Child { clip_ids, .. } => clip_ids.len(),
                _ => 0,
            })
            .collect();
        assert_eq!(sizes, vec![4, 4, 2, 4, 4, 2]);
        assert_ne!(s[0], s[3]);
    }

    #[test]
    fn parent_videos_distinct_and_cfs_capped() {
        let c = corpus(3, 2);
        let cfg = TrainConfig {
            batch_size: 1,
            video_batch: 8,
            epochs: 10,
            ..TrainConfig::default()
        };
        for st in make_schedule(&c, &cfg).unwrap() {
            if let Step::Parent {
                video_ids, cf_indices, ..
            } = st
            {
                assert_eq!(video_ids.len(), 3);
                let mut v = video_ids.clone();
                v.sort();
                v.dedup();
                assert_eq!(v.len(), 3);
                assert!(cf_indices.iter().all(|i| i.len() <= cfg.loss.w_cap));
            }
        }
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(
            make_schedule(&Corpus::empty(4, 4), &TrainConfig::default()),
            Err(TrainError::EmptyCorpus)
        ));
    }
}
