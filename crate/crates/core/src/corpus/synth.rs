//! Synthetic procedures with a known latent structure.
//!
//! Each video walks through `M + 1` latent states drawn uniformly on the unit
//! sphere. Clip `j` moves from state `j-1` to state `j`: its frames linearly
//! interpolate the two states and receive isotropic Gaussian noise whose
//! expected norm is `noise_sigma`. All texts are template strings over
//! per-video pseudo-words. A state text pairs the clip's object word with the
//! word for the latent stage, so the after text of clip `j-1` and the before
//! text of clip `j` share the stage word but name different objects.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ClipRecord, Corpus, CorpusError, VideoRecord, DEFAULT_FRAMES_PER_CLIP};

pub const ORACLE_FILE: &str = "oracle.jsonl";

const FLAWS: [&str; 3] = ["unfinished", "spoiled", "reversed"];

fn default_frames() -> usize {
    DEFAULT_FRAMES_PER_CLIP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_videos: usize,
    pub clips_per_video: usize,
    pub d_in: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    #[serde(default = "default_frames")]
    pub frames_per_clip: usize,
}

impl SynthSpec {
    pub fn new(n_videos: usize, clips_per_video: usize, d_in: usize, noise_sigma: f64, seed: u64) -> Self {
        Self {
            n_videos,
            clips_per_video,
            d_in,
            noise_sigma,
            seed,
            frames_per_clip: DEFAULT_FRAMES_PER_CLIP,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: &str| Err(CorpusError::InvalidSpec(m.to_owned()));
        if self.n_videos == 0 || self.clips_per_video == 0 {
            return bad("counts must be at least 1");
        }
        if self.d_in < 4 {
            return bad("d_in must be at least 4");
        }
        if self.frames_per_clip < 2 {
            return bad("frames_per_clip must be at least 2");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be a nonnegative real");
        }
        Ok(())
    }
}

/// Ground truth for one synthetic video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleVideo {
    pub video_id: String,
    pub archetype: String,
    /// `clips_per_video + 1` unit vectors.
    pub latent_states: Vec<Vec<f64>>,
    pub clips: Vec<OracleClip>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleClip {
    pub clip_id: String,
    /// 1-based step index; the clip moves from state `step-1` to `step`.
    pub step: usize,
    /// Index of the nearer latent state for each frame.
    pub frame_labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub corpus: Corpus,
    pub oracle: Vec<OracleVideo>,
}

struct Words {
    seen: HashSet<String>,
}

impl Words {
    const CONSONANTS: &'static [u8] = b"bdfgklmnprstvz";
    const VOWELS: &'static [u8] = b"aeiou";

    fn next(&mut self, rng: &mut ChaCha8Rng) -> String {
        loop {
            let mut w = String::with_capacity(6);
            for _ in 0..3 {
                w.push(Self::CONSONANTS[rng.random_range(0..Self::CONSONANTS.len())] as char);
                w.push(Self::VOWELS[rng.random_range(0..Self::VOWELS.len())] as char);
            }
            if self.seen.insert(w.clone()) {
                return w;
            }
        }
    }
}

fn unit_gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = crate::linalg::norm(&v);
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Generates a corpus and its oracle. A pure function of `spec`.
pub fn synthesize_corpus(spec: &SynthSpec) -> Result<SynthOutput, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut words = Words {
        seen: FLAWS.iter().map(|s| s.to_string()).collect(),
    };
    let k = spec.frames_per_clip;
    let m = spec.clips_per_video;
    let noise = Normal::new(0.0, spec.noise_sigma / (spec.d_in as f64).sqrt())
        .map_err(|e| CorpusError::InvalidSpec(e.to_string()))?;

    let mut clips = BTreeMap::new();
    let mut videos = BTreeMap::new();
    let mut oracle = Vec::with_capacity(spec.n_videos);

    for v in 0..spec.n_videos {
        let video_id = format!("v{v:03}");
        let arch = words.next(&mut rng);
        let stages: Vec<String> = (0..=m).map(|_| words.next(&mut rng)).collect();
        let acts: Vec<String> = (0..m).map(|_| words.next(&mut rng)).collect();
        let objs: Vec<String> = (0..m).map(|_| words.next(&mut rng)).collect();
        let latents: Vec<Vec<f64>> = (0..=m).map(|_| unit_gaussian(&mut rng, spec.d_in)).collect();

        let state_text = |j: usize, s: usize| format!("{} {}", objs[j - 1], stages[s]);
        let mut clip_ids = Vec::with_capacity(m);
        let mut oracle_clips = Vec::with_capacity(m);

        for j in 1..=m {
            let clip_id = format!("{video_id}_c{j:03}");
            let (from, to) = (&latents[j - 1], &latents[j]);
            let mut frames = Vec::with_capacity(k);
            let mut labels = Vec::with_capacity(k);
            for f in 0..k {
                let alpha = f as f64 / (k - 1) as f64;
                let frame: Vec<f64> = from
                    .iter()
                    .zip(to)
                    .map(|(a, b)| (1.0 - alpha) * a + alpha * b + noise.sample(&mut rng))
                    .collect();
                frames.push(frame);
                labels.push(if alpha < 0.5 { j - 1 } else { j });
            }
            let clip = ClipRecord {
                clip_id: clip_id.clone(),
                video_id: video_id.clone(),
                t_start: 2.0 * (j - 1) as f64,
                t_end: 2.0 * j as f64,
                narration: format!("C {} {}", acts[j - 1], objs[j - 1]),
                before: Some(state_text(j, j - 1)),
                after: Some(state_text(j, j)),
                sc_cf: FLAWS
                    .iter()
                    .map(|flaw| format!("{} {flaw}", state_text(j, j)))
                    .collect(),
                frame_features: frames,
            };
            clips.insert(clip_id.clone(), clip);
            oracle_clips.push(OracleClip {
                clip_id: clip_id.clone(),
                step: j,
                frame_labels: labels,
            });
            clip_ids.push(clip_id);
        }

        let last = &stages[m];
        let k_cf = (0..m)
            .map(|t| format!("{arch} to {last} without {}", acts[t]))
            .collect();
        let m_cf = (0..m.saturating_sub(1))
            .map(|t| format!("{arch} to {last} {} before {}", acts[t + 1], acts[t]))
            .collect();
        videos.insert(
            video_id.clone(),
            VideoRecord {
                video_id: video_id.clone(),
                summary: format!("{arch} from {} to {last}", stages[0]),
                clip_ids,
                k_cf,
                m_cf,
            },
        );
        oracle.push(OracleVideo {
            video_id,
            archetype: arch,
            latent_states: latents,
            clips: oracle_clips,
        });
    }

    Ok(SynthOutput {
        corpus: Corpus {
            clips,
            videos,
            d_in: spec.d_in,
            frames_per_clip: k,
        },
        oracle,
    })
}

pub fn write_oracle(path: &Path, oracle: &[OracleVideo]) -> Result<(), CorpusError> {
    let wrap = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(wrap)?);
    for video in oracle {
        serde_json::to_writer(&mut w, video).map_err(|e| wrap(e.into()))?;
        w.write_all(b"\n").map_err(wrap)?;
    }
    w.flush().map_err(wrap)
}

pub fn read_oracle(path: &Path) -> Result<Vec<OracleVideo>, CorpusError> {
    let wrap = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(wrap)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(wrap)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedLine {
                file: ORACLE_FILE.to_owned(),
                line: i + 1,
                cause: e.to_string(),
            })?,
        );
    }
    Ok(out)
}
