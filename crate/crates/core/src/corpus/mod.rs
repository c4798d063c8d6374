//! Annotated corpus: clips with frame features and state texts, videos with
//! summaries and summary-level counterfactuals.

mod io;
mod synth;
mod validate;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_corpus, load_corpus_dir, save_corpus, save_corpus_dir, CLIPS_FILE, VIDEOS_FILE};
pub use synth::{
    read_oracle, synthesize_corpus, write_oracle, OracleVideo, SynthOutput, SynthSpec, ORACLE_FILE,
};
pub use validate::{validate_corpus, ValidationReport, Violation, ViolationKind};

/// Default number of frames sub-sampled per clip.
pub const DEFAULT_FRAMES_PER_CLIP: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub clip_id: String,
    pub video_id: String,
    pub t_start: f64,
    pub t_end: f64,
    pub narration: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub before: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sc_cf: Vec<String>,
    pub frame_features: Vec<Vec<f64>>,
}

impl ClipRecord {
    /// True when the clip carries a before/after pair and can anchor the
    /// frame-level state loss.
    pub fn has_state_change(&self) -> bool {
        self.before.is_some() && self.after.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub summary: String,
    pub clip_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub k_cf: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m_cf: Vec<String>,
}

impl VideoRecord {
    /// Missing-step counterfactuals followed by misordered ones.
    pub fn counterfactuals(&self) -> impl Iterator<Item = &String> {
        self.k_cf.iter().chain(self.m_cf.iter())
    }
}

/// An immutable, referentially consistent set of clips and videos.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub clips: BTreeMap<String, ClipRecord>,
    pub videos: BTreeMap<String, VideoRecord>,
    pub d_in: usize,
    pub frames_per_clip: usize,
}

impl Corpus {
    pub fn empty(d_in: usize, frames_per_clip: usize) -> Self {
        Self {
            clips: BTreeMap::new(),
            videos: BTreeMap::new(),
            d_in,
            frames_per_clip,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty() && self.videos.is_empty()
    }

    pub fn clip(&self, id: &str) -> Option<&ClipRecord> {
        self.clips.get(id)
    }

    pub fn video(&self, id: &str) -> Option<&VideoRecord> {
        self.videos.get(id)
    }

    /// Clips of a video in temporal order.
    pub fn video_clips<'a>(&'a self, video: &'a VideoRecord) -> impl Iterator<Item = &'a ClipRecord> {
        video.clip_ids.iter().filter_map(|id| self.clips.get(id))
    }

    /// Every distinct text the corpus carries, in a stable order.
    pub fn texts(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for clip in self.clips.values() {
            out.push(clip.narration.as_str());
            out.extend(clip.before.as_deref());
            out.extend(clip.after.as_deref());
            out.extend(clip.sc_cf.iter().map(String::as_str));
        }
        for video in self.videos.values() {
            out.push(video.summary.as_str());
            out.extend(video.counterfactuals().map(String::as_str));
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file} line {line}: {cause}")]
    MalformedLine {
        file: String,
        line: usize,
        cause: String,
    },
    #[error("dangling reference to {0:?}")]
    DanglingReference(String),
    #[error("clip {0:?} has the wrong number of frames or feature dimension")]
    DimensionMismatch(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("invalid corpus: {0}")]
    Invalid(Violation),
    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),
}
