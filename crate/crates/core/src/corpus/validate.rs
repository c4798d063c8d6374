use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use super::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    UnpairedStateChange,
    NegativeDuration,
    DuplicateCounterfactual,
    FrameCount,
    FeatureDimension,
    NonFiniteFeature,
    EmptyNarration,
    EmptySummary,
    EmptyClipList,
    DanglingClip,
    OrphanClip,
    VideoMismatch,
    ClipOrder,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::UnpairedStateChange => "unpaired state change",
            Self::NegativeDuration => "negative duration",
            Self::DuplicateCounterfactual => "duplicate counterfactual",
            Self::FrameCount => "frame count mismatch",
            Self::FeatureDimension => "feature dimension mismatch",
            Self::NonFiniteFeature => "non-finite feature value",
            Self::EmptyNarration => "empty narration",
            Self::EmptySummary => "empty summary",
            Self::EmptyClipList => "empty clip list",
            Self::DanglingClip => "dangling clip reference",
            Self::OrphanClip => "orphan clip",
            Self::VideoMismatch => "clip belongs to another video",
            Self::ClipOrder => "clips out of temporal order",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub id: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.id, self.kind)
    }
}

/// Violations sorted by `(id, kind)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }
}

fn has_duplicates(items: &[String]) -> bool {
    let mut seen = HashSet::with_capacity(items.len());
    items.iter().any(|s| !seen.insert(s.as_str()))
}

/// Checks every record-level and referential invariant. Never fails;
/// violations are returned as data.
pub fn validate_corpus(c: &Corpus) -> ValidationReport {
    let mut out = Vec::new();
    let mut push = |id: &str, kind| {
        out.push(Violation {
            id: id.to_owned(),
            kind,
        })
    };

    let mut referenced: HashSet<&str> = HashSet::new();

    for clip in c.clips.values() {
        let id = clip.clip_id.as_str();
        if clip.before.is_some() != clip.after.is_some() {
            push(id, ViolationKind::UnpairedStateChange);
        }
        if !(clip.t_start < clip.t_end) {
            push(id, ViolationKind::NegativeDuration);
        }
        if has_duplicates(&clip.sc_cf) {
            push(id, ViolationKind::DuplicateCounterfactual);
        }
        if clip.frame_features.len() != c.frames_per_clip {
            push(id, ViolationKind::FrameCount);
        }
        if clip.frame_features.iter().any(|f| f.len() != c.d_in) {
            push(id, ViolationKind::FeatureDimension);
        }
        if clip.frame_features.iter().flatten().any(|v| !v.is_finite()) {
            push(id, ViolationKind::NonFiniteFeature);
        }
        if clip.narration.trim().is_empty() {
            push(id, ViolationKind::EmptyNarration);
        }
        if !c.videos.contains_key(&clip.video_id) {
            push(id, ViolationKind::OrphanClip);
        }
    }

    for video in c.videos.values() {
        let id = video.video_id.as_str();
        if video.summary.trim().is_empty() {
            push(id, ViolationKind::EmptySummary);
        }
        if video.clip_ids.is_empty() {
            push(id, ViolationKind::EmptyClipList);
        }
        if has_duplicates(&video.k_cf) || has_duplicates(&video.m_cf) {
            push(id, ViolationKind::DuplicateCounterfactual);
        }
        let mut last_start = f64::NEG_INFINITY;
        let mut ordered = true;
        for clip_id in &video.clip_ids {
            referenced.insert(clip_id.as_str());
            match c.clips.get(clip_id) {
                None => push(clip_id, ViolationKind::DanglingClip),
                Some(clip) => {
                    if clip.video_id != video.video_id {
                        push(clip_id, ViolationKind::VideoMismatch);
                    }
                    if clip.t_start < last_start {
                        ordered = false;
                    }
                    last_start = clip.t_start;
                }
            }
        }
        if !ordered {
            push(id, ViolationKind::ClipOrder);
        }
    }

    for clip in c.clips.values() {
        if c.videos.contains_key(&clip.video_id) && !referenced.contains(clip.clip_id.as_str()) {
            push(&clip.clip_id, ViolationKind::OrphanClip);
        }
    }

    out.sort();
    out.dedup();
    ValidationReport { violations: out }
}
