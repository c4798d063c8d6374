//! Explicit positive/negative index sets for the frame-level state losses.

use std::collections::HashSet;

use super::LossError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EmbeddingKind {
    Frame,
    ClipVisual,
    NarrationText,
    BeforeText,
    AfterText,
    CfText,
    VideoVisual,
    SummaryText,
    VideoCfText,
}

impl EmbeddingKind {
    /// Text embeddings come from the frozen encoder.
    pub fn is_text(self) -> bool {
        matches!(
            self,
            Self::NarrationText
                | Self::BeforeText
                | Self::AfterText
                | Self::CfText
                | Self::SummaryText
                | Self::VideoCfText
        )
    }
}

/// Flat store of every embedding a batch touches, each tagged by kind and by
/// the batch clip it belongs to.
#[derive(Debug, Clone, Default)]
pub struct Arena {
    pub vectors: Vec<Vec<f64>>,
    pub kinds: Vec<EmbeddingKind>,
    pub owners: Vec<usize>,
    /// Frame position within its clip, for `Frame` entries.
    pub frame_pos: Vec<Option<usize>>,
}

impl Arena {
    pub fn push(&mut self, v: &[f64], kind: EmbeddingKind, owner: usize, frame_pos: Option<usize>) -> usize {
        self.vectors.push(v.to_vec());
        self.kinds.push(kind);
        self.owners.push(owner);
        self.frame_pos.push(frame_pos);
        self.vectors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorFamily {
    /// Earliest frame, aligned with the before state.
    Before,
    /// Latest frame, aligned with the after state.
    After,
}

#[derive(Debug, Clone, Default)]
pub struct BatchAssembly {
    pub anchors: Vec<usize>,
    pub families: Vec<AnchorFamily>,
    pub positives: Vec<Vec<usize>>,
    pub negatives: Vec<Vec<usize>>,
}

impl BatchAssembly {
    /// `P(i) ∩ N(i) = ∅` and `P(i) ≠ ∅` for every anchor.
    pub fn check(&self) -> Result<(), LossError> {
        for (i, (p, n)) in self.positives.iter().zip(&self.negatives).enumerate() {
            if p.is_empty() {
                return Err(LossError::EmptyPositives(i));
            }
            let ps: HashSet<_> = p.iter().collect();
            if n.iter().any(|x| ps.contains(x)) {
                return Err(LossError::ShapeMismatch(format!("anchor {i}: positive also negative")));
            }
        }
        Ok(())
    }
}

/// Frame embeddings and state texts of one clip.
#[derive(Debug, Clone)]
pub struct FrameClip<'a> {
    pub id: &'a str,
    pub frames: &'a [Vec<f64>],
    pub before: Option<&'a [f64]>,
    pub after: Option<&'a [f64]>,
    pub cfs: Vec<&'a [f64]>,
}

struct Slots {
    first: usize,
    last: usize,
    second: usize,
    second_last: usize,
    before: usize,
    after: usize,
    cfs: Vec<usize>,
}

/// Builds the two anchors per clip.
///
/// For `K` frames: the first frame has `P = {f_1, t_b}`, `N = {f_{K-1}, t_a, t_cf…}`;
/// the last frame has `P = {f_{K-2}, t_a}`, `N = {f_0, t_b, t_cf…}`. With batch
/// negatives each `N` also holds every other clip's first and last frames and
/// its before, after and counterfactual texts.
pub fn assemble_frame_sets(clips: &[FrameClip<'_>], batch_negatives: bool) -> Result<(Arena, BatchAssembly), LossError> {
    let mut arena = Arena::default();
    let mut slots = Vec::with_capacity(clips.len());
    for (c, clip) in clips.iter().enumerate() {
        let k = clip.frames.len();
        if k < 3 {
            return Err(LossError::TooFewFrames(k));
        }
        let (Some(before), Some(after)) = (clip.before, clip.after) else {
            return Err(LossError::MissingAnnotation(clip.id.to_owned()));
        };
        let frame_idx: Vec<usize> = clip
            .frames
            .iter()
            .enumerate()
            .map(|(pos, f)| arena.push(f, EmbeddingKind::Frame, c, Some(pos)))
            .collect();
        let before = arena.push(before, EmbeddingKind::BeforeText, c, None);
        let after = arena.push(after, EmbeddingKind::AfterText, c, None);
        let cfs = clip
            .cfs
            .iter()
            .map(|cf| arena.push(cf, EmbeddingKind::CfText, c, None))
            .collect();
        slots.push(Slots {
            first: frame_idx[0],
            second: frame_idx[1],
            second_last: frame_idx[k - 2],
            last: frame_idx[k - 1],
            before,
            after,
            cfs,
        });
    }

    let mut asm = BatchAssembly::default();
    for (c, s) in slots.iter().enumerate() {
        let mut others = Vec::new();
        if batch_negatives {
            for (o, so) in slots.iter().enumerate() {
                if o == c {
                    continue;
                }
                others.extend([so.first, so.last, so.before, so.after]);
                others.extend(&so.cfs);
            }
        }

        let mut neg = vec![s.last, s.after];
        neg.extend(&s.cfs);
        neg.extend(&others);
        asm.anchors.push(s.first);
        asm.families.push(AnchorFamily::Before);
        asm.positives.push(vec![s.second, s.before]);
        asm.negatives.push(neg);

        let mut neg = vec![s.first, s.before];
        neg.extend(&s.cfs);
        neg.extend(&others);
        asm.anchors.push(s.last);
        asm.families.push(AnchorFamily::After);
        asm.positives.push(vec![s.second_last, s.after]);
        asm.negatives.push(neg);
    }
    asm.check()?;
    Ok((arena, asm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(k: usize) -> Vec<Vec<f64>> {
        (0..k).map(|i| vec![i as f64, 1.0]).collect()
    }

    #[test]
    fn single_clip_without_batch_negatives_has_five_negatives() {
        let f = frames(4);
        let (b, a, cf) = ([1.0, 0.0], [0.0, 1.0], [0.6, 0.8]);
        let clip = FrameClip {
            id: "c",
            frames: &f,
            before: Some(&b),
            after: Some(&a),
            cfs: vec![&cf, &cf, &cf],
        };
        let (arena, asm) = assemble_frame_sets(&[clip], false).unwrap();
        assert_eq!(asm.anchors.len(), 2);
        assert_eq!(asm.negatives[0].len(), 5);
        assert_eq!(asm.negatives[1].len(), 5);
        // P(0) = {f_1, t_b}
        assert_eq!(arena.frame_pos[asm.positives[0][0]], Some(1));
        assert_eq!(arena.kinds[asm.positives[0][1]], EmbeddingKind::BeforeText);
        // P(3) = {f_2, t_a}
        assert_eq!(arena.frame_pos[asm.positives[1][0]], Some(2));
        assert_eq!(arena.kinds[asm.positives[1][1]], EmbeddingKind::AfterText);
    }

    #[test]
    fn batch_negatives_match_brute_force_enumeration() {
        let f = frames(4);
        let (b, a, cf) = ([1.0, 0.0], [0.0, 1.0], [0.6, 0.8]);
        let mk = |id| FrameClip {
            id,
            frames: &f,
            before: Some(&b),
            after: Some(&a),
            cfs: vec![&cf, &cf, &cf],
        };
        let (arena, asm) = assemble_frame_sets(&[mk("a"), mk("b")], true).unwrap();

        // oracle: everything owned by the other clip except its inner frames
        let other_count = (0..arena.len())
            .filter(|&i| arena.owners[i] == 1)
            .filter(|&i| !matches!(arena.frame_pos[i], Some(1) | Some(2)))
            .count();
        assert_eq!(other_count, 7);
        assert_eq!(asm.negatives[0].len(), 5 + other_count);
        for n in &asm.negatives {
            assert_eq!(n.len(), 12);
        }
    }

    #[test]
    fn missing_state_is_reported() {
        let f = frames(4);
        let clip = FrameClip {
            id: "bare",
            frames: &f,
            before: None,
            after: None,
            cfs: vec![],
        };
        assert_eq!(
            assemble_frame_sets(&[clip], false).err(),
            Some(LossError::MissingAnnotation("bare".into()))
        );
    }

    #[test]
    fn two_frames_are_too_few() {
        let f = frames(2);
        let (b, a) = ([1.0, 0.0], [0.0, 1.0]);
        let clip = FrameClip {
            id: "c",
            frames: &f,
            before: Some(&b),
            after: Some(&a),
            cfs: vec![],
        };
        assert_eq!(assemble_frame_sets(&[clip], false).err(), Some(LossError::TooFewFrames(2)));
    }
}
