//! Likert judge: Relevance and Plausibility, each an integer 1..=5.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{LazyLock, Mutex};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;

use super::{ChatClient, PromptPair, QualityScore, TextGenError};

static R_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?mi)^\s*(?:R|Relevance)\s*:\s*(-?\d+)").unwrap());
static P_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?mi)^\s*(?:P|Plausibility)\s*:\s*(-?\d+)").unwrap());

const JUDGE_CONTEXT: &str = "You rate text generated from a video annotation. \
Score Relevance (R): how well the generated text relates to the source narration or summary. \
Score Plausibility (P): how physically and procedurally plausible the generated text is. \
Use integers from 1 (worst) to 5 (best). \
Answer with exactly two lines and nothing else:\nR: <1-5>\nP: <1-5>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeItem {
    pub id: String,
    /// `sc` for a before/after pair, `cf` for a counterfactual.
    pub kind: String,
    pub source: String,
    pub generated: String,
}

pub fn build_judge_prompt(source: &str, generated: &str) -> PromptPair {
    PromptPair {
        context: JUDGE_CONTEXT.to_owned(),
        request: format!("Source: {}\nGenerated: {}", source.trim(), generated.trim()),
    }
}

fn score(re: &Regex, label: char, text: &str) -> Result<u8, TextGenError> {
    let caps = re
        .captures(text)
        .ok_or_else(|| TextGenError::UnparsableJudgeOutput(text.to_owned()))?;
    let value: i64 = caps[1]
        .parse()
        .map_err(|_| TextGenError::UnparsableJudgeOutput(text.to_owned()))?;
    if !(1..=5).contains(&value) {
        return Err(TextGenError::OutOfRangeScore { label, value });
    }
    Ok(value as u8)
}

pub fn parse_judge_response(text: &str) -> Result<QualityScore, TextGenError> {
    let relevance = score(&R_LINE, 'R', text)?;
    let plausibility = score(&P_LINE, 'P', text)?;
    Ok(QualityScore {
        relevance,
        plausibility,
    })
}

pub fn judge_quality(source: &str, generated: &str, client: &dyn ChatClient) -> Result<QualityScore, TextGenError> {
    let text = client.complete(&build_judge_prompt(source, generated), 0)?;
    parse_judge_response(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRecord {
    pub id: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relevance: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plausibility: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Items the judge rates: one `sc` item per annotated clip and one `cf` item
/// per state-change counterfactual, in clip id order, then one `k_cf` or
/// `m_cf` item per video counterfactual (judged against the summary), in
/// video id order.
pub fn judge_items(c: &Corpus) -> Vec<JudgeItem> {
    let mut items = Vec::new();
    for clip in c.clips.values() {
        if let (Some(b), Some(a)) = (&clip.before, &clip.after) {
            items.push(JudgeItem {
                id: clip.clip_id.clone(),
                kind: "sc".into(),
                source: clip.narration.clone(),
                generated: format!("Before: {b} After: {a}"),
            });
        }
        for cf in &clip.sc_cf {
            items.push(JudgeItem {
                id: clip.clip_id.clone(),
                kind: "cf".into(),
                source: clip.narration.clone(),
                generated: cf.clone(),
            });
        }
    }
    for v in c.videos.values() {
        for (kind, cfs) in [("k_cf", &v.k_cf), ("m_cf", &v.m_cf)] {
            items.extend(cfs.iter().map(|cf| JudgeItem {
                id: v.video_id.clone(),
                kind: kind.into(),
                source: v.summary.clone(),
                generated: cf.clone(),
            }));
        }
    }
    items
}

/// Judges every item of `c` with bounded parallelism; records keep item order.
/// Per-item parse and range errors are recorded, endpoint errors abort.
pub fn judge_corpus(c: &Corpus, client: &dyn ChatClient, max_parallel: usize) -> Result<Vec<JudgeRecord>, TextGenError> {
    let items = judge_items(c);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<QualityScore, TextGenError>>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..max_parallel.clamp(1, super::MAX_PARALLEL_LIMIT).min(items.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                *slots[i].lock().expect("slot lock") = Some(judge_quality(&item.source, &item.generated, client));
            });
        }
    });
    let mut out = Vec::with_capacity(items.len());
    for (item, slot) in items.into_iter().zip(slots) {
        let r = slot.into_inner().expect("slot lock").expect("every item judged");
        let (relevance, plausibility, error) = match r {
            Ok(q) => (Some(q.relevance), Some(q.plausibility), None),
            Err(e) if e.is_fatal() || e.is_endpoint() => return Err(e),
            Err(e) => (None, None, Some(e.to_string())),
        };
        out.push(JudgeRecord {
            id: item.id,
            kind: item.kind,
            relevance,
            plausibility,
            error,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeSummary {
    pub kind: String,
    pub n: usize,
    pub mean_relevance: Option<f64>,
    pub mean_plausibility: Option<f64>,
    pub failures: usize,
}

/// Means per kind, kinds in first-seen order.
pub fn summarize_judgements(records: &[JudgeRecord]) -> Vec<JudgeSummary> {
    let mut kinds: Vec<&str> = Vec::new();
    for r in records {
        if !kinds.contains(&r.kind.as_str()) {
            kinds.push(&r.kind);
        }
    }
    kinds
        .into_iter()
        .map(|k| {
            let rs: Vec<&JudgeRecord> = records.iter().filter(|r| r.kind == k).collect();
            let scored: Vec<(u8, u8)> = rs.iter().filter_map(|r| Some((r.relevance?, r.plausibility?))).collect();
            let mean = |f: fn(&(u8, u8)) -> u8| {
                (!scored.is_empty()).then(|| scored.iter().map(|s| f(s) as f64).sum::<f64>() / scored.len() as f64)
            };
            JudgeSummary {
                kind: k.to_owned(),
                n: scored.len(),
                mean_relevance: mean(|s| s.0),
                mean_plausibility: mean(|s| s.1),
                failures: rs.len() - scored.len(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textgen::{MockChatClient, MockFixture};

    #[test]
    fn parses_both_scores() {
        assert_eq!(
            parse_judge_response("R: 5\nP: 4").unwrap(),
            QualityScore {
                relevance: 5,
                plausibility: 4
            }
        );
    }

    #[test]
    fn out_of_range_rejected() {
        assert_eq!(
            parse_judge_response("R: 7"),
            Err(TextGenError::OutOfRangeScore { label: 'R', value: 7 })
        );
        assert_eq!(
            parse_judge_response("R: 3\nP: 0"),
            Err(TextGenError::OutOfRangeScore { label: 'P', value: 0 })
        );
    }

    #[test]
    fn missing_label_is_unparsable() {
        assert!(matches!(
            parse_judge_response("Relevance five"),
            Err(TextGenError::UnparsableJudgeOutput(_))
        ));
    }

    #[test]
    fn all_fives_average_to_five() {
        let m = MockChatClient::new(vec![MockFixture {
            pattern: "Source".into(),
            response: "R: 5\nP: 5".into(),
        }]);
        let recs: Vec<JudgeRecord> = (0..4)
            .map(|i| {
                let q = judge_quality("C opens a door", &format!("door {i}"), &m).unwrap();
                JudgeRecord {
                    id: format!("c{i}"),
                    kind: "sc".into(),
                    relevance: Some(q.relevance),
                    plausibility: Some(q.plausibility),
                    error: None,
                }
            })
            .collect();
        let s = summarize_judgements(&recs);
        assert_eq!(s[0].mean_relevance, Some(5.0));
        assert_eq!(s[0].n, 4);
    }
}
