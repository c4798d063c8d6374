//! Parsers for the bracketed LLM output format and the canonical renderers
//! they invert.
//!
//! A labelled field runs until the next label or a blank line; wrapped
//! continuation lines are joined with single spaces.

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;

use super::{CfKind, ParsedClipStates, ParsedVideoCfs, TextGenError};

static BEFORE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^\[?before\]?\s*:\s*(.*)$").unwrap());
static AFTER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^\[?after\]?\s*:\s*(.*)$").unwrap());
static CLIP_CF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:\[(?:sc-)?cf\s*\d+\]|(?:sc-)?cf\s*\d+)\s*:\s*(.*)$").unwrap());
static VIDEO_CF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\[?([km])-cf\s*\d+\]?\s*:\s*(.*)$").unwrap());
static TRAILING_TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(\s+#[A-Za-z_]+)+$").unwrap());

#[derive(Clone, Copy, PartialEq)]
enum Slot {
    Before,
    After,
    Cf(usize),
}

/// Drops a trailing quote left unbalanced by the model.
fn tidy(s: &str) -> String {
    let mut s = s.trim().to_owned();
    if s.ends_with('"') && s.matches('"').count() % 2 == 1 {
        s.pop();
        s = s.trim_end().to_owned();
    }
    s
}

fn push_text(buf: &mut String, line: &str) {
    if !line.is_empty() {
        if !buf.is_empty() {
            buf.push(' ');
        }
        buf.push_str(line);
    }
}

pub fn parse_clip_response(text: &str, expected_cfs: usize) -> Result<ParsedClipStates, TextGenError> {
    let mut before: Option<String> = None;
    let mut after: Option<String> = None;
    let mut cfs: Vec<String> = Vec::new();
    // field receiving continuation lines; `None` after a blank line or
    // after a repeated label we ignore
    let mut open: Option<Slot> = None;

    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            open = None;
            continue;
        }
        if let Some(c) = BEFORE.captures(line) {
            open = match before {
                None => {
                    before = Some(c[1].trim().to_owned());
                    Some(Slot::Before)
                }
                Some(_) => None,
            };
        } else if let Some(c) = AFTER.captures(line) {
            open = match after {
                None => {
                    after = Some(c[1].trim().to_owned());
                    Some(Slot::After)
                }
                Some(_) => None,
            };
        } else if let Some(c) = CLIP_CF.captures(line) {
            cfs.push(c[1].trim().to_owned());
            open = Some(Slot::Cf(cfs.len() - 1));
        } else {
            match open {
                Some(Slot::Before) => push_text(before.as_mut().expect("open"), line),
                Some(Slot::After) => push_text(after.as_mut().expect("open"), line),
                Some(Slot::Cf(i)) => push_text(&mut cfs[i], line),
                None => {}
            }
        }
    }

    let before = before.map(|s| tidy(&s)).filter(|s| !s.is_empty());
    let after = after.map(|s| tidy(&s)).filter(|s| !s.is_empty());
    let before = before.ok_or_else(|| TextGenError::MissingField("before".into()))?;
    let after = after.ok_or_else(|| TextGenError::MissingField("after".into()))?;
    let sc_cf: Vec<String> = cfs.iter().map(|s| tidy(s)).filter(|s| !s.is_empty()).collect();
    if sc_cf.len() != expected_cfs {
        return Err(TextGenError::CountMismatch {
            found: sc_cf.len(),
            expected: expected_cfs,
        });
    }
    check_distinct(&sc_cf)?;
    Ok(ParsedClipStates { before, after, sc_cf })
}

pub fn parse_video_response(text: &str, kind: CfKind, expected: usize) -> Result<ParsedVideoCfs, TextGenError> {
    let want = match kind {
        CfKind::MissingStep => 'k',
        CfKind::Misordered => 'm',
    };
    let mut cfs: Vec<String> = Vec::new();
    let mut open = false;
    let mut wrong = 0usize;
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            open = false;
            continue;
        }
        if let Some(c) = VIDEO_CF.captures(line) {
            if c[1].eq_ignore_ascii_case(&want.to_string()) {
                cfs.push(c[2].trim().to_owned());
                open = true;
            } else {
                wrong += 1;
                open = false;
            }
        } else if open {
            push_text(cfs.last_mut().expect("open"), line);
        }
    }
    if wrong > 0 {
        return Err(TextGenError::WrongKindLabels);
    }
    let cfs: Vec<String> = cfs
        .iter()
        .map(|s| tidy(&TRAILING_TAG.replace(s.trim(), "")))
        .filter(|s| !s.is_empty())
        .collect();
    if cfs.len() != expected {
        return Err(TextGenError::CountMismatch {
            found: cfs.len(),
            expected,
        });
    }
    check_distinct(&cfs)?;
    Ok(ParsedVideoCfs { kind, cfs })
}

fn check_distinct(items: &[String]) -> Result<(), TextGenError> {
    let mut seen = HashSet::new();
    for s in items {
        if !seen.insert(s) {
            return Err(TextGenError::DuplicateCf(s.clone()));
        }
    }
    Ok(())
}

/// Canonical rendering read back exactly by [`parse_clip_response`].
pub fn render_clip_states(s: &ParsedClipStates) -> String {
    let mut out = format!("[Before]: {}\n\n[After]: {}\n", s.before, s.after);
    for (i, cf) in s.sc_cf.iter().enumerate() {
        out.push_str(&format!("\n[SC-CF {}]: {}\n", i + 1, cf));
    }
    out
}

/// Canonical rendering read back exactly by [`parse_video_response`].
pub fn render_video_cfs(v: &ParsedVideoCfs) -> String {
    let tag = match v.kind {
        CfKind::MissingStep => "K-CF",
        CfKind::Misordered => "M-CF",
    };
    v.cfs
        .iter()
        .enumerate()
        .map(|(i, cf)| format!("[{tag} {}]: {cf}\n", i + 1))
        .collect()
}
