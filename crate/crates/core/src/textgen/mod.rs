//! LLM pipeline that writes state and counterfactual texts for a corpus, plus
//! the Likert quality judge.

mod client;
mod generate;
mod judge;
mod parse;
mod prompts;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{build_client, ChatClient, HttpChatClient, MockChatClient, MockFixture};
pub use generate::{generate_annotations, write_failures, FailureRecord, GenOptions, GenOutput};
pub use judge::{
    build_judge_prompt, judge_corpus, judge_items, judge_quality, parse_judge_response, summarize_judgements, JudgeItem,
    JudgeRecord, JudgeSummary,
};
pub use parse::{parse_clip_response, parse_video_response, render_clip_states, render_video_cfs};
pub use prompts::{build_clip_prompt, build_video_prompt, EXEMPLAR_NARRATION};

pub const ENV_API_BASE: &str = "LLM_API_BASE";
pub const ENV_API_KEY: &str = "LLM_API_KEY";
pub const ENV_MODEL: &str = "LLM_MODEL";
pub const MAX_PARALLEL_LIMIT: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TextGenError {
    #[error("narration is empty")]
    EmptyNarration,
    #[error("empty narrations or summary")]
    EmptyInput,
    #[error("response lacks the {0} field")]
    MissingField(String),
    #[error("found {found} counterfactuals, expected {expected}")]
    CountMismatch { found: usize, expected: usize },
    #[error("duplicate counterfactual {0:?}")]
    DuplicateCf(String),
    #[error("counterfactual labels do not match the requested kind")]
    WrongKindLabels,
    #[error("judge output not parsable: {0:?}")]
    UnparsableJudgeOutput(String),
    #[error("judge score {label}: {value} outside 1..=5")]
    OutOfRangeScore { label: char, value: i64 },
    #[error("endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("endpoint rejected credentials (HTTP {0})")]
    AuthFailure(u16),
    #[error("endpoint returned HTTP {0}")]
    EndpointStatus(u16),
    #[error("malformed endpoint response: {0}")]
    MalformedResponse(String),
    #[error("no mock fixture matches the request")]
    NoFixture,
    #[error("invalid client config: {0}")]
    InvalidConfig(String),
    #[error("io: {0}")]
    Io(String),
}

impl TextGenError {
    /// Errors that abort a whole run rather than one item.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            Self::EndpointUnreachable(_) | Self::AuthFailure(_) | Self::InvalidConfig(_) | Self::Io(_)
        )
    }

    pub fn is_endpoint(&self) -> bool {
        matches!(
            self,
            Self::EndpointUnreachable(_) | Self::AuthFailure(_) | Self::EndpointStatus(_) | Self::MalformedResponse(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPair {
    pub context: String,
    pub request: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfKind {
    MissingStep,
    Misordered,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedClipStates {
    pub before: String,
    pub after: String,
    pub sc_cf: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedVideoCfs {
    pub kind: CfKind,
    pub cfs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityScore {
    pub relevance: u8,
    pub plausibility: u8,
}

/// Secret string whose `Debug`/`Display` never reveal the value and which
/// is never serialized.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(<redacted>)")
    }
}

impl fmt::Display for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<redacted>")
    }
}

impl<'de> Deserialize<'de> for ApiKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d).map(Self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmClientConfig {
    pub api_base: Option<String>,
    #[serde(skip_serializing)]
    pub api_key: Option<ApiKey>,
    pub model: String,
    pub max_parallel: usize,
    pub timeout_secs: f64,
    pub mock_fixtures: Option<PathBuf>,
    /// Passed through to the endpoint when set.
    pub temperature: Option<f64>,
    pub retries: usize,
}

impl Default for LlmClientConfig {
    fn default() -> Self {
        Self {
            api_base: None,
            api_key: None,
            model: "llama-3.1-8b-instruct".into(),
            max_parallel: 4,
            timeout_secs: 60.0,
            mock_fixtures: None,
            temperature: None,
            retries: 2,
        }
    }
}

impl LlmClientConfig {
    /// Defaults overlaid with `LLM_API_BASE`, `LLM_API_KEY`, `LLM_MODEL`
    /// from `lookup` (typically `std::env::var`).
    pub fn from_env_with(lookup: impl Fn(&str) -> Option<String>) -> Self {
        let mut cfg = Self::default();
        cfg.api_base = lookup(ENV_API_BASE).filter(|s| !s.is_empty());
        cfg.api_key = lookup(ENV_API_KEY).filter(|s| !s.is_empty()).map(ApiKey);
        if let Some(m) = lookup(ENV_MODEL).filter(|s| !s.is_empty()) {
            cfg.model = m;
        }
        cfg
    }

    pub fn from_env() -> Self {
        Self::from_env_with(|k| std::env::var(k).ok())
    }

    /// Environment first, then every key present in the JSON file wins.
    pub fn resolve(file: Option<&Path>, lookup: impl Fn(&str) -> Option<String>) -> Result<Self, TextGenError> {
        let env = Self::from_env_with(lookup);
        let Some(path) = file else {
            return Ok(env);
        };
        let text =
            std::fs::read_to_string(path).map_err(|e| TextGenError::Io(format!("{}: {e}", path.display())))?;
        let overrides: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| TextGenError::InvalidConfig(e.to_string()))?;
        let mut merged = serde_json::to_value(&env).expect("config serializes");
        if let (Some(dst), Some(src)) = (merged.as_object_mut(), overrides.as_object()) {
            for (k, v) in src {
                dst.insert(k.clone(), v.clone());
            }
        }
        let mut cfg: Self =
            serde_json::from_value(merged).map_err(|e| TextGenError::InvalidConfig(e.to_string()))?;
        if overrides.get("api_key").is_none() {
            cfg.api_key = env.api_key;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), TextGenError> {
        if self.max_parallel == 0 || self.max_parallel > MAX_PARALLEL_LIMIT {
            return Err(TextGenError::InvalidConfig(format!(
                "max_parallel {} outside 1..={MAX_PARALLEL_LIMIT}",
                self.max_parallel
            )));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(TextGenError::InvalidConfig("timeout_secs must be positive".into()));
        }
        Ok(())
    }
}
