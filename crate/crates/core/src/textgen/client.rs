use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{LlmClientConfig, PromptPair, TextGenError};

/// A chat-completion endpoint taking `[context, request]`.
///
/// `attempt` counts from 0 and lets deterministic clients vary their answer
/// across retries.
pub trait ChatClient: Send + Sync {
    fn complete(&self, prompt: &PromptPair, attempt: usize) -> Result<String, TextGenError>;
}

/// OpenAI-compatible `POST {api_base}/chat/completions`.
pub struct HttpChatClient {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: Option<String>,
    temperature: Option<f64>,
}

impl HttpChatClient {
    pub fn new(cfg: &LlmClientConfig) -> Result<Self, TextGenError> {
        let base = cfg
            .api_base
            .as_deref()
            .filter(|b| !b.trim().is_empty())
            .ok_or_else(|| TextGenError::EndpointUnreachable("no api base configured (LLM_API_BASE)".into()))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            url: format!("{}/chat/completions", base.trim_end_matches('/')),
            model: cfg.model.clone(),
            api_key: cfg.api_key.as_ref().map(|k| k.expose().to_owned()),
            temperature: cfg.temperature,
        })
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, prompt: &PromptPair, _attempt: usize) -> Result<String, TextGenError> {
        let mut body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": prompt.context},
                {"role": "user", "content": prompt.request},
            ],
        });
        if let Some(t) = self.temperature {
            body["temperature"] = json!(t);
        }
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| TextGenError::EndpointUnreachable(format!("{}: {e}", self.url)))?;
        let status = resp.status().as_u16();
        if status == 401 || status == 403 {
            return Err(TextGenError::AuthFailure(status));
        }
        if !(200..300).contains(&status) {
            return Err(TextGenError::EndpointStatus(status));
        }
        let v: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| TextGenError::MalformedResponse(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| TextGenError::MalformedResponse("missing choices[0].message.content".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockFixture {
    /// Substring searched for in the system context followed by the request.
    #[serde(rename = "match")]
    pub pattern: String,
    pub response: String,
}

/// Replays fixtures. Attempt `n` receives the `n`-th fixture matching the
/// prompt, or the last one once they run out.
#[derive(Debug, Clone, Default)]
pub struct MockChatClient {
    fixtures: Vec<MockFixture>,
}

impl MockChatClient {
    pub fn new(fixtures: Vec<MockFixture>) -> Self {
        Self { fixtures }
    }

    pub fn from_jsonl(path: &Path) -> Result<Self, TextGenError> {
        let text = fs::read_to_string(path).map_err(|e| TextGenError::Io(format!("{}: {e}", path.display())))?;
        let mut fixtures = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: MockFixture = serde_json::from_str(line)
                .map_err(|e| TextGenError::Io(format!("{}:{}: {e}", path.display(), i + 1)))?;
            fixtures.push(f);
        }
        Ok(Self { fixtures })
    }

    pub fn fixtures(&self) -> &[MockFixture] {
        &self.fixtures
    }
}

impl ChatClient for MockChatClient {
    fn complete(&self, prompt: &PromptPair, attempt: usize) -> Result<String, TextGenError> {
        let text = format!("{}\n{}", prompt.context, prompt.request);
        let hits: Vec<&MockFixture> = self.fixtures.iter().filter(|f| text.contains(&f.pattern)).collect();
        hits.get(attempt.min(hits.len().saturating_sub(1)))
            .map(|f| f.response.clone())
            .ok_or(TextGenError::NoFixture)
    }
}

/// The client selected by `cfg`: mock when fixtures are configured, HTTP
/// otherwise.
pub fn build_client(cfg: &LlmClientConfig) -> Result<Box<dyn ChatClient>, TextGenError> {
    cfg.validate()?;
    match &cfg.mock_fixtures {
        Some(path) => Ok(Box::new(MockChatClient::from_jsonl(path)?)),
        None => Ok(Box::new(HttpChatClient::new(cfg)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prompt(req: &str) -> PromptPair {
        PromptPair {
            context: "ctx".into(),
            request: req.into(),
        }
    }

    #[test]
    fn mock_cycles_through_matches_then_sticks() {
        let m = MockChatClient::new(vec![
            MockFixture {
                pattern: "door".into(),
                response: "first".into(),
            },
            MockFixture {
                pattern: "cup".into(),
                response: "other".into(),
            },
            MockFixture {
                pattern: "door".into(),
                response: "second".into(),
            },
        ]);
        let p = prompt("C opens the door");
        assert_eq!(m.complete(&p, 0).unwrap(), "first");
        assert_eq!(m.complete(&p, 1).unwrap(), "second");
        assert_eq!(m.complete(&p, 5).unwrap(), "second");
        assert_eq!(m.complete(&prompt("nothing"), 0), Err(TextGenError::NoFixture));
    }

    #[test]
    fn http_client_without_base_is_unreachable() {
        let cfg = LlmClientConfig::default();
        assert!(matches!(HttpChatClient::new(&cfg), Err(TextGenError::EndpointUnreachable(_))));
    }
}
