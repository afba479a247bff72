//! HTTP client for text-generation endpoints that speak the common
//! chat-completion / completion JSON shape.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::experiment::prompt::INSTRUCTION;
use crate::experiment::{parse_response, render_prompt, GambleSet, Outcome, PromptStyle, TrialRecord};

pub const DEFAULT_AUTH_ENV: &str = "TRANSITIVITY_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemoteApi {
    /// `messages` array; the question goes in the user turn.
    #[default]
    Chat,
    /// Raw `prompt` string built from the base scaffold.
    Completion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteLlmConfig {
    /// Full endpoint URL, e.g. `http://localhost:8000/v1/chat/completions`.
    pub url: String,
    pub model: String,
    #[serde(default)]
    pub api: RemoteApi,
    #[serde(default = "one")]
    pub max_tokens: u32,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub top_p: Option<f64>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    /// Environment variable holding a bearer token, if any.
    #[serde(default = "default_auth_env")]
    pub auth_env: String,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn one() -> u32 {
    1
}
fn default_timeout() -> f64 {
    30.0
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    250
}
fn default_auth_env() -> String {
    DEFAULT_AUTH_ENV.to_string()
}
fn default_in_flight() -> usize {
    4
}

impl RemoteLlmConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            model: model.into(),
            api: RemoteApi::Chat,
            max_tokens: 1,
            temperature: None,
            top_p: None,
            timeout_secs: default_timeout(),
            retries: default_retries(),
            backoff_ms: default_backoff(),
            auth_env: default_auth_env(),
            max_in_flight: default_in_flight(),
        }
    }

    pub fn validate(&self, id: &str) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidResponder { id: id.to_string(), reason });
        if self.max_tokens != 1 {
            return bad(format!("max_tokens must be 1, got {}", self.max_tokens));
        }
        if !(self.url.starts_with("http://") || self.url.starts_with("https://")) {
            return bad(format!("url {:?} is not http(s)", self.url));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return bad("timeout_secs must be positive".into());
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be at least 1".into());
        }
        Ok(())
    }

    /// Request body for one trial.
    pub fn request_body(&self, trial: &TrialRecord, set: &GambleSet) -> Result<Value> {
        let (_, g1) = set.gamble(&trial.first)?;
        let (_, g2) = set.gamble(&trial.second)?;
        let mut body = match self.api {
            RemoteApi::Chat => json!({
                "model": self.model,
                "messages": [
                    {"role": "system", "content": INSTRUCTION},
                    {"role": "user", "content": trial.prompt_text},
                ],
            }),
            RemoteApi::Completion => json!({
                "model": self.model,
                "prompt": render_prompt(g1, g2, trial.format, PromptStyle::Base),
            }),
        };
        let obj = body.as_object_mut().expect("object literal");
        obj.insert("max_tokens".into(), json!(self.max_tokens));
        obj.insert("seed".into(), json!(trial.seed));
        if let Some(t) = self.temperature {
            obj.insert("temperature".into(), json!(t));
        }
        if let Some(p) = self.top_p {
            obj.insert("top_p".into(), json!(p));
        }
        Ok(body)
    }
}

/// Generated text from a chat or completion response body.
pub fn extract_text(api: RemoteApi, body: &Value) -> Result<String> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| Error::Transport("response has no choices".into()))?;
    let text = match api {
        RemoteApi::Chat => choice.get("message").and_then(|m| m.get("content")),
        RemoteApi::Completion => choice.get("text"),
    };
    text.and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| Error::Transport("response choice carries no text".into()))
}

#[derive(Debug)]
pub struct RemoteClient {
    cfg: RemoteLlmConfig,
    http: reqwest::blocking::Client,
    token: Option<String>,
}

impl RemoteClient {
    pub fn new(id: &str, cfg: RemoteLlmConfig) -> Result<Self> {
        cfg.validate(id)?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let token = std::env::var(&cfg.auth_env).ok().filter(|t| !t.is_empty());
        Ok(Self { cfg, http, token })
    }

    pub fn config(&self) -> &RemoteLlmConfig {
        &self.cfg
    }

    fn attempt(&self, body: &Value) -> Result<String> {
        let mut req = self.http.post(&self.cfg.url).json(body);
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().map_err(|e| Error::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(Error::Transport(format!("HTTP {status}")));
        }
        let v: Value = resp.json().map_err(|e| Error::Transport(format!("invalid JSON: {e}")))?;
        extract_text(self.cfg.api, &v)
    }

    /// Send one trial, retrying with exponential backoff. The trial's own
    /// seed is reused on every attempt.
    pub fn respond(&self, trial: &TrialRecord, set: &GambleSet) -> Outcome {
        let body = match self.cfg.request_body(trial, set) {
            Ok(b) => b,
            Err(e) => return Outcome::TransportFailure(e.to_string()),
        };
        let mut last = String::new();
        for attempt in 0..=self.cfg.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.cfg.backoff_ms << (attempt - 1).min(16)));
            }
            match self.attempt(&body) {
                Ok(text) => return parse_response(&text),
                Err(e) => last = e.to_string(),
            }
        }
        Outcome::TransportFailure(format!("{} attempts failed; last error: {last}", self.cfg.retries + 1))
    }
}
