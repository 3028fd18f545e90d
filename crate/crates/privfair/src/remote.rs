//! Chat-completion decision engine.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use privfair_core::engine::{DecisionEngine, DecisionRequest, EngineDecision, EngineError, EngineErrorKind};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::prompt::{build_prompt, parse_decision, prompt_labels};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    /// Full chat-completions endpoint URL.
    pub url: String,
    pub model: String,
    /// Environment variable holding the bearer token; no auth header if unset.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Attempts per request, including the first.
    #[serde(default = "default_attempts")]
    pub attempts: u32,
    /// Base backoff before the second attempt; doubles after each failure.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

fn default_timeout() -> f64 {
    30.0
}

fn default_in_flight() -> usize {
    4
}

fn default_attempts() -> u32 {
    3
}

fn default_backoff() -> u64 {
    250
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            model: model.into(),
            api_key_env: None,
            timeout_secs: default_timeout(),
            max_in_flight: default_in_flight(),
            attempts: default_attempts(),
            backoff_ms: default_backoff(),
        }
    }
}

/// Counting semaphore over blocking threads.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Sends the scenario prompt to a chat-completion endpoint and parses the
/// JSON decision in the reply. Transport failures and timeouts are retried
/// with jittered exponential backoff; parse and protocol failures are not.
/// One engine shared across threads never has more than `max_in_flight`
/// requests outstanding.
pub struct RemoteEngine {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    gate: Gate,
    api_key: Option<String>,
}

impl RemoteEngine {
    pub fn new(config: RemoteConfig) -> Result<Self, EngineError> {
        let cfg = |m: String| EngineError::new(EngineErrorKind::Config, m);
        if !(config.timeout_secs > 0.0) || !config.timeout_secs.is_finite() {
            return Err(cfg(format!("timeout_secs must be positive, got {}", config.timeout_secs)));
        }
        if config.max_in_flight == 0 || config.attempts == 0 {
            return Err(cfg("max_in_flight and attempts must be at least 1".into()));
        }
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| cfg(format!("environment variable {var} is not set")))?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| cfg(format!("http client: {e}")))?;
        let gate = Gate::new(config.max_in_flight);
        Ok(Self { config, client, gate, api_key })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn send_once(&self, body: &str) -> Result<String, EngineError> {
        let _permit = self.gate.acquire();
        let mut req = self.client.post(&self.config.url).header("content-type", "application/json").body(body.to_owned());
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let transport = |e: reqwest::Error| {
            let kind = if e.is_timeout() { EngineErrorKind::Timeout } else { EngineErrorKind::Transport };
            EngineError::new(kind, e.to_string())
        };
        let resp = req.send().map_err(transport)?;
        let status = resp.status();
        let text = resp.text().map_err(transport)?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(EngineError::new(EngineErrorKind::Transport, format!("HTTP {status}")).with_payload(text));
        }
        if !status.is_success() {
            return Err(EngineError::new(EngineErrorKind::Protocol, format!("HTTP {status}")).with_payload(text));
        }
        Ok(text)
    }

    /// Message content of the first choice of a chat-completion response.
    fn content(raw: &str) -> Result<String, EngineError> {
        let value: Value = serde_json::from_str(raw)
            .map_err(|e| EngineError::new(EngineErrorKind::Parse, format!("response is not JSON: {e}")).with_payload(raw))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(String::from)
            .ok_or_else(|| {
                EngineError::new(EngineErrorKind::Protocol, "response has no choices[0].message.content").with_payload(raw)
            })
    }
}

impl DecisionEngine for RemoteEngine {
    fn name(&self) -> &str {
        "remote"
    }

    fn decide(&self, request: &DecisionRequest, rng: &mut dyn RngCore) -> Result<EngineDecision, EngineError> {
        let prompt = build_prompt(request.scenario, &request.candidates, request.context.as_deref())?;
        let body = json!({
            "model": self.config.model,
            "messages": [{ "role": "user", "content": prompt }],
        })
        .to_string();
        let mut attempt = 0;
        let raw = loop {
            attempt += 1;
            match self.send_once(&body) {
                Ok(raw) => break raw,
                Err(e) if e.is_retriable() && attempt < self.config.attempts => {
                    let base = self.config.backoff_ms as f64 * f64::from(1u32 << (attempt - 1).min(16));
                    let jitter = rng.gen_range(0.5..1.0);
                    std::thread::sleep(Duration::from_secs_f64(base * jitter / 1000.0));
                }
                Err(e) => {
                    let message = format!("{} (attempt {attempt} of {})", e.message, self.config.attempts);
                    return Err(EngineError { message, payload: e.payload.or(Some(body)), ..e });
                }
            }
        };
        let content = Self::content(&raw)?;
        let parsed = parse_decision(&content, request.scenario)?;
        let labels = prompt_labels(request.scenario);
        let rename = |label: &str| {
            let i = labels.iter().position(|l| *l == label).expect("parsed labels come from the prompt");
            request.candidates[i].id.clone()
        };
        Ok(EngineDecision {
            scores: parsed.scores.iter().map(|(l, s)| (rename(l), *s)).collect(),
            chosen: rename(&parsed.chosen),
            order: parsed.order.iter().map(|l| rename(l)).collect(),
            reason: parsed.reason,
            audit: Some(json!({ "request": body, "response": raw }).to_string()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn gate_caps_concurrency() {
        let gate = Arc::new(Gate::new(2));
        let (now, peak) = (Arc::new(AtomicUsize::new(0)), Arc::new(AtomicUsize::new(0)));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (gate, now, peak) = (gate.clone(), now.clone(), peak.clone());
                std::thread::spawn(move || {
                    let _p = gate.acquire();
                    let n = now.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(n, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(20));
                    now.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(peak.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn config_is_validated() {
        let mut c = RemoteConfig::new("http://127.0.0.1:9", "m");
        c.max_in_flight = 0;
        assert_eq!(RemoteEngine::new(c.clone()).err().unwrap().kind, EngineErrorKind::Config);
        c.max_in_flight = 1;
        c.api_key_env = Some("PRIVFAIR_SURELY_UNSET_VARIABLE".into());
        assert_eq!(RemoteEngine::new(c).err().unwrap().kind, EngineErrorKind::Config);
        let parsed: RemoteConfig = toml::from_str("url = \"http://x\"\nmodel = \"m\"\n").unwrap();
        assert_eq!(parsed.attempts, 3);
    }

    #[test]
    fn content_extraction() {
        let ok = r#"{"choices": [{"message": {"role": "assistant", "content": "hi"}}]}"#;
        assert_eq!(RemoteEngine::content(ok).unwrap(), "hi");
        assert_eq!(RemoteEngine::content("<html>").unwrap_err().kind, EngineErrorKind::Parse);
        assert_eq!(RemoteEngine::content(r#"{"choices": []}"#).unwrap_err().kind, EngineErrorKind::Protocol);
    }
}
