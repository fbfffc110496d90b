//! Client for OpenAI-compatible `/v1/chat/completions` endpoints.
//!
//! Each prompt goes out as a single user message carrying only `model`,
//! `messages`, `temperature` and `max_tokens`; every other sampling field is
//! left to the server's defaults.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fmt;
use std::str::FromStr;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};
use thiserror::Error;

use crate::promptrender::RenderedPrompt;
use crate::seed::{mix_seeds, InstanceRng, Seed};

pub const API_KEY_ENV: &str = "STATERECALL_API_KEY";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Think,
    Instruct,
}

impl Variant {
    pub fn default_max_output_tokens(self) -> u32 {
        match self {
            Variant::Think => 6000,
            Variant::Instruct => 40,
        }
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "think" => Ok(Variant::Think),
            "instruct" => Ok(Variant::Instruct),
            other => Err(format!("unknown variant `{other}` (think, instruct)")),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Think => "think",
            Variant::Instruct => "instruct",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_id: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub variant: Variant,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub request_timeout_secs: f64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
}

impl EndpointConfig {
    /// Temperature 0 and the variant's output-token cap.
    pub fn preset(base_url: &str, model_id: &str, variant: Variant) -> Self {
        EndpointConfig {
            base_url: base_url.to_string(),
            model_id: model_id.to_string(),
            api_key: None,
            variant,
            temperature: 0.0,
            max_output_tokens: variant.default_max_output_tokens(),
            request_timeout_secs: 600.0,
            max_retries: 5,
            max_in_flight: 8,
            backoff_base_ms: 1000,
            backoff_cap_ms: 30_000,
        }
    }

    pub fn validate(&self) -> Result<(), EndpointError> {
        let bad = |msg: &str| Err(EndpointError::InvalidConfig(msg.to_string()));
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be >= 0");
        }
        if self.max_output_tokens < 1 {
            return bad("max_output_tokens must be >= 1");
        }
        if self.max_in_flight < 1 {
            return bad("max_in_flight must be >= 1");
        }
        if self.request_timeout_secs.is_nan() || self.request_timeout_secs <= 0.0 {
            return bad("request timeout must be positive");
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return bad("base_url must start with http:// or https://");
        }
        Ok(())
    }

    pub fn completions_url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/v1") {
            format!("{base}/chat/completions")
        } else {
            format!("{base}/v1/chat/completions")
        }
    }

    /// Explicit key, else the environment variable.
    pub fn resolved_api_key(&self) -> Option<String> {
        self.api_key
            .clone()
            .or_else(|| std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()))
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "max_tokens": self.max_output_tokens,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Other,
}

impl FinishReason {
    fn from_wire(s: Option<&str>) -> Self {
        match s {
            Some("stop") => FinishReason::Stop,
            Some("length") => FinishReason::Length,
            _ => FinishReason::Other,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub raw_text: String,
    pub finish_reason: FinishReason,
    pub latency_ms: u64,
    pub attempt_count: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EndpointError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("HTTP status {code}: {body}")]
    HttpStatus { code: u16, body: String },
    #[error("malformed completions response: {0}")]
    MalformedResponse(String),
    #[error("request timed out")]
    Timeout,
    #[error("invalid endpoint configuration: {0}")]
    InvalidConfig(String),
}

impl EndpointError {
    /// Network errors, timeouts, 429 and 5xx are retried; other 4xx are not.
    pub fn is_transient(&self) -> bool {
        match self {
            EndpointError::Transport(_) | EndpointError::Timeout => true,
            EndpointError::HttpStatus { code, .. } => *code == 429 || *code >= 500,
            EndpointError::MalformedResponse(_) | EndpointError::InvalidConfig(_) => false,
        }
    }
}

/// Exponential backoff with full jitter. Each delay is drawn uniformly from
/// `[0, min(cap, base·2^k)]` and then raised to the previous delay, so delays
/// for one request never decrease.
#[derive(Debug)]
pub struct Backoff {
    base: Duration,
    cap: Duration,
    attempt: u32,
    previous: Duration,
    rng: InstanceRng,
}

impl Backoff {
    pub fn new(base: Duration, cap: Duration, seed: Seed) -> Self {
        Backoff {
            base,
            cap,
            attempt: 0,
            previous: Duration::ZERO,
            rng: InstanceRng::new(seed),
        }
    }

    pub fn next_delay(&mut self) -> Duration {
        let ceiling = self
            .base
            .saturating_mul(1u32 << self.attempt.min(20))
            .min(self.cap);
        self.attempt += 1;
        let jittered = ceiling.mul_f64(self.rng.unit());
        self.previous = self.previous.max(jittered).min(self.cap);
        self.previous
    }
}

struct Permits {
    free: Mutex<usize>,
    released: Condvar,
}

struct PermitGuard<'a>(&'a Permits);

impl Permits {
    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().expect("permit lock");
        while *free == 0 {
            free = self.released.wait(free).expect("permit lock");
        }
        *free -= 1;
        PermitGuard(self)
    }
}

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("permit lock") += 1;
        self.0.released.notify_one();
    }
}

/// Shareable across threads; at most `max_in_flight` requests are outstanding.
pub struct EndpointClient {
    cfg: EndpointConfig,
    agent: ureq::Agent,
    permits: Permits,
}

impl EndpointClient {
    pub fn new(cfg: EndpointConfig) -> Result<Self, EndpointError> {
        cfg.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs_f64(cfg.request_timeout_secs)))
            .build()
            .into();
        let permits = Permits {
            free: Mutex::new(cfg.max_in_flight),
            released: Condvar::new(),
        };
        Ok(EndpointClient {
            cfg,
            agent,
            permits,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    pub fn complete(&self, prompt: &RenderedPrompt) -> Result<CompletionResult, EndpointError> {
        self.complete_text(&prompt.text)
    }

    pub fn complete_text(&self, prompt: &str) -> Result<CompletionResult, EndpointError> {
        let started = Instant::now();
        let nanos = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0);
        let mut backoff = Backoff::new(
            Duration::from_millis(self.cfg.backoff_base_ms),
            Duration::from_millis(self.cfg.backoff_cap_ms),
            mix_seeds(Seed(nanos), Seed(prompt.len() as u64), "backoff"),
        );
        let body = self.cfg.request_body(prompt).to_string();
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let outcome = {
                let _permit = self.permits.acquire();
                self.send_once(&body)
            };
            match outcome {
                Ok((raw_text, finish_reason)) => {
                    return Ok(CompletionResult {
                        raw_text,
                        finish_reason,
                        latency_ms: started.elapsed().as_millis() as u64,
                        attempt_count: attempt,
                    })
                }
                Err(e) if e.is_transient() && attempt <= self.cfg.max_retries => {
                    std::thread::sleep(backoff.next_delay());
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn send_once(&self, body: &str) -> Result<(String, FinishReason), EndpointError> {
        let mut req = self
            .agent
            .post(self.cfg.completions_url())
            .header("Content-Type", "application/json");
        if let Some(key) = self.cfg.resolved_api_key() {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send(body).map_err(map_transport)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(map_transport)?;
        if !(200..300).contains(&status) {
            return Err(EndpointError::HttpStatus {
                code: status,
                body: text.chars().take(500).collect(),
            });
        }
        parse_completion(&text)
    }
}

fn map_transport(e: ureq::Error) -> EndpointError {
    match e {
        ureq::Error::Timeout(_) => EndpointError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => EndpointError::Timeout,
        other => EndpointError::Transport(other.to_string()),
    }
}

/// Reads `choices[0].message.content` and `choices[0].finish_reason`. A null
/// content is an empty completion.
pub fn parse_completion(body: &str) -> Result<(String, FinishReason), EndpointError> {
    let v: Value =
        serde_json::from_str(body).map_err(|e| EndpointError::MalformedResponse(e.to_string()))?;
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| EndpointError::MalformedResponse("missing choices[0]".into()))?;
    let message = choice
        .get("message")
        .ok_or_else(|| EndpointError::MalformedResponse("missing choices[0].message".into()))?;
    let content = match message.get("content") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) | None => String::new(),
        Some(_) => {
            return Err(EndpointError::MalformedResponse(
                "message content is not a string".into(),
            ))
        }
    };
    let finish = FinishReason::from_wire(choice.get("finish_reason").and_then(Value::as_str));
    Ok((content, finish))
}

/// One-shot convenience over [`EndpointClient`].
pub fn complete(
    prompt: &RenderedPrompt,
    cfg: &EndpointConfig,
) -> Result<CompletionResult, EndpointError> {
    EndpointClient::new(cfg.clone())?.complete(prompt)
}
