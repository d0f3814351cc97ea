//! Live completion-endpoint client: a single POST per request, bearer-token
//! auth from the environment, bounded exponential-backoff retries, and a
//! requests-per-minute limiter in front of everything.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{
    BackendError, CompletionBackend, CompletionRequest, CompletionResponse, FinishReason,
    TokenUsage,
};

/// Environment variable holding the bearer token by default.
pub const DEFAULT_API_KEY_ENV: &str = "DXCHAT_API_KEY";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    /// Full URL of the completions endpoint.
    pub endpoint: String,
    /// Model name sent in the request body, when the endpoint wants one.
    pub model: Option<String>,
    /// Name of the environment variable holding the API key; no variable or
    /// an empty value means unauthenticated requests (local stubs).
    pub api_key_env: String,
    /// Maximum number of requests issued per `complete` call.
    pub attempts: u32,
    /// Base backoff; attempt i sleeps `backoff_ms << i`.
    pub backoff_ms: u64,
    /// Requests per minute across all sessions; `None` disables the limiter.
    pub rate_limit_per_min: Option<u32>,
    pub timeout_secs: u64,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8080/v1/completions".into(),
            model: None,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            attempts: 3,
            backoff_ms: 250,
            rate_limit_per_min: None,
            timeout_secs: 60,
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<&'a str>,
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    stop: Vec<&'a str>,
}

#[derive(Deserialize)]
struct WireChoice {
    text: String,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize, Default)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

/// Minimum-interval rate limiter shared by all sessions.
struct RateGate {
    min_interval: Duration,
    last: Mutex<Option<Instant>>,
}

impl RateGate {
    fn new(per_minute: u32) -> Self {
        Self {
            min_interval: Duration::from_secs_f64(60.0 / per_minute.max(1) as f64),
            last: Mutex::new(None),
        }
    }

    /// Block until a slot is free, then claim it.
    fn wait(&self) {
        loop {
            let sleep_for = {
                let mut last = self.last.lock().expect("rate gate poisoned");
                let now = Instant::now();
                match *last {
                    Some(prev) if now.duration_since(prev) < self.min_interval => {
                        self.min_interval - now.duration_since(prev)
                    }
                    _ => {
                        *last = Some(now);
                        return;
                    }
                }
            };
            std::thread::sleep(sleep_for);
        }
    }
}

pub struct HttpBackend {
    config: HttpBackendConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    gate: Option<RateGate>,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::BadResponse(e.to_string()))?;
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty());
        let gate = config.rate_limit_per_min.map(RateGate::new);
        Ok(Self {
            config,
            client,
            api_key,
            gate,
        })
    }

    fn send_once(&self, request: &CompletionRequest) -> Result<CompletionResponse, SendFailure> {
        if let Some(gate) = &self.gate {
            gate.wait();
        }
        let body = WireRequest {
            model: self.config.model.as_deref(),
            prompt: &request.prompt,
            max_tokens: request.max_tokens,
            temperature: request.temperature,
            stop: request.stop.iter().map(String::as_str).collect(),
        };
        let started = Instant::now();
        let mut builder = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| SendFailure {
            status: None,
            message: e.to_string(),
            retryable: true,
        })?;
        let status = response.status();
        if !status.is_success() {
            return Err(SendFailure {
                status: Some(status.as_u16()),
                message: format!("endpoint returned {status}"),
                retryable: status.as_u16() == 429 || status.is_server_error(),
            });
        }
        let wire: WireResponse = response.json().map_err(|e| SendFailure {
            status: Some(status.as_u16()),
            message: format!("body parse: {e}"),
            retryable: false,
        })?;
        let choice = wire.choices.into_iter().next().ok_or(SendFailure {
            status: Some(status.as_u16()),
            message: "no choices in response".into(),
            retryable: false,
        })?;
        let usage = wire.usage.unwrap_or_default();
        Ok(CompletionResponse {
            text: choice.text,
            finish_reason: match choice.finish_reason.as_deref() {
                Some("length") => FinishReason::Length,
                Some("stop") | None => FinishReason::Stop,
                Some(_) => FinishReason::Error,
            },
            token_usage: TokenUsage {
                prompt_tokens: usage.prompt_tokens,
                completion_tokens: usage.completion_tokens,
            },
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}

struct SendFailure {
    status: Option<u16>,
    message: String,
    retryable: bool,
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        if request.prompt.is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        let attempts = self.config.attempts.max(1);
        let mut made = 0;
        let mut last_failure: Option<SendFailure> = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(
                    self.config.backoff_ms << (attempt - 1),
                ));
            }
            made += 1;
            match self.send_once(request) {
                Ok(response) => return Ok(response),
                Err(failure) => {
                    let retryable = failure.retryable;
                    last_failure = Some(failure);
                    if !retryable {
                        break;
                    }
                }
            }
        }
        let failure = last_failure.expect("at least one attempt was made");
        Err(BackendError::Http {
            attempts: made,
            status: failure.status,
            message: failure.message,
        })
    }

    fn name(&self) -> &'static str {
        "http"
    }
}
