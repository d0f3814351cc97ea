//! Uniform text-completion interface with three implementations: a live
//! HTTP endpoint, a deterministic record/replay cassette, and rule-based
//! oracles for the doctor and patient roles.

pub mod http;
pub mod oracle;
pub mod replay;

pub use http::{HttpBackend, HttpBackendConfig, DEFAULT_API_KEY_ENV};
pub use oracle::{OracleDoctor, OraclePatient, OraclePolicy, QuestionOrder};
pub use replay::{Cassette, CassetteEntry, RecordingBackend, ReplayBackend};

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Paper-faithful request defaults.
pub const DEFAULT_MAX_TOKENS: u32 = 384;
pub const DEFAULT_TEMPERATURE: f64 = 0.0;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("http request failed after {attempts} attempt(s){}: {message}", status.map(|s| format!(" (last status {s})")).unwrap_or_default())]
    Http {
        attempts: u32,
        status: Option<u16>,
        message: String,
    },
    #[error("endpoint returned an unusable body: {0}")]
    BadResponse(String),
    #[error("missing api key: environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("replay miss for request {hash}{}", nearest.as_ref().map(|n| format!("; nearest recorded key {n}")).unwrap_or_default())]
    ReplayMiss {
        hash: String,
        nearest: Option<String>,
    },
    #[error("oracle could not parse the dialogue segment: {0}")]
    OracleParse(String),
    #[error("oracle has no record for session {0:?}")]
    UnknownSession(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which side of the conversation a completion is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Doctor,
    Patient,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Doctor => write!(f, "doctor"),
            Role::Patient => write!(f, "patient"),
        }
    }
}

/// Whether a request advances the live dialogue, forks it for a per-turn
/// probe, or forces the final diagnosis at the turn cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Live,
    Probe,
    Forced,
}

/// Session/turn identification carried on every request. The session id is
/// the patient id, which lets the oracle backends find their script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestMetadata {
    pub session_id: String,
    pub role: Role,
    pub turn: u32,
    pub kind: RequestKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop: Vec<String>,
    pub metadata: RequestMetadata,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, metadata: RequestMetadata) -> Self {
        Self {
            prompt: prompt.into(),
            max_tokens: DEFAULT_MAX_TOKENS,
            temperature: DEFAULT_TEMPERATURE,
            stop: Vec::new(),
            metadata,
        }
    }

    pub fn with_stop(mut self, stop: Vec<String>) -> Self {
        self.stop = stop;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub token_usage: TokenUsage,
    pub latency_ms: u64,
}

impl CompletionResponse {
    /// A deterministic response as the oracle backends produce it: zero
    /// latency and length-proportional token counts.
    pub fn deterministic(text: String, request: &CompletionRequest) -> Self {
        Self {
            finish_reason: FinishReason::Stop,
            token_usage: TokenUsage {
                prompt_tokens: (request.prompt.len() / 4) as u64,
                completion_tokens: (text.len() / 4).max(1) as u64,
            },
            latency_ms: 0,
            text,
        }
    }
}

/// A text-completion provider. Implementations must be shareable across
/// concurrently running sessions.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError>;

    /// Short name recorded in run manifests.
    fn name(&self) -> &'static str;
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<T> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(request)
    }
    fn name(&self) -> &'static str {
        (**self).name()
    }
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for Box<T> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(request)
    }
    fn name(&self) -> &'static str {
        (**self).name()
    }
}

/// Content hash identifying a request in a replay cassette. Covers the
/// prompt, the sampling parameters, and the session metadata: the oracle
/// backends condition on the patient behind a session, so two byte-equal
/// prompts from different sessions must not collapse into one key.
pub fn request_hash(request: &CompletionRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(request.prompt.as_bytes());
    hasher.update([0]);
    hasher.update(request.max_tokens.to_le_bytes());
    hasher.update(request.temperature.to_le_bytes());
    for stop in &request.stop {
        hasher.update([0]);
        hasher.update(stop.as_bytes());
    }
    hasher.update([0]);
    hasher.update(request.metadata.session_id.as_bytes());
    hasher.update([0]);
    hasher.update(request.metadata.role.to_string().as_bytes());
    hasher.update(request.metadata.turn.to_le_bytes());
    hasher.update([match request.metadata.kind {
        RequestKind::Live => 0u8,
        RequestKind::Probe => 1,
        RequestKind::Forced => 2,
    }]);
    hex::encode(hasher.finalize())
}
