//! The self-chat session engine: alternating doctor/patient completions,
//! utterance classification, per-turn diagnosis probes, and the turn cap.

mod executor;
mod session;
mod store;

pub use executor::{run_batch, BatchOutcome};
pub use session::{
    build_doctor_prompt, build_patient_prompt, classify_doctor_utterance, normalize_utterance,
    run_session, SessionContext,
};
pub use store::{read_transcripts, read_transcripts_from, write_transcripts};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, Role, TokenUsage};
use crate::dataset::DatasetError;
use crate::prompting::{DrCotThought, PromptError};

/// Default turn cap: forcing a diagnosis after eight doctor questions.
pub const DEFAULT_T_MAX: u32 = 8;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("backend failure at turn {turn} ({role}): {source}")]
    Backend {
        turn: u32,
        role: Role,
        #[source]
        source: BackendError,
        partial: Box<Option<Transcript>>,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("transcript violates an invariant: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("transcript line {line} failed to parse: {reason}")]
    Corrupt { line: usize, reason: String },
}

/// Which prompt family drives the doctor side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    Standard,
    Drcot,
}

impl PromptMode {
    pub fn parse(raw: &str) -> Option<Self> {
        match raw.to_ascii_lowercase().as_str() {
            "standard" => Some(PromptMode::Standard),
            "drcot" | "dr-cot" => Some(PromptMode::Drcot),
            _ => None,
        }
    }
}

impl std::fmt::Display for PromptMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PromptMode::Standard => write!(f, "standard"),
            PromptMode::Drcot => write!(f, "drcot"),
        }
    }
}

/// Per-session knobs. Defaults mirror the experimental configuration:
/// eight-turn cap, probing on, probes derived by forking the live prompt.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionConfig {
    pub mode: PromptMode,
    pub t_max: u32,
    pub probe_every_turn: bool,
    /// Fill probes by re-running the dialogue prefix per turn instead of
    /// forking the live prompt. Equivalent under deterministic backends.
    pub independent_runs: bool,
    pub seed: u64,
    pub save_prompts: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            mode: PromptMode::Standard,
            t_max: DEFAULT_T_MAX,
            probe_every_turn: true,
            independent_runs: false,
            seed: 0,
            save_prompts: false,
        }
    }
}

impl SessionConfig {
    pub fn check(&self) -> Result<(), SessionError> {
        if self.t_max < 1 {
            return Err(SessionError::Invariant("t_max must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoctorKind {
    Question,
    Inform,
    /// The completion could not be classified (e.g. empty); the session is
    /// aborted and scored as unparsed.
    Malformed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminatedBy {
    ModelInform,
    ForcedAtTmax,
    AbortedMalformed,
}

/// One doctor turn of a session, with the probe and the patient answer when
/// the turn was a question. All recorded text has machine tags stripped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: u32,
    pub doctor_raw: String,
    pub doctor_kind: DoctorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extracted_question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thought: Option<DrCotThought>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_diagnosis_raw: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doctor_prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient_prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_prompt: Option<String>,
}

/// Token totals across every completion of a session, probes included.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenTotals {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub requests: u64,
}

impl TokenTotals {
    pub fn add(&mut self, usage: &TokenUsage) {
        self.prompt_tokens += usage.prompt_tokens;
        self.completion_tokens += usage.completion_tokens;
        self.requests += 1;
    }
}

pub const TRANSCRIPT_SCHEMA_VERSION: u32 = 1;

/// One completed self-chat session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub schema_version: u32,
    pub patient_id: String,
    pub mode: PromptMode,
    pub opening: String,
    pub turns: Vec<Turn>,
    pub final_diagnosis_raw: String,
    pub terminated_by: TerminatedBy,
    /// Sum of backend-reported latencies, so replayed runs are byte-stable.
    pub duration_ms: u64,
    pub tokens: TokenTotals,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forced_prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_role: Option<Role>,
}

impl Transcript {
    /// 1-based index of the turn the session's diagnosis belongs to: the
    /// inform turn, or the cap when the diagnosis was forced.
    pub fn inform_turn(&self, t_max: u32) -> u32 {
        match self.terminated_by {
            TerminatedBy::ModelInform | TerminatedBy::AbortedMalformed => {
                self.turns.last().map(|t| t.index).unwrap_or(1)
            }
            TerminatedBy::ForcedAtTmax => t_max,
        }
    }

    /// Check the session-shape invariants.
    pub fn validate(&self, t_max: u32) -> Result<(), SessionError> {
        let fail = |reason: String| Err(SessionError::Invariant(reason));
        if self.turns.is_empty() || self.turns.len() as u32 > t_max {
            return fail(format!(
                "expected between 1 and {t_max} turns, found {}",
                self.turns.len()
            ));
        }
        for (i, turn) in self.turns.iter().enumerate() {
            if turn.index != i as u32 + 1 {
                return fail(format!("turn {} carries index {}", i + 1, turn.index));
            }
            let last = i + 1 == self.turns.len();
            match turn.doctor_kind {
                DoctorKind::Question => {
                    if !last && turn.patient_answer.is_none() {
                        return fail(format!("question turn {} has no answer", turn.index));
                    }
                }
                DoctorKind::Inform | DoctorKind::Malformed => {
                    if !last {
                        return fail(format!("terminal turn {} is not the last turn", turn.index));
                    }
                    if turn.patient_answer.is_some() {
                        return fail(format!("terminal turn {} has an answer", turn.index));
                    }
                    if turn.probe_diagnosis_raw.is_some() {
                        return fail(format!("terminal turn {} has a probe", turn.index));
                    }
                }
            }
        }
        let last_kind = self.turns.last().map(|t| t.doctor_kind);
        match self.terminated_by {
            TerminatedBy::ModelInform => {
                if last_kind != Some(DoctorKind::Inform) {
                    return fail("model_inform transcript does not end in an inform".into());
                }
            }
            TerminatedBy::ForcedAtTmax => {
                if last_kind != Some(DoctorKind::Question) {
                    return fail("forced transcript must end in a question turn".into());
                }
                if self.final_diagnosis_raw.is_empty() {
                    return fail("forced transcript is missing the forced diagnosis".into());
                }
            }
            TerminatedBy::AbortedMalformed => {
                if last_kind != Some(DoctorKind::Malformed) {
                    return fail("aborted transcript does not end in a malformed turn".into());
                }
            }
        }
        Ok(())
    }

    /// Count of question turns (the inform turn excluded).
    pub fn question_turns(&self) -> usize {
        self.turns
            .iter()
            .filter(|t| t.doctor_kind == DoctorKind::Question)
            .count()
    }
}
