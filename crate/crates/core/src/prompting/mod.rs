//! Prompt assembly for the three prompt families: standard doctor
//! (`[I][S][D]`), DR-CoT doctor (augmented instruction plus rewritten
//! shots), and patient bot (`[I][S][P][D]`).

pub mod assets;
pub mod drcot;
pub mod render;

pub use assets::PromptAssets;
pub use drcot::{
    derive_drcot_instruction, extract_question, parse_thought, render_thought_sentence,
    rewrite_shot_drcot, QUESTION_MARKER,
};
pub use render::{
    render_drcot_doctor_prompt, render_patient_prompt, render_standard_doctor_prompt,
    RenderedPrompt, SegmentOffsets, DOCTOR_TAG, INFORM_MARKER, PATIENT_TAG, PROFILE_HEADING,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("instruction is empty")]
    EmptyInstruction,
    #[error("instruction already carries the reasoning augmentation")]
    AlreadyAugmented,
    #[error("exemplar is invalid: {0}")]
    InvalidExemplar(String),
    #[error("exemplar thoughts are missing or misaligned: {0}")]
    MisalignedThoughts(String),
    #[error("dialogue must end with an answered turn to prompt the doctor")]
    DialogueAwaitingAnswer,
    #[error("dialogue must end with an unanswered doctor question to prompt the patient")]
    DialogueNotAwaitingAnswer,
    #[error("patient prompt requires a profile")]
    MissingProfile,
    #[error("doctor prompts do not carry a profile")]
    ProfileNotAllowed,
    #[error("asset {name} failed to parse: {reason}")]
    AssetParse { name: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One reasoning step of a DR-CoT shot: the observed-evidence summary, the
/// ranked differential, and the question that follows from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrCotThought {
    pub evidence_summary: String,
    pub ranked_ddx: Vec<String>,
    pub next_question: String,
}

/// One question/answer exchange inside an exemplar conversation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExemplarTurn {
    pub q: String,
    pub a: String,
}

/// A complete doctor-patient conversation used as a prompt shot. Doctor
/// exemplars may carry DR-CoT thoughts for turns 2..T; the patient exemplar
/// carries the profile its answers are scripted from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    pub opening: String,
    pub turns: Vec<ExemplarTurn>,
    pub closing: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thoughts: Option<Vec<DrCotThought>>,
}

impl Exemplar {
    /// Check completeness and, when thoughts are present, their alignment:
    /// one thought per turn 2..T, each quoting the turn's question verbatim.
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.opening.trim().is_empty() {
            return Err(PromptError::InvalidExemplar("empty opening".into()));
        }
        if self.closing.trim().is_empty() {
            return Err(PromptError::InvalidExemplar(
                "missing closing utterance".into(),
            ));
        }
        for (i, turn) in self.turns.iter().enumerate() {
            if turn.q.trim().is_empty() || turn.a.trim().is_empty() {
                return Err(PromptError::InvalidExemplar(format!(
                    "turn {} is incomplete",
                    i + 1
                )));
            }
        }
        if let Some(thoughts) = &self.thoughts {
            let expected = self.turns.len().saturating_sub(1);
            if thoughts.len() != expected {
                return Err(PromptError::MisalignedThoughts(format!(
                    "expected {} thoughts for {} turns, found {}",
                    expected,
                    self.turns.len(),
                    thoughts.len()
                )));
            }
            for (k, thought) in thoughts.iter().enumerate() {
                if thought.ranked_ddx.is_empty() {
                    return Err(PromptError::MisalignedThoughts(format!(
                        "thought {k} has an empty differential"
                    )));
                }
                let mut seen = std::collections::BTreeSet::new();
                for name in &thought.ranked_ddx {
                    if !seen.insert(name) {
                        return Err(PromptError::MisalignedThoughts(format!(
                            "thought {k} repeats {name:?} in the differential"
                        )));
                    }
                }
                let q = &self.turns[k + 1].q;
                if &thought.next_question != q {
                    return Err(PromptError::MisalignedThoughts(format!(
                        "thought {k} quotes {:?} but turn {} asks {q:?}",
                        thought.next_question,
                        k + 2
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn has_thoughts(&self) -> bool {
        self.thoughts.is_some()
    }
}

/// One exchange of the live (incomplete) conversation. `doctor_full` is what
/// the doctor context shows (the whole completion, reasoning included);
/// `doctor_question` is the bare question shown to the patient bot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryTurn {
    pub doctor_full: String,
    pub doctor_question: String,
    pub patient_answer: Option<String>,
}

/// The dialogue history `D`: the patient opening plus alternating exchanges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueHistory {
    pub opening: String,
    pub turns: Vec<HistoryTurn>,
    pub pending_inform: bool,
}

impl DialogueHistory {
    pub fn new(opening: impl Into<String>) -> Self {
        Self {
            opening: opening.into(),
            turns: Vec::new(),
            pending_inform: false,
        }
    }

    /// True when every doctor question has been answered.
    pub fn is_complete_exchange(&self) -> bool {
        self.turns.iter().all(|t| t.patient_answer.is_some())
    }

    /// True when the last turn is a doctor question awaiting its answer.
    pub fn awaits_answer(&self) -> bool {
        self.turns
            .last()
            .is_some_and(|t| t.patient_answer.is_none())
    }

    pub fn push_question(&mut self, doctor_full: String, doctor_question: String) {
        self.turns.push(HistoryTurn {
            doctor_full,
            doctor_question,
            patient_answer: None,
        });
    }

    pub fn record_answer(&mut self, answer: String) {
        if let Some(turn) = self.turns.last_mut() {
            turn.patient_answer = Some(answer);
        }
    }

    pub fn with_pending_inform(&self) -> Self {
        let mut copy = self.clone();
        copy.pending_inform = true;
        copy
    }
}

/// The I/S/(P)/D decomposition of a prompt before rendering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptParts {
    pub instruction: String,
    pub shots: Vec<Exemplar>,
    pub profile: Option<String>,
    pub dialogue: DialogueHistory,
}
