//! Scoring and reporting: diagnosis extraction, per-turn accuracy curves,
//! mode comparison, and blinded human-evaluation packets.

mod matcher;
mod packets;
mod score;

pub use matcher::{extract_diagnosis, DiagnosisMatch, MatchMethod, MatchPolicy};
pub use packets::{
    build_criticality_packet, build_faithfulness_packet, collect_qa_pairs, packet_violations,
    parse_verdicts, tabulate_verdicts, CriticalityKeyEntry, CriticalityPacket, CriticalitySummary,
    DialoguePair, FaithfulnessItem, FaithfulnessKeyEntry, FaithfulnessPacket, QaPair,
    SplitTranscripts, Verdict,
};
pub use score::{
    aggregate, compare_modes, score_session, ComparisonTable, SessionScore, TurnScore,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue::PromptMode;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no sessions to aggregate")]
    NoSessions,
    #[error("split mismatch: {left} vs {right}")]
    SplitMismatch { left: String, right: String },
    #[error("pool holds {pool} items, requested {requested}")]
    PoolTooSmall { pool: usize, requested: usize },
    #[error("unknown record for patient {0:?}")]
    UnknownPatient(String),
    #[error("verdict line {line} is malformed: {reason}")]
    BadVerdict { line: usize, reason: String },
    #[error("verdict references unknown pair {0:?}")]
    UnknownPair(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Accuracy summary for one split and prompting mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub split: String,
    pub mode: PromptMode,
    /// Number of scored sessions.
    pub n: usize,
    /// Accuracy at each dialogue turn, indexed t = 1..t_max.
    pub per_turn_accuracy: Vec<f64>,
    /// Denominator behind each per-turn entry (probe holes shrink it).
    pub per_turn_valid: Vec<usize>,
    pub final_accuracy: f64,
    /// Sessions whose final utterance matched no condition.
    pub unparsed_count: usize,
}
