//! Rule-based doctor and patient oracles used for desk-scale verification.
//! Both read the dialogue state back out of the rendered prompt text, so a
//! prompt-rendering regression surfaces here as an oracle parse error.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    BackendError, CompletionBackend, CompletionRequest, CompletionResponse, RequestKind, Role,
};
use crate::dataset::{Catalogs, EvidenceKind, PatientRecord};
use crate::prompting::{DOCTOR_TAG, INFORM_MARKER, PATIENT_TAG};

/// Suffix the oracle doctor embeds so the oracle patient can answer without
/// natural-language understanding. Stripped before anything is persisted.
pub const CODE_TAG_OPEN: &str = "[code:";

/// Question the oracle doctor falls back to once every scripted evidence
/// has been asked.
pub const FILLER_QUESTION: &str = "Is there anything else you would like to tell me?";

fn inform_body(diagnosis: &str) -> String {
    format!("Based on the gathered evidence, the most likely diagnosis is {diagnosis}.")
}

/// In which order the oracle doctor walks the evidence space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionOrder {
    CatalogOrder,
    RecordOrder,
}

/// Scripted behavior for the oracle doctor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OraclePolicy {
    /// Turn at which the doctor informs on its own; `None` never informs.
    pub inform_turn: Option<u32>,
    /// Fraction of sessions whose diagnosis is the true pathology. Exactly
    /// `round(correctness * n)` patients of a roster of `n` are correct.
    pub correctness: f64,
    pub question_order: QuestionOrder,
    pub seed: u64,
    /// What a forced probe before the inform turn answers: the truth or a
    /// deterministic wrong condition.
    pub probe_correct_before_inform: bool,
}

impl Default for OraclePolicy {
    fn default() -> Self {
        Self {
            inform_turn: Some(3),
            correctness: 1.0,
            question_order: QuestionOrder::RecordOrder,
            seed: 0,
            probe_correct_before_inform: false,
        }
    }
}

/// Dialogue state recovered from a prompt's trailing lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedDialogue {
    pub opening: String,
    /// Doctor utterances with their answers; the answer is `None` only for
    /// the final unanswered question of a patient prompt.
    pub exchanges: Vec<(String, Option<String>)>,
    /// True when the trailing doctor cue carries the inform marker.
    pub pending_inform: bool,
}

impl ParsedDialogue {
    /// 1-based index of the doctor utterance the completion will produce.
    pub fn next_turn(&self) -> u32 {
        self.exchanges.len() as u32 + 1
    }
}

/// Parse the dialogue segment of a rendered prompt: the run of role-tagged
/// lines after the last blank line, ending in a bare role cue.
pub fn parse_dialogue_tail(prompt: &str, cue_role: Role) -> Result<ParsedDialogue, BackendError> {
    let bad = |reason: &str| BackendError::OracleParse(reason.to_string());
    let tail = prompt
        .rsplit("\n\n")
        .next()
        .ok_or_else(|| bad("empty prompt"))?;
    let mut lines = tail.lines().collect::<Vec<_>>();
    if lines.is_empty() {
        return Err(bad("no dialogue lines before the cue"));
    }
    let cue = lines.pop().unwrap();
    let pending_inform = match cue_role {
        Role::Doctor => {
            if cue == DOCTOR_TAG {
                false
            } else if cue == format!("{DOCTOR_TAG} {INFORM_MARKER}") {
                true
            } else {
                return Err(bad(&format!("unexpected doctor cue {cue:?}")));
            }
        }
        Role::Patient => {
            if cue == PATIENT_TAG {
                false
            } else {
                return Err(bad(&format!("unexpected patient cue {cue:?}")));
            }
        }
    };
    let mut iter = lines.into_iter();
    let opening = iter
        .next()
        .and_then(|l| l.strip_prefix(PATIENT_TAG))
        .map(str::trim)
        .ok_or_else(|| bad("dialogue does not start with a patient opening"))?
        .to_string();
    let mut exchanges: Vec<(String, Option<String>)> = Vec::new();
    for line in iter {
        if let Some(q) = line.strip_prefix(DOCTOR_TAG) {
            if exchanges.last().is_some_and(|(_, a)| a.is_none()) {
                return Err(bad("two doctor lines without a patient answer"));
            }
            exchanges.push((q.trim().to_string(), None));
        } else if let Some(a) = line.strip_prefix(PATIENT_TAG) {
            match exchanges.last_mut() {
                Some((_, answer @ None)) => *answer = Some(a.trim().to_string()),
                _ => return Err(bad("patient answer without a pending doctor question")),
            }
        } else {
            return Err(bad(&format!("untagged dialogue line {line:?}")));
        }
    }
    match cue_role {
        Role::Doctor => {
            if exchanges.last().is_some_and(|(_, a)| a.is_none()) {
                return Err(bad("doctor prompted while a question is unanswered"));
            }
        }
        Role::Patient => {
            if !exchanges.last().is_some_and(|(_, a)| a.is_none()) {
                return Err(bad("patient prompted without an open question"));
            }
        }
    }
    Ok(ParsedDialogue {
        opening,
        exchanges,
        pending_inform,
    })
}

/// Extract the machine tag from an oracle question, if any.
fn embedded_code(question: &str) -> Option<&str> {
    let start = question.find(CODE_TAG_OPEN)?;
    let rest = &question[start + CODE_TAG_OPEN.len()..];
    let end = rest.find(']')?;
    Some(&rest[..end])
}

fn stable_hash(seed: u64, salt: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(salt.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// The doctor oracle: asks scripted evidence questions in a fixed order and
/// informs per its policy.
pub struct OracleDoctor {
    policy: OraclePolicy,
    catalogs: Arc<Catalogs>,
    roster: BTreeMap<String, PatientRecord>,
    correct_ids: BTreeSet<String>,
}

impl OracleDoctor {
    pub fn new(policy: OraclePolicy, catalogs: Arc<Catalogs>, records: &[PatientRecord]) -> Self {
        let roster: BTreeMap<String, PatientRecord> =
            records.iter().map(|r| (r.id.clone(), r.clone())).collect();
        let mut ids: Vec<&String> = roster.keys().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
        ids.shuffle(&mut rng);
        let want = (policy.correctness * roster.len() as f64).round() as usize;
        let correct_ids = ids
            .into_iter()
            .take(want.min(roster.len()))
            .cloned()
            .collect();
        Self {
            policy,
            catalogs,
            roster,
            correct_ids,
        }
    }

    fn record(&self, session_id: &str) -> Result<&PatientRecord, BackendError> {
        self.roster
            .get(session_id)
            .ok_or_else(|| BackendError::UnknownSession(session_id.to_string()))
    }

    /// A deterministic condition different from the record's pathology.
    fn wrong_condition(&self, record: &PatientRecord) -> String {
        let pool: Vec<&str> = self
            .catalogs
            .conditions
            .names()
            .filter(|name| *name != record.pathology)
            .collect();
        if pool.is_empty() {
            return record.pathology.clone();
        }
        let idx = stable_hash(self.policy.seed, &record.id) as usize % pool.len();
        pool[idx].to_string()
    }

    fn diagnosis_for(&self, record: &PatientRecord, truthful: bool) -> String {
        if truthful {
            record.pathology.clone()
        } else {
            self.wrong_condition(record)
        }
    }

    fn next_question(&self, record: &PatientRecord, asked: &BTreeSet<String>) -> String {
        let candidates: Vec<String> = match self.policy.question_order {
            QuestionOrder::RecordOrder => {
                let mut seen = BTreeSet::new();
                record
                    .evidences
                    .iter()
                    .filter(|a| seen.insert(a.code.clone()))
                    .map(|a| a.code.clone())
                    .collect()
            }
            QuestionOrder::CatalogOrder => self
                .catalogs
                .evidences
                .iter()
                .map(|d| d.code.clone())
                .collect(),
        };
        for code in candidates {
            if asked.contains(&code) {
                continue;
            }
            if let Some(descriptor) = self.catalogs.evidences.get(&code) {
                return format!("{} {CODE_TAG_OPEN}{code}]", descriptor.question_text);
            }
        }
        FILLER_QUESTION.to_string()
    }
}

impl CompletionBackend for OracleDoctor {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        if request.prompt.is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        let record = self.record(&request.metadata.session_id)?;
        let dialogue = parse_dialogue_tail(&request.prompt, Role::Doctor)?;
        let turn = dialogue.next_turn();

        let text = if dialogue.pending_inform {
            let past_inform = self.policy.inform_turn.is_some_and(|k| turn >= k);
            let truthful = if request.metadata.kind == RequestKind::Probe && !past_inform {
                self.policy.probe_correct_before_inform
            } else {
                self.correct_ids.contains(&record.id)
            };
            format!(" {}", inform_body(&self.diagnosis_for(record, truthful)))
        } else if self.policy.inform_turn == Some(turn) {
            let truthful = self.correct_ids.contains(&record.id);
            format!(
                " {INFORM_MARKER} {}",
                inform_body(&self.diagnosis_for(record, truthful))
            )
        } else {
            let asked: BTreeSet<String> = dialogue
                .exchanges
                .iter()
                .filter_map(|(q, _)| embedded_code(q).map(str::to_string))
                .collect();
            format!(" {}", self.next_question(record, &asked))
        };
        Ok(CompletionResponse::deterministic(text, request))
    }

    fn name(&self) -> &'static str {
        "oracle-doctor"
    }
}

/// The patient oracle: answers from the record with perfect faithfulness.
pub struct OraclePatient {
    catalogs: Arc<Catalogs>,
    roster: BTreeMap<String, PatientRecord>,
}

impl OraclePatient {
    pub fn new(catalogs: Arc<Catalogs>, records: &[PatientRecord]) -> Self {
        Self {
            catalogs,
            roster: records.iter().map(|r| (r.id.clone(), r.clone())).collect(),
        }
    }

    /// The answer the record scripts for a question, or `None` when the
    /// question cannot be mapped to an evidence.
    pub fn scripted_answer(&self, record: &PatientRecord, question: &str) -> Option<String> {
        let descriptor = match embedded_code(question) {
            Some(code) => self.catalogs.evidences.get(code),
            None => {
                let bare = question.trim();
                self.catalogs.evidences.find_by_question(bare)
            }
        }?;
        let assertions: Vec<_> = record
            .evidences
            .iter()
            .filter(|a| a.code == descriptor.code)
            .collect();
        if assertions.is_empty() {
            return Some("No.".to_string());
        }
        match descriptor.kind {
            EvidenceKind::Binary => Some("Yes.".to_string()),
            _ => {
                let values: Vec<&str> = assertions
                    .iter()
                    .filter_map(|a| a.value.as_deref())
                    .map(|v| descriptor.value_text(v))
                    .collect();
                if values.is_empty() {
                    Some("Yes.".to_string())
                } else {
                    Some(format!("My answer is: {}.", values.join(", ")))
                }
            }
        }
    }
}

impl CompletionBackend for OraclePatient {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        if request.prompt.is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        let record = self
            .roster
            .get(&request.metadata.session_id)
            .ok_or_else(|| BackendError::UnknownSession(request.metadata.session_id.clone()))?;
        let dialogue = parse_dialogue_tail(&request.prompt, Role::Patient)?;
        let question = dialogue
            .exchanges
            .last()
            .map(|(q, _)| q.as_str())
            .ok_or_else(|| BackendError::OracleParse("no question to answer".into()))?;
        let answer = self
            .scripted_answer(record, question)
            .unwrap_or_else(|| "I'm not sure.".to_string());
        Ok(CompletionResponse::deterministic(
            format!(" {answer}"),
            request,
        ))
    }

    fn name(&self) -> &'static str {
        "oracle-patient"
    }
}
