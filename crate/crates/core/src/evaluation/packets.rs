//! Blinded human-evaluation packets. Faithfulness packets sample (q, a)
//! pairs with the profile they must be judged against; criticality packets
//! pair the two modes' dialogues for the same patient with the mode labels
//! sealed in a separate key file.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::dialogue::{DoctorKind, PromptMode, Transcript};

/// One question/answer pair drawn from a transcript, carrying everything a
/// judge needs plus the reference data that goes into the key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaPair {
    pub patient_id: String,
    pub mode: PromptMode,
    pub turn: u32,
    pub question: String,
    pub answer: String,
    pub profile: String,
}

/// Collect every answered question turn of the given transcripts. The bare
/// extracted question is used, so reasoning sentences never leak into items.
pub fn collect_qa_pairs(
    transcripts: &[Transcript],
    profiles: &BTreeMap<String, String>,
) -> Result<Vec<QaPair>, EvalError> {
    let mut pairs = Vec::new();
    for transcript in transcripts {
        let profile = profiles
            .get(&transcript.patient_id)
            .ok_or_else(|| EvalError::UnknownPatient(transcript.patient_id.clone()))?;
        for turn in &transcript.turns {
            if turn.doctor_kind != DoctorKind::Question {
                continue;
            }
            let (Some(question), Some(answer)) = (&turn.extracted_question, &turn.patient_answer)
            else {
                continue;
            };
            pairs.push(QaPair {
                patient_id: transcript.patient_id.clone(),
                mode: transcript.mode,
                turn: turn.index,
                question: question.clone(),
                answer: answer.clone(),
                profile: profile.clone(),
            });
        }
    }
    Ok(pairs)
}

/// What the judge sees: no mode, no pathology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessItem {
    pub item_id: String,
    pub question: String,
    pub answer: String,
    pub profile: String,
}

/// Sealed mapping from item to its origin, stored separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessKeyEntry {
    pub item_id: String,
    pub patient_id: String,
    pub mode: PromptMode,
    pub turn: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FaithfulnessPacket {
    pub items: Vec<FaithfulnessItem>,
    pub key: Vec<FaithfulnessKeyEntry>,
}

/// Seeded uniform sample of `n` pairs from the pool.
pub fn build_faithfulness_packet(
    pool: &[QaPair],
    n: usize,
    seed: u64,
) -> Result<FaithfulnessPacket, EvalError> {
    if pool.len() < n {
        return Err(EvalError::PoolTooSmall {
            pool: pool.len(),
            requested: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, pool.len(), n);
    let mut packet = FaithfulnessPacket::default();
    for (i, idx) in chosen.iter().enumerate() {
        let pair = &pool[idx];
        let item_id = format!("f{:04}", i + 1);
        packet.items.push(FaithfulnessItem {
            item_id: item_id.clone(),
            question: pair.question.clone(),
            answer: pair.answer.clone(),
            profile: pair.profile.clone(),
        });
        packet.key.push(FaithfulnessKeyEntry {
            item_id,
            patient_id: pair.patient_id.clone(),
            mode: pair.mode,
            turn: pair.turn,
        });
    }
    Ok(packet)
}

/// Transcripts of both modes for one split, with the number of pairs to
/// draw from it.
#[derive(Debug, Clone)]
pub struct SplitTranscripts {
    pub split: String,
    pub count: usize,
    pub standard: Vec<Transcript>,
    pub drcot: Vec<Transcript>,
}

/// One blinded A/B comparison shown to the judge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialoguePair {
    pub pair_id: String,
    pub split: String,
    pub dialogue_a: String,
    pub dialogue_b: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalityKeyEntry {
    pub pair_id: String,
    pub patient_id: String,
    pub split: String,
    pub mode_a: PromptMode,
    pub mode_b: PromptMode,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CriticalityPacket {
    pub pairs: Vec<DialoguePair>,
    pub key: Vec<CriticalityKeyEntry>,
    /// Patients present in only one mode, skipped with a warning.
    pub skipped: Vec<String>,
}

/// Render only the revealed content of a dialogue: the opening and the
/// answered (question, answer) exchanges. Reasoning sentences, the inform
/// marker, and the final diagnosis never appear.
fn blinded_dialogue(transcript: &Transcript) -> String {
    let mut lines = vec![format!("Patient: {}", transcript.opening)];
    for turn in &transcript.turns {
        if turn.doctor_kind != DoctorKind::Question {
            continue;
        }
        if let (Some(question), Some(answer)) = (&turn.extracted_question, &turn.patient_answer) {
            lines.push(format!("Doctor: {question}"));
            lines.push(format!("Patient: {answer}"));
        }
    }
    lines.join("\n")
}

/// Build the paired-dialogue packet: per split, sample `count` patients
/// present under both modes and randomize the A/B order per pair.
pub fn build_criticality_packet(
    groups: &[SplitTranscripts],
    seed: u64,
) -> Result<CriticalityPacket, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut packet = CriticalityPacket::default();
    let mut counter = 0usize;
    for group in groups {
        let standard: BTreeMap<&str, &Transcript> = group
            .standard
            .iter()
            .map(|t| (t.patient_id.as_str(), t))
            .collect();
        let drcot: BTreeMap<&str, &Transcript> = group
            .drcot
            .iter()
            .map(|t| (t.patient_id.as_str(), t))
            .collect();
        let mut paired: Vec<&str> = Vec::new();
        for id in standard.keys() {
            if drcot.contains_key(id) {
                paired.push(id);
            } else {
                packet.skipped.push(format!("{}: {id}", group.split));
            }
        }
        for id in drcot.keys() {
            if !standard.contains_key(id) {
                packet.skipped.push(format!("{}: {id}", group.split));
            }
        }
        if paired.len() < group.count {
            return Err(EvalError::PoolTooSmall {
                pool: paired.len(),
                requested: group.count,
            });
        }
        paired.shuffle(&mut rng);
        paired.truncate(group.count);
        for id in paired {
            counter += 1;
            let pair_id = format!("c{counter:04}");
            let std_text = blinded_dialogue(standard[id]);
            let drcot_text = blinded_dialogue(drcot[id]);
            let drcot_first: bool = rng.gen();
            let (dialogue_a, dialogue_b, mode_a, mode_b) = if drcot_first {
                (
                    drcot_text,
                    std_text,
                    PromptMode::Drcot,
                    PromptMode::Standard,
                )
            } else {
                (
                    std_text,
                    drcot_text,
                    PromptMode::Standard,
                    PromptMode::Drcot,
                )
            };
            packet.pairs.push(DialoguePair {
                pair_id: pair_id.clone(),
                split: group.split.clone(),
                dialogue_a,
                dialogue_b,
            });
            packet.key.push(CriticalityKeyEntry {
                pair_id,
                patient_id: id.to_string(),
                split: group.split.clone(),
                mode_a,
                mode_b,
            });
        }
    }
    Ok(packet)
}

/// Scan packet text for strings that would break blinding; returns one
/// description per hit.
pub fn packet_violations(texts: &[&str], forbidden: &[&str]) -> Vec<String> {
    let mut violations = Vec::new();
    for (i, text) in texts.iter().enumerate() {
        let lower = text.to_lowercase();
        for needle in forbidden {
            if lower.contains(&needle.to_lowercase()) {
                violations.push(format!("item {i}: contains {needle:?}"));
            }
        }
    }
    violations
}

/// A judge's choice for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    A,
    B,
}

/// Parse a verdict file: one `pair_id<TAB>A|B` line per judged pair; `#`
/// lines are comments.
pub fn parse_verdicts(text: &str) -> Result<BTreeMap<String, Verdict>, EvalError> {
    let mut verdicts = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(pair_id), Some(choice)) = (fields.next(), fields.next()) else {
            return Err(EvalError::BadVerdict {
                line: i + 1,
                reason: "expected `pair_id A|B`".into(),
            });
        };
        let verdict = match choice {
            "A" | "a" => Verdict::A,
            "B" | "b" => Verdict::B,
            other => {
                return Err(EvalError::BadVerdict {
                    line: i + 1,
                    reason: format!("unknown choice {other:?}"),
                })
            }
        };
        verdicts.insert(pair_id.to_string(), verdict);
    }
    Ok(verdicts)
}

/// Per-split win counts after decoding verdicts through the key.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CriticalitySummary {
    /// split -> (standard wins, drcot wins).
    pub by_split: BTreeMap<String, (usize, usize)>,
}

impl CriticalitySummary {
    pub fn totals(&self) -> (usize, usize) {
        self.by_split
            .values()
            .fold((0, 0), |(s, d), (ws, wd)| (s + ws, d + wd))
    }

    /// Human-readable table in the shape of the published comparison.
    pub fn to_table(&self) -> String {
        let mut out = String::from("method");
        for split in self.by_split.keys() {
            out.push_str(&format!("\t{split}"));
        }
        out.push_str("\ttotal\n");
        let (total_s, total_d) = self.totals();
        out.push_str("standard");
        for (ws, _) in self.by_split.values() {
            out.push_str(&format!("\t{ws}"));
        }
        out.push_str(&format!("\t{total_s}\ndrcot"));
        for (_, wd) in self.by_split.values() {
            out.push_str(&format!("\t{wd}"));
        }
        out.push_str(&format!("\t{total_d}\n"));
        out
    }
}

/// Decode verdicts through the sealed key and count wins per mode and split.
pub fn tabulate_verdicts(
    verdicts: &BTreeMap<String, Verdict>,
    key: &[CriticalityKeyEntry],
) -> Result<CriticalitySummary, EvalError> {
    let by_pair: BTreeMap<&str, &CriticalityKeyEntry> = key
        .iter()
        .map(|entry| (entry.pair_id.as_str(), entry))
        .collect();
    let mut summary = CriticalitySummary::default();
    for entry in key {
        summary.by_split.entry(entry.split.clone()).or_default();
    }
    for (pair_id, verdict) in verdicts {
        let entry = by_pair
            .get(pair_id.as_str())
            .ok_or_else(|| EvalError::UnknownPair(pair_id.clone()))?;
        let winner = match verdict {
            Verdict::A => entry.mode_a,
            Verdict::B => entry.mode_b,
        };
        let slot = summary.by_split.entry(entry.split.clone()).or_default();
        match winner {
            PromptMode::Standard => slot.0 += 1,
            PromptMode::Drcot => slot.1 += 1,
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::{TerminatedBy, TokenTotals, Turn, TRANSCRIPT_SCHEMA_VERSION};

    fn transcript(patient_id: &str, mode: PromptMode, n_turns: u32) -> Transcript {
        let mut turns: Vec<Turn> = (1..n_turns)
            .map(|index| Turn {
                index,
                doctor_raw: format!("Question {index}?"),
                doctor_kind: DoctorKind::Question,
                extracted_question: Some(format!("Question {index}?")),
                thought: None,
                patient_answer: Some(format!("Answer {index}.")),
                probe_diagnosis_raw: None,
                doctor_prompt: None,
                patient_prompt: None,
                probe_prompt: None,
            })
            .collect();
        turns.push(Turn {
            index: n_turns,
            doctor_raw: "[inform] the diagnosis is URTI.".into(),
            doctor_kind: DoctorKind::Inform,
            extracted_question: None,
            thought: None,
            patient_answer: None,
            probe_diagnosis_raw: None,
            doctor_prompt: None,
            patient_prompt: None,
            probe_prompt: None,
        });
        Transcript {
            schema_version: TRANSCRIPT_SCHEMA_VERSION,
            patient_id: patient_id.into(),
            mode,
            opening: "Hello doctor, here is my concern.".into(),
            turns,
            final_diagnosis_raw: "[inform] the diagnosis is URTI.".into(),
            terminated_by: TerminatedBy::ModelInform,
            duration_ms: 0,
            tokens: TokenTotals::default(),
            forced_prompt: None,
            human_role: None,
        }
    }

    fn profiles(ids: &[&str]) -> BTreeMap<String, String> {
        ids.iter()
            .map(|id| (id.to_string(), format!("profile of {id}")))
            .collect()
    }

    #[test]
    fn faithfulness_packet_is_deterministic_and_sized() {
        let transcripts = vec![
            transcript("p1", PromptMode::Standard, 4),
            transcript("p2", PromptMode::Standard, 4),
        ];
        let pool = collect_qa_pairs(&transcripts, &profiles(&["p1", "p2"])).unwrap();
        assert_eq!(pool.len(), 6);
        let a = build_faithfulness_packet(&pool, 4, 11).unwrap();
        let b = build_faithfulness_packet(&pool, 4, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.items.len(), 4);
        assert!(build_faithfulness_packet(&pool, 0, 1)
            .unwrap()
            .items
            .is_empty());
        assert!(build_faithfulness_packet(&pool, 7, 1).is_err());
    }

    #[test]
    fn criticality_packet_pairs_and_blinds() {
        let group = SplitTranscripts {
            split: "ID".into(),
            count: 2,
            standard: vec![
                transcript("p1", PromptMode::Standard, 3),
                transcript("p2", PromptMode::Standard, 3),
                transcript("p3", PromptMode::Standard, 3),
            ],
            drcot: vec![
                transcript("p1", PromptMode::Drcot, 3),
                transcript("p2", PromptMode::Drcot, 3),
            ],
        };
        let packet = build_criticality_packet(&[group], 5).unwrap();
        assert_eq!(packet.pairs.len(), 2);
        assert_eq!(packet.key.len(), 2);
        assert_eq!(packet.skipped, vec!["ID: p3".to_string()]);
        let texts: Vec<&str> = packet
            .pairs
            .iter()
            .flat_map(|p| [p.dialogue_a.as_str(), p.dialogue_b.as_str()])
            .collect();
        assert!(packet_violations(&texts, &["[inform]", "standard", "drcot"]).is_empty());
    }

    #[test]
    fn zero_count_packet_is_empty() {
        let group = SplitTranscripts {
            split: "ID".into(),
            count: 0,
            standard: vec![transcript("p1", PromptMode::Standard, 2)],
            drcot: vec![transcript("p1", PromptMode::Drcot, 2)],
        };
        let packet = build_criticality_packet(&[group], 5).unwrap();
        assert!(packet.pairs.is_empty());
    }

    #[test]
    fn verdict_tabulation_matches_decode_and_count() {
        let group = SplitTranscripts {
            split: "ID".into(),
            count: 2,
            standard: vec![
                transcript("p1", PromptMode::Standard, 3),
                transcript("p2", PromptMode::Standard, 3),
            ],
            drcot: vec![
                transcript("p1", PromptMode::Drcot, 3),
                transcript("p2", PromptMode::Drcot, 3),
            ],
        };
        let packet = build_criticality_packet(&[group], 5).unwrap();
        // Assign every win to B, then decode by key.
        let text: String = packet
            .pairs
            .iter()
            .map(|p| format!("{}\tB\n", p.pair_id))
            .collect();
        let verdicts = parse_verdicts(&text).unwrap();
        let summary = tabulate_verdicts(&verdicts, &packet.key).unwrap();
        let expected_drcot = packet
            .key
            .iter()
            .filter(|e| e.mode_b == PromptMode::Drcot)
            .count();
        let (std_wins, drcot_wins) = summary.totals();
        assert_eq!(drcot_wins, expected_drcot);
        assert_eq!(std_wins + drcot_wins, 2);
    }

    #[test]
    fn verdict_parser_rejects_garbage() {
        assert!(parse_verdicts("c0001\tC").is_err());
        assert!(parse_verdicts("justonefield").is_err());
        assert!(parse_verdicts("# comment\nc0001 A").is_ok());
    }

    #[test]
    fn unknown_pair_is_reported() {
        let verdicts = parse_verdicts("c9999 A").unwrap();
        assert!(matches!(
            tabulate_verdicts(&verdicts, &[]),
            Err(EvalError::UnknownPair(_))
        ));
    }
}
