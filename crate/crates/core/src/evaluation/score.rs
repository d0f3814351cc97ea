//! Per-turn scoring and aggregation. The accuracy at turn t is the fraction
//! of sessions whose (probed or established) diagnosis at t matches the
//! ground-truth pathology.

use serde::{Deserialize, Serialize};

use super::matcher::{extract_diagnosis, MatchPolicy};
use super::{DiagnosisMatch, EvalError, RunMetrics};
use crate::dataset::ConditionCatalog;
use crate::dialogue::{PromptMode, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnScore {
    Correct,
    Incorrect,
    /// No probe was available for this turn; excluded from the denominator.
    Missing,
}

/// One scored session: the per-turn correctness vector (length t_max) and
/// the final-diagnosis outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionScore {
    pub patient_id: String,
    pub mode: PromptMode,
    pub per_turn: Vec<TurnScore>,
    pub final_correct: bool,
    pub final_match: DiagnosisMatch,
}

impl SessionScore {
    pub fn unparsed_final(&self) -> bool {
        self.final_match.matched.is_none()
    }
}

/// Score one session. Turns before the inform turn are judged from their
/// probes; the inform turn and everything after reuse the established final
/// diagnosis. Missing probes leave holes rather than guesses.
pub fn score_session(
    transcript: &Transcript,
    pathology: &str,
    conditions: &ConditionCatalog,
    t_max: u32,
    policy: MatchPolicy,
) -> SessionScore {
    let final_match = extract_diagnosis(&transcript.final_diagnosis_raw, conditions, policy)
        .with_truth(pathology);
    let final_correct = final_match.correct;
    let inform_turn = transcript.inform_turn(t_max);

    let mut per_turn = Vec::with_capacity(t_max as usize);
    for t in 1..=t_max {
        if t < inform_turn {
            let probe = transcript
                .turns
                .iter()
                .find(|turn| turn.index == t)
                .and_then(|turn| turn.probe_diagnosis_raw.as_deref());
            per_turn.push(match probe {
                Some(raw) => {
                    let m = extract_diagnosis(raw, conditions, policy).with_truth(pathology);
                    if m.correct {
                        TurnScore::Correct
                    } else {
                        TurnScore::Incorrect
                    }
                }
                None => TurnScore::Missing,
            });
        } else if final_correct {
            per_turn.push(TurnScore::Correct);
        } else {
            per_turn.push(TurnScore::Incorrect);
        }
    }
    SessionScore {
        patient_id: transcript.patient_id.clone(),
        mode: transcript.mode,
        per_turn,
        final_correct,
        final_match,
    }
}

/// Aggregate scored sessions of one split and mode into the accuracy curve.
pub fn aggregate(
    scores: &[SessionScore],
    split: &str,
    mode: PromptMode,
    t_max: u32,
) -> Result<RunMetrics, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::NoSessions);
    }
    let t_max = t_max as usize;
    let mut correct = vec![0usize; t_max];
    let mut valid = vec![0usize; t_max];
    for score in scores {
        for (t, entry) in score.per_turn.iter().enumerate().take(t_max) {
            match entry {
                TurnScore::Correct => {
                    correct[t] += 1;
                    valid[t] += 1;
                }
                TurnScore::Incorrect => valid[t] += 1,
                TurnScore::Missing => {}
            }
        }
    }
    let per_turn_accuracy = correct
        .iter()
        .zip(&valid)
        .map(|(c, v)| if *v == 0 { 0.0 } else { *c as f64 / *v as f64 })
        .collect();
    let final_correct = scores.iter().filter(|s| s.final_correct).count();
    Ok(RunMetrics {
        split: split.to_string(),
        mode,
        n: scores.len(),
        per_turn_accuracy,
        per_turn_valid: valid,
        final_accuracy: final_correct as f64 / scores.len() as f64,
        unparsed_count: scores.iter().filter(|s| s.unparsed_final()).count(),
    })
}

/// Plot-ready per-turn comparison of the two prompting modes on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub split: String,
    /// Rows (turn, standard accuracy, drcot accuracy, delta).
    pub rows: Vec<(u32, f64, f64, f64)>,
    pub final_standard: f64,
    pub final_drcot: f64,
    pub final_delta: f64,
}

impl ComparisonTable {
    /// Tab-separated table, one row per turn, with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("turn\tstandard\tdrcot\tdelta\n");
        for (turn, std, drcot, delta) in &self.rows {
            out.push_str(&format!("{turn}\t{std:.4}\t{drcot:.4}\t{delta:+.4}\n"));
        }
        out.push_str(&format!(
            "final\t{:.4}\t{:.4}\t{:+.4}\n",
            self.final_standard, self.final_drcot, self.final_delta
        ));
        out
    }
}

/// Per-turn and final deltas (drcot − standard) for matching splits.
pub fn compare_modes(
    standard: &RunMetrics,
    drcot: &RunMetrics,
) -> Result<ComparisonTable, EvalError> {
    if standard.split != drcot.split {
        return Err(EvalError::SplitMismatch {
            left: standard.split.clone(),
            right: drcot.split.clone(),
        });
    }
    let turns = standard
        .per_turn_accuracy
        .len()
        .max(drcot.per_turn_accuracy.len());
    let at = |v: &[f64], t: usize| v.get(t).copied().unwrap_or(0.0);
    let rows = (0..turns)
        .map(|t| {
            let s = at(&standard.per_turn_accuracy, t);
            let d = at(&drcot.per_turn_accuracy, t);
            (t as u32 + 1, s, d, d - s)
        })
        .collect();
    Ok(ComparisonTable {
        split: standard.split.clone(),
        rows,
        final_standard: standard.final_accuracy,
        final_drcot: drcot.final_accuracy,
        final_delta: drcot.final_accuracy - standard.final_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::{DoctorKind, TerminatedBy, TokenTotals, Turn, TRANSCRIPT_SCHEMA_VERSION};

    fn catalog() -> ConditionCatalog {
        let mut catalog = ConditionCatalog::new();
        for name in ["URTI", "Bronchitis", "Pneumonia"] {
            catalog.insert(name).unwrap();
        }
        catalog
    }

    fn question_turn(index: u32, probe: Option<&str>) -> Turn {
        Turn {
            index,
            doctor_raw: format!("Question {index}?"),
            doctor_kind: DoctorKind::Question,
            extracted_question: Some(format!("Question {index}?")),
            thought: None,
            patient_answer: Some("Yes.".into()),
            probe_diagnosis_raw: probe.map(|p| format!("[inform] the diagnosis is {p}.")),
            doctor_prompt: None,
            patient_prompt: None,
            probe_prompt: None,
        }
    }

    fn inform_turn(index: u32, diagnosis: &str) -> Turn {
        Turn {
            index,
            doctor_raw: format!("[inform] the diagnosis is {diagnosis}."),
            doctor_kind: DoctorKind::Inform,
            extracted_question: None,
            thought: None,
            patient_answer: None,
            probe_diagnosis_raw: None,
            doctor_prompt: None,
            patient_prompt: None,
            probe_prompt: None,
        }
    }

    fn transcript(turns: Vec<Turn>, final_raw: &str, terminated_by: TerminatedBy) -> Transcript {
        Transcript {
            schema_version: TRANSCRIPT_SCHEMA_VERSION,
            patient_id: "p1".into(),
            mode: PromptMode::Standard,
            opening: "Hello.".into(),
            turns,
            final_diagnosis_raw: final_raw.into(),
            terminated_by,
            duration_ms: 0,
            tokens: TokenTotals::default(),
            forced_prompt: None,
            human_role: None,
        }
    }

    #[test]
    fn inform_at_three_with_failing_probes() {
        let t = transcript(
            vec![
                question_turn(1, Some("Pneumonia")),
                question_turn(2, Some("Pneumonia")),
                inform_turn(3, "Bronchitis"),
            ],
            "[inform] the diagnosis is Bronchitis.",
            TerminatedBy::ModelInform,
        );
        let score = score_session(&t, "Bronchitis", &catalog(), 8, MatchPolicy::default());
        assert!(score.final_correct);
        let expected: Vec<TurnScore> = [
            TurnScore::Incorrect,
            TurnScore::Incorrect,
            TurnScore::Correct,
            TurnScore::Correct,
            TurnScore::Correct,
            TurnScore::Correct,
            TurnScore::Correct,
            TurnScore::Correct,
        ]
        .into();
        assert_eq!(score.per_turn, expected);
    }

    #[test]
    fn forced_session_scores_final_only_at_cap() {
        let turns = (1..=4)
            .map(|i| question_turn(i, Some("Pneumonia")))
            .collect();
        let t = transcript(
            turns,
            "[inform] the diagnosis is URTI.",
            TerminatedBy::ForcedAtTmax,
        );
        let score = score_session(&t, "URTI", &catalog(), 4, MatchPolicy::default());
        assert_eq!(
            score.per_turn,
            vec![
                TurnScore::Incorrect,
                TurnScore::Incorrect,
                TurnScore::Incorrect,
                TurnScore::Correct
            ]
        );
    }

    #[test]
    fn missing_probe_leaves_hole() {
        let t = transcript(
            vec![question_turn(1, None), inform_turn(2, "URTI")],
            "[inform] the diagnosis is URTI.",
            TerminatedBy::ModelInform,
        );
        let score = score_session(&t, "URTI", &catalog(), 3, MatchPolicy::default());
        assert_eq!(
            score.per_turn,
            vec![TurnScore::Missing, TurnScore::Correct, TurnScore::Correct]
        );
        let metrics = aggregate(&[score], "ID", PromptMode::Standard, 3).unwrap();
        assert_eq!(metrics.per_turn_valid, vec![0, 1, 1]);
    }

    #[test]
    fn unparsed_final_counts_as_incorrect() {
        let t = transcript(
            vec![inform_turn(1, "nothing I recognize")],
            "[inform] I cannot tell.",
            TerminatedBy::ModelInform,
        );
        let score = score_session(&t, "URTI", &catalog(), 2, MatchPolicy::default());
        assert!(!score.final_correct);
        assert!(score.unparsed_final());
        let metrics = aggregate(&[score], "ID", PromptMode::Standard, 2).unwrap();
        assert_eq!(metrics.unparsed_count, 1);
        assert_eq!(metrics.final_accuracy, 0.0);
    }

    #[test]
    fn aggregate_refuses_empty_input() {
        assert!(matches!(
            aggregate(&[], "ID", PromptMode::Standard, 8),
            Err(EvalError::NoSessions)
        ));
    }

    #[test]
    fn aggregate_is_weighted_mean_over_disjoint_union() {
        let a: Vec<SessionScore> = (0..3)
            .map(|i| {
                let t = transcript(
                    vec![inform_turn(1, if i == 0 { "URTI" } else { "Bronchitis" })],
                    &format!(
                        "[inform] the diagnosis is {}.",
                        if i == 0 { "URTI" } else { "Bronchitis" }
                    ),
                    TerminatedBy::ModelInform,
                );
                score_session(&t, "URTI", &catalog(), 2, MatchPolicy::default())
            })
            .collect();
        let b: Vec<SessionScore> = (0..2)
            .map(|_| {
                let t = transcript(
                    vec![inform_turn(1, "URTI")],
                    "[inform] the diagnosis is URTI.",
                    TerminatedBy::ModelInform,
                );
                score_session(&t, "URTI", &catalog(), 2, MatchPolicy::default())
            })
            .collect();
        let all: Vec<SessionScore> = a.iter().chain(&b).cloned().collect();
        let ma = aggregate(&a, "ID", PromptMode::Standard, 2).unwrap();
        let mb = aggregate(&b, "ID", PromptMode::Standard, 2).unwrap();
        let mall = aggregate(&all, "ID", PromptMode::Standard, 2).unwrap();
        let expected = (ma.final_accuracy * 3.0 + mb.final_accuracy * 2.0) / 5.0;
        assert!((mall.final_accuracy - expected).abs() < 1e-12);
    }

    #[test]
    fn comparison_requires_matching_split() {
        let metrics = |split: &str, acc: f64| RunMetrics {
            split: split.into(),
            mode: PromptMode::Standard,
            n: 1,
            per_turn_accuracy: vec![acc],
            per_turn_valid: vec![1],
            final_accuracy: acc,
            unparsed_count: 0,
        };
        assert!(compare_modes(&metrics("ID", 0.5), &metrics("OD1", 0.6)).is_err());
        let table = compare_modes(&metrics("ID", 0.5), &metrics("ID", 0.65)).unwrap();
        assert!((table.final_delta - 0.15).abs() < 1e-12);
        assert_eq!(table.rows.len(), 1);
    }

    #[test]
    fn identical_metrics_give_zero_deltas() {
        let metrics = RunMetrics {
            split: "ID".into(),
            mode: PromptMode::Standard,
            n: 2,
            per_turn_accuracy: vec![0.25, 0.5],
            per_turn_valid: vec![2, 2],
            final_accuracy: 0.5,
            unparsed_count: 0,
        };
        let table = compare_modes(&metrics, &metrics).unwrap();
        assert!(table.rows.iter().all(|(_, _, _, d)| *d == 0.0));
        assert_eq!(table.final_delta, 0.0);
    }
}
