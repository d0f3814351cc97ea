//! The DR-CoT transformations: instruction augmentation, shot rewriting,
//! and the marker-based parsing that recovers the question from a
//! reasoning-bearing completion.

use super::{DrCotThought, Exemplar, PromptError};

/// Opens the rewrite sentence; the evidence summary follows.
pub const EVIDENCE_PREFIX: &str = "Based on the evidence ";
/// Separates the evidence summary from the ranked differential.
pub const DDX_MARKER: &str = ", the ranked differential diagnosis is ";
/// Introduces the question clause; everything after it is the question.
pub const QUESTION_MARKER: &str = "the next question to ask is ";
const NARROWING: &str = ". To narrow down the differential diagnosis, ";

/// Append the reasoning augmentation to the standard instruction. Applying
/// it twice is an error so modes cannot be stacked by accident.
pub fn derive_drcot_instruction(
    base_instruction: &str,
    augmentation: &str,
) -> Result<String, PromptError> {
    if base_instruction.trim().is_empty() {
        return Err(PromptError::EmptyInstruction);
    }
    if base_instruction.contains(augmentation.trim()) {
        return Err(PromptError::AlreadyAugmented);
    }
    Ok(format!(
        "{} {}",
        base_instruction.trim_end(),
        augmentation.trim()
    ))
}

/// Render a ranked differential as `1. X, 2. Y, 3. Z`.
pub fn render_ranked_ddx(ddx: &[String]) -> String {
    ddx.iter()
        .enumerate()
        .map(|(i, name)| format!("{}. {}", i + 1, name))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Render one rewrite sentence. The question keeps its own terminal
/// punctuation so extraction can recover it verbatim.
pub fn render_thought_sentence(thought: &DrCotThought) -> String {
    format!(
        "{}{}{}{}{}{}{}",
        EVIDENCE_PREFIX,
        thought.evidence_summary,
        DDX_MARKER,
        render_ranked_ddx(&thought.ranked_ddx),
        NARROWING,
        QUESTION_MARKER,
        thought.next_question
    )
}

/// Rewrite a shot for the reasoning mode: `q_1` is untouched; each `q_i`
/// for i in 2..T is replaced by its rewrite sentence. Answers and the
/// closing diagnosis are untouched.
pub fn rewrite_shot_drcot(exemplar: &Exemplar) -> Result<Exemplar, PromptError> {
    exemplar.validate()?;
    let thoughts = exemplar.thoughts.as_ref().ok_or_else(|| {
        PromptError::MisalignedThoughts("exemplar has no thoughts to rewrite with".into())
    })?;
    let mut rewritten = exemplar.clone();
    for (k, thought) in thoughts.iter().enumerate() {
        rewritten.turns[k + 1].q = render_thought_sentence(thought);
    }
    rewritten.thoughts = None;
    Ok(rewritten)
}

/// Recover the bare question from a reasoning-bearing utterance: the text
/// after the question marker when present, otherwise the whole utterance.
pub fn extract_question(text: &str) -> &str {
    match text.find(QUESTION_MARKER) {
        Some(pos) => text[pos + QUESTION_MARKER.len()..].trim(),
        None => text.trim(),
    }
}

/// Best-effort structured parse of a reasoning-bearing completion. Returns
/// `None` when the utterance carries no question marker.
pub fn parse_thought(text: &str) -> Option<DrCotThought> {
    let q_pos = text.find(QUESTION_MARKER)?;
    let next_question = text[q_pos + QUESTION_MARKER.len()..].trim().to_string();
    let evidence_summary = text
        .find(EVIDENCE_PREFIX)
        .and_then(|e_pos| {
            let after = &text[e_pos + EVIDENCE_PREFIX.len()..];
            after.find(DDX_MARKER).map(|d| after[..d].to_string())
        })
        .unwrap_or_default();
    let ranked_ddx = text
        .find(DDX_MARKER)
        .map(|d_pos| {
            let after = &text[d_pos + DDX_MARKER.len()..];
            let list = after.split(". To narrow down").next().unwrap_or(after);
            parse_ranked_list(list)
        })
        .unwrap_or_default();
    Some(DrCotThought {
        evidence_summary,
        ranked_ddx,
        next_question,
    })
}

/// Parse `1. X, 2. Y, 3. Z` back into names.
fn parse_ranked_list(list: &str) -> Vec<String> {
    list.split(", ")
        .filter_map(|part| {
            let part = part.trim();
            let (rank, name) = part.split_once(". ")?;
            rank.trim().parse::<usize>().ok()?;
            Some(name.trim().to_string())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompting::ExemplarTurn;

    fn exemplar_with_thoughts() -> Exemplar {
        Exemplar {
            profile: None,
            opening: "Hello doctor.".into(),
            turns: vec![
                ExemplarTurn {
                    q: "Do you have a fever?".into(),
                    a: "Yes.".into(),
                },
                ExemplarTurn {
                    q: "Do you smoke?".into(),
                    a: "No.".into(),
                },
                ExemplarTurn {
                    q: "Do you have chills?".into(),
                    a: "Yes.".into(),
                },
            ],
            closing: "[inform] The diagnosis is URTI.".into(),
            thoughts: Some(vec![
                DrCotThought {
                    evidence_summary: "a cough and a fever".into(),
                    ranked_ddx: vec!["URTI".into(), "Bronchitis".into()],
                    next_question: "Do you smoke?".into(),
                },
                DrCotThought {
                    evidence_summary: "a cough, a fever, and no smoking".into(),
                    ranked_ddx: vec!["URTI".into()],
                    next_question: "Do you have chills?".into(),
                },
            ]),
        }
    }

    #[test]
    fn augmentation_appends_once() {
        let derived = derive_drcot_instruction("Base instruction.", "Reason first.").unwrap();
        assert_eq!(derived, "Base instruction. Reason first.");
        assert!(matches!(
            derive_drcot_instruction(&derived, "Reason first."),
            Err(PromptError::AlreadyAugmented)
        ));
    }

    #[test]
    fn empty_base_instruction_rejected() {
        assert!(matches!(
            derive_drcot_instruction("  ", "x"),
            Err(PromptError::EmptyInstruction)
        ));
    }

    #[test]
    fn rewrite_leaves_first_question_untouched() {
        let rewritten = rewrite_shot_drcot(&exemplar_with_thoughts()).unwrap();
        assert_eq!(rewritten.turns[0].q, "Do you have a fever?");
        assert!(rewritten.turns[1].q.starts_with(EVIDENCE_PREFIX));
        assert!(rewritten.turns[1].q.ends_with("Do you smoke?"));
        assert!(rewritten.turns[2].q.ends_with("Do you have chills?"));
        // Answers and closing are untouched.
        assert_eq!(rewritten.turns[1].a, "No.");
        assert_eq!(rewritten.closing, "[inform] The diagnosis is URTI.");
    }

    #[test]
    fn single_turn_exemplar_is_unchanged() {
        let mut ex = exemplar_with_thoughts();
        ex.turns.truncate(1);
        ex.thoughts = Some(vec![]);
        let rewritten = rewrite_shot_drcot(&ex).unwrap();
        assert_eq!(rewritten.turns, ex.turns);
    }

    #[test]
    fn extraction_round_trips_rewritten_questions() {
        let ex = exemplar_with_thoughts();
        let rewritten = rewrite_shot_drcot(&ex).unwrap();
        for (original, rewritten) in ex.turns.iter().zip(&rewritten.turns).skip(1) {
            assert_eq!(extract_question(&rewritten.q), original.q);
        }
    }

    #[test]
    fn extraction_passes_plain_questions_through() {
        assert_eq!(extract_question("Do you smoke?"), "Do you smoke?");
    }

    #[test]
    fn ranked_ddx_renders_numbered() {
        let ddx = vec![
            "URTI".to_string(),
            "Bronchitis".to_string(),
            "Pneumonia".to_string(),
        ];
        assert_eq!(
            render_ranked_ddx(&ddx),
            "1. URTI, 2. Bronchitis, 3. Pneumonia"
        );
    }

    #[test]
    fn thought_parse_recovers_structure() {
        let thought = DrCotThought {
            evidence_summary: "a cough and a fever".into(),
            ranked_ddx: vec!["URTI".into(), "Bronchitis".into()],
            next_question: "Do you smoke?".into(),
        };
        let sentence = render_thought_sentence(&thought);
        let parsed = parse_thought(&sentence).unwrap();
        assert_eq!(parsed, thought);
    }

    #[test]
    fn plain_question_has_no_thought() {
        assert!(parse_thought("Do you smoke?").is_none());
    }
}
