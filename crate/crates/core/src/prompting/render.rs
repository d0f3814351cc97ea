//! Byte-deterministic prompt rendering. Utterances are tagged `Doctor:` /
//! `Patient:`, one per line; segments are separated by blank lines; the
//! prompt ends with a bare role cue so the completion is the next utterance.

use std::ops::Range;

use super::drcot::{derive_drcot_instruction, rewrite_shot_drcot};
use super::{DialogueHistory, Exemplar, PromptError, PromptParts};

pub const DOCTOR_TAG: &str = "Doctor:";
pub const PATIENT_TAG: &str = "Patient:";
pub const INFORM_MARKER: &str = "[inform]";
pub const PROFILE_HEADING: &str = "Patient profile:";
const SEGMENT_SEP: &str = "\n\n";

/// Byte ranges of the I/S/(P)/D segments inside the rendered text. The
/// dialogue range excludes the trailing role cue, so the segment at turn t
/// is a prefix of the segment at turn t+1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentOffsets {
    pub instruction: Range<usize>,
    pub shots: Range<usize>,
    pub profile: Option<Range<usize>>,
    pub dialogue: Range<usize>,
}

/// A rendered prompt plus the segment map used by invariant checks and by
/// the oracle backends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub text: String,
    pub segments: SegmentOffsets,
}

impl RenderedPrompt {
    pub fn segment(&self, range: &Range<usize>) -> &str {
        &self.text[range.clone()]
    }

    pub fn dialogue_segment(&self) -> &str {
        self.segment(&self.segments.dialogue)
    }
}

fn render_exemplar(exemplar: &Exemplar, include_profile: bool) -> String {
    let mut lines = Vec::new();
    if include_profile {
        if let Some(profile) = &exemplar.profile {
            lines.push(format!("{PROFILE_HEADING}\n{profile}\n"));
        }
    }
    lines.push(format!("{PATIENT_TAG} {}", exemplar.opening));
    for turn in &exemplar.turns {
        lines.push(format!("{DOCTOR_TAG} {}", turn.q));
        lines.push(format!("{PATIENT_TAG} {}", turn.a));
    }
    lines.push(format!("{DOCTOR_TAG} {}", exemplar.closing));
    lines.join("\n")
}

/// The dialogue lines for the doctor's context: full utterances, reasoning
/// included.
fn render_dialogue_for_doctor(dialogue: &DialogueHistory) -> Result<String, PromptError> {
    if dialogue.awaits_answer() {
        return Err(PromptError::DialogueAwaitingAnswer);
    }
    let mut lines = vec![format!("{PATIENT_TAG} {}", dialogue.opening)];
    for turn in &dialogue.turns {
        lines.push(format!("{DOCTOR_TAG} {}", turn.doctor_full));
        if let Some(answer) = &turn.patient_answer {
            lines.push(format!("{PATIENT_TAG} {answer}"));
        }
    }
    Ok(lines.join("\n"))
}

/// The dialogue lines for the patient's context: bare questions only, the
/// last one unanswered.
fn render_dialogue_for_patient(dialogue: &DialogueHistory) -> Result<String, PromptError> {
    if !dialogue.awaits_answer() {
        return Err(PromptError::DialogueNotAwaitingAnswer);
    }
    let mut lines = vec![format!("{PATIENT_TAG} {}", dialogue.opening)];
    for turn in &dialogue.turns {
        lines.push(format!("{DOCTOR_TAG} {}", turn.doctor_question));
        if let Some(answer) = &turn.patient_answer {
            lines.push(format!("{PATIENT_TAG} {answer}"));
        }
    }
    Ok(lines.join("\n"))
}

struct PromptBuilder {
    text: String,
}

impl PromptBuilder {
    fn new() -> Self {
        Self {
            text: String::new(),
        }
    }

    /// Append a block preceded by the segment separator when non-initial;
    /// returns the block's byte range.
    fn push_block(&mut self, block: &str) -> Range<usize> {
        if !self.text.is_empty() {
            self.text.push_str(SEGMENT_SEP);
        }
        let start = self.text.len();
        self.text.push_str(block);
        start..self.text.len()
    }

    fn push_cue(&mut self, cue: &str) {
        self.text.push('\n');
        self.text.push_str(cue);
    }
}

/// Render the standard doctor prompt `[I][S][D]` with a trailing doctor cue
/// (carrying the `[inform]` prefix when a diagnosis is being forced).
pub fn render_standard_doctor_prompt(parts: &PromptParts) -> Result<RenderedPrompt, PromptError> {
    if parts.instruction.trim().is_empty() {
        return Err(PromptError::EmptyInstruction);
    }
    if parts.profile.is_some() {
        return Err(PromptError::ProfileNotAllowed);
    }
    for shot in &parts.shots {
        shot.validate()?;
    }
    let mut builder = PromptBuilder::new();
    let instruction = builder.push_block(&parts.instruction);
    let shots_start = builder.text.len() + SEGMENT_SEP.len();
    let mut shots = shots_start..shots_start;
    for (i, shot) in parts.shots.iter().enumerate() {
        let range = builder.push_block(&render_exemplar(shot, false));
        if i == 0 {
            shots.start = range.start;
        }
        shots.end = range.end;
    }
    if parts.shots.is_empty() {
        let at = builder.text.len();
        shots = at..at;
    }
    let dialogue = builder.push_block(&render_dialogue_for_doctor(&parts.dialogue)?);
    let cue = if parts.dialogue.pending_inform {
        format!("{DOCTOR_TAG} {INFORM_MARKER}")
    } else {
        DOCTOR_TAG.to_string()
    };
    builder.push_cue(&cue);
    Ok(RenderedPrompt {
        text: builder.text,
        segments: SegmentOffsets {
            instruction,
            shots,
            profile: None,
            dialogue,
        },
    })
}

/// Render the DR-CoT doctor prompt: the standard prompt with the augmented
/// instruction and every shot rewritten through its thoughts.
pub fn render_drcot_doctor_prompt(
    parts: &PromptParts,
    augmentation: &str,
) -> Result<RenderedPrompt, PromptError> {
    let instruction = derive_drcot_instruction(&parts.instruction, augmentation)?;
    let shots = parts
        .shots
        .iter()
        .map(rewrite_shot_drcot)
        .collect::<Result<Vec<_>, _>>()?;
    let rewritten = PromptParts {
        instruction,
        shots,
        profile: parts.profile.clone(),
        dialogue: parts.dialogue.clone(),
    };
    render_standard_doctor_prompt(&rewritten)
}

/// Render the patient-bot prompt `[I][S][P][D]` with a trailing patient cue.
/// The dialogue must end in an unanswered doctor question.
pub fn render_patient_prompt(parts: &PromptParts) -> Result<RenderedPrompt, PromptError> {
    if parts.instruction.trim().is_empty() {
        return Err(PromptError::EmptyInstruction);
    }
    let profile = parts.profile.as_ref().ok_or(PromptError::MissingProfile)?;
    for shot in &parts.shots {
        shot.validate()?;
    }
    let dialogue_block = render_dialogue_for_patient(&parts.dialogue)?;
    let mut builder = PromptBuilder::new();
    let instruction = builder.push_block(&parts.instruction);
    let shots_start = builder.text.len() + SEGMENT_SEP.len();
    let mut shots = shots_start..shots_start;
    for (i, shot) in parts.shots.iter().enumerate() {
        let range = builder.push_block(&render_exemplar(shot, true));
        if i == 0 {
            shots.start = range.start;
        }
        shots.end = range.end;
    }
    if parts.shots.is_empty() {
        let at = builder.text.len();
        shots = at..at;
    }
    let profile_range = builder.push_block(&format!("{PROFILE_HEADING}\n{profile}"));
    let dialogue = builder.push_block(&dialogue_block);
    builder.push_cue(PATIENT_TAG);
    Ok(RenderedPrompt {
        text: builder.text,
        segments: SegmentOffsets {
            instruction,
            shots,
            profile: Some(profile_range),
            dialogue,
        },
    })
}
