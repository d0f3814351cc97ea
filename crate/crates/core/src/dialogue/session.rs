//! One self-chat session: the doctor model and the patient bot alternate
//! until the doctor informs or the turn cap forces a diagnosis.

use std::time::Duration;

use super::{
    DoctorKind, PromptMode, SessionConfig, SessionError, TerminatedBy, TokenTotals, Transcript,
    Turn, TRANSCRIPT_SCHEMA_VERSION,
};
use crate::backend::{CompletionBackend, CompletionRequest, RequestKind, RequestMetadata, Role};
use crate::dataset::{build_patient_profile, kickstart_facts, Catalogs, PatientRecord};
use crate::prompting::{
    extract_question, parse_thought, render_drcot_doctor_prompt, render_patient_prompt,
    render_standard_doctor_prompt, DialogueHistory, PromptAssets, PromptParts, RenderedPrompt,
    DOCTOR_TAG, INFORM_MARKER, PATIENT_TAG,
};
use crate::text::strip_machine_tags;

/// Everything a session borrows; immutable, so sessions can run in parallel
/// over shared catalogs, assets, and backends.
#[derive(Clone, Copy)]
pub struct SessionContext<'a> {
    pub record: &'a PatientRecord,
    pub catalogs: &'a Catalogs,
    pub assets: &'a PromptAssets,
    pub doctor: &'a dyn CompletionBackend,
    pub patient: &'a dyn CompletionBackend,
}

/// Trim a completion into one utterance: cut at the first role tag the
/// model may have hallucinated, flatten newlines, collapse whitespace.
pub fn normalize_utterance(raw: &str) -> String {
    let mut text = raw.trim();
    for tag in [DOCTOR_TAG, PATIENT_TAG] {
        if let Some(pos) = text.find(tag) {
            if pos > 0 {
                text = text[..pos].trim();
            }
        }
    }
    crate::text::collapse_whitespace(&text.replace('\n', " "))
}

/// Classify a doctor utterance: `[inform]`-prefixed utterances end the
/// session; anything else is treated as a question whose bare text is the
/// clause after the reasoning marker, when present.
pub fn classify_doctor_utterance(text: &str) -> (DoctorKind, Option<String>) {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return (DoctorKind::Malformed, None);
    }
    if trimmed.starts_with(INFORM_MARKER) {
        (DoctorKind::Inform, None)
    } else {
        (
            DoctorKind::Question,
            Some(extract_question(trimmed).to_string()),
        )
    }
}

/// Render the doctor prompt for the given mode over the current history.
pub fn build_doctor_prompt(
    assets: &PromptAssets,
    mode: PromptMode,
    dialogue: &DialogueHistory,
) -> Result<RenderedPrompt, SessionError> {
    let parts = PromptParts {
        instruction: assets.standard_instruction.clone(),
        shots: assets.doctor_shots.clone(),
        profile: None,
        dialogue: dialogue.clone(),
    };
    let rendered = match mode {
        PromptMode::Standard => render_standard_doctor_prompt(&parts)?,
        PromptMode::Drcot => render_drcot_doctor_prompt(&parts, &assets.drcot_augmentation)?,
    };
    Ok(rendered)
}

/// Render the patient-bot prompt over the current history, which must end
/// in an unanswered doctor question.
pub fn build_patient_prompt(
    assets: &PromptAssets,
    profile: &str,
    dialogue: &DialogueHistory,
) -> Result<RenderedPrompt, SessionError> {
    let parts = PromptParts {
        instruction: assets.patient_instruction.clone(),
        shots: vec![assets.patient_shot.clone()],
        profile: Some(profile.to_string()),
        dialogue: dialogue.clone(),
    };
    Ok(render_patient_prompt(&parts)?)
}

struct SessionRun<'a> {
    ctx: SessionContext<'a>,
    config: &'a SessionConfig,
    tokens: TokenTotals,
    latency: Duration,
}

impl<'a> SessionRun<'a> {
    fn metadata(&self, role: Role, turn: u32, kind: RequestKind) -> RequestMetadata {
        RequestMetadata {
            session_id: self.ctx.record.id.clone(),
            role,
            turn,
            kind,
        }
    }

    fn doctor_request(&self, prompt: &str, turn: u32, kind: RequestKind) -> CompletionRequest {
        CompletionRequest::new(prompt, self.metadata(Role::Doctor, turn, kind))
            .with_stop(vec![format!("\n{PATIENT_TAG}")])
    }

    fn patient_request(&self, prompt: &str, turn: u32) -> CompletionRequest {
        CompletionRequest::new(
            prompt,
            self.metadata(Role::Patient, turn, RequestKind::Live),
        )
        .with_stop(vec![format!("\n{DOCTOR_TAG}")])
    }

    fn complete(
        &mut self,
        backend: &dyn CompletionBackend,
        request: &CompletionRequest,
    ) -> Result<String, crate::backend::BackendError> {
        let response = backend.complete(request)?;
        self.tokens.add(&response.token_usage);
        self.latency += Duration::from_millis(response.latency_ms);
        Ok(normalize_utterance(&response.text))
    }

    /// Issue a forced-diagnosis completion over the given history state and
    /// assemble the full `[inform]`-prefixed utterance.
    fn forced_inform(
        &mut self,
        dialogue: &DialogueHistory,
        turn: u32,
        kind: RequestKind,
    ) -> Result<(String, Option<String>), crate::backend::BackendError> {
        let forced = dialogue.with_pending_inform();
        let rendered = build_doctor_prompt(self.ctx.assets, self.config.mode, &forced)
            .map_err(|e| crate::backend::BackendError::BadResponse(e.to_string()))?;
        let request = self.doctor_request(&rendered.text, turn, kind);
        let completion = self.complete(self.ctx.doctor, &request)?;
        let assembled = if completion.starts_with(INFORM_MARKER) {
            completion
        } else {
            format!("{INFORM_MARKER} {completion}")
        };
        let prompt = self.config.save_prompts.then_some(rendered.text);
        Ok((assembled, prompt))
    }

    /// Re-run the dialogue prefix from scratch and force a diagnosis at
    /// turn `t`: the probe strategy used when `independent_runs` is set.
    fn independent_probe(&mut self, t: u32) -> Option<String> {
        let opening = kickstart_facts(
            self.ctx.record,
            self.ctx.catalogs,
            &self.ctx.assets.profile_template,
        )
        .ok()?;
        let profile = build_patient_profile(
            self.ctx.record,
            self.ctx.catalogs,
            &self.ctx.assets.profile_template,
        )
        .ok()?;
        let mut dialogue = DialogueHistory::new(opening);
        for turn in 1..t {
            let rendered =
                build_doctor_prompt(self.ctx.assets, self.config.mode, &dialogue).ok()?;
            let request = self.doctor_request(&rendered.text, turn, RequestKind::Live);
            let utterance = self.complete(self.ctx.doctor, &request).ok()?;
            let (kind, question) = classify_doctor_utterance(&utterance);
            match kind {
                DoctorKind::Inform => return Some(utterance),
                DoctorKind::Malformed => return None,
                DoctorKind::Question => {
                    dialogue.push_question(utterance.clone(), question.unwrap_or(utterance));
                    let rendered =
                        build_patient_prompt(self.ctx.assets, &profile, &dialogue).ok()?;
                    let request = self.patient_request(&rendered.text, turn);
                    let answer = self.complete(self.ctx.patient, &request).ok()?;
                    dialogue.record_answer(answer);
                }
            }
        }
        self.forced_inform(&dialogue, t, RequestKind::Probe)
            .ok()
            .map(|(text, _)| text)
    }
}

/// Run one full self-chat session and return its transcript.
///
/// Per turn: render the doctor prompt, complete, classify. Questions are
/// optionally probed (a forked forced-diagnosis completion that never joins
/// the live history), then answered by the patient bot. If the cap elapses
/// with no inform, a single forced completion yields the final diagnosis.
pub fn run_session(
    ctx: SessionContext<'_>,
    config: &SessionConfig,
) -> Result<Transcript, SessionError> {
    config.check()?;
    let opening = kickstart_facts(ctx.record, ctx.catalogs, &ctx.assets.profile_template)?;
    let profile = build_patient_profile(ctx.record, ctx.catalogs, &ctx.assets.profile_template)?;
    let mut run = SessionRun {
        ctx,
        config,
        tokens: TokenTotals::default(),
        latency: Duration::ZERO,
    };
    let mut dialogue = DialogueHistory::new(opening.clone());
    let mut turns: Vec<Turn> = Vec::new();
    let mut final_diagnosis: Option<(String, TerminatedBy)> = None;

    let backend_err = |turn: u32,
                       role: Role,
                       source: crate::backend::BackendError,
                       turns: &[Turn],
                       opening: &str,
                       run: &SessionRun| {
        SessionError::Backend {
            turn,
            role,
            source,
            partial: Box::new((!turns.is_empty()).then(|| Transcript {
                schema_version: TRANSCRIPT_SCHEMA_VERSION,
                patient_id: run.ctx.record.id.clone(),
                mode: run.config.mode,
                opening: opening.to_string(),
                turns: turns.to_vec(),
                final_diagnosis_raw: String::new(),
                terminated_by: TerminatedBy::AbortedMalformed,
                duration_ms: run.latency.as_millis() as u64,
                tokens: run.tokens,
                forced_prompt: None,
                human_role: None,
            })),
        }
    };

    for t in 1..=config.t_max {
        let rendered = build_doctor_prompt(ctx.assets, config.mode, &dialogue)?;
        let request = run.doctor_request(&rendered.text, t, RequestKind::Live);
        let utterance = match run.complete(ctx.doctor, &request) {
            Ok(text) => text,
            Err(source) => {
                return Err(backend_err(t, Role::Doctor, source, &turns, &opening, &run))
            }
        };
        let doctor_prompt = config.save_prompts.then(|| rendered.text.clone());
        let (kind, question) = classify_doctor_utterance(&utterance);
        match kind {
            DoctorKind::Inform => {
                turns.push(Turn {
                    index: t,
                    doctor_raw: strip_machine_tags(&utterance),
                    doctor_kind: DoctorKind::Inform,
                    extracted_question: None,
                    thought: None,
                    patient_answer: None,
                    probe_diagnosis_raw: None,
                    doctor_prompt,
                    patient_prompt: None,
                    probe_prompt: None,
                });
                final_diagnosis = Some((strip_machine_tags(&utterance), TerminatedBy::ModelInform));
                break;
            }
            DoctorKind::Malformed => {
                turns.push(Turn {
                    index: t,
                    doctor_raw: utterance.clone(),
                    doctor_kind: DoctorKind::Malformed,
                    extracted_question: None,
                    thought: None,
                    patient_answer: None,
                    probe_diagnosis_raw: None,
                    doctor_prompt,
                    patient_prompt: None,
                    probe_prompt: None,
                });
                final_diagnosis = Some(("unparsed".into(), TerminatedBy::AbortedMalformed));
                break;
            }
            DoctorKind::Question => {
                let question = question.expect("question turns carry a question");
                // Probe: fork the same history with the inform prefix; a
                // probe failure leaves a hole instead of ending the session.
                let (probe_raw, probe_prompt) =
                    if config.probe_every_turn && !config.independent_runs {
                        match run.forced_inform(&dialogue, t, RequestKind::Probe) {
                            Ok((text, prompt)) => (Some(text), prompt),
                            Err(_) => (None, None),
                        }
                    } else {
                        (None, None)
                    };
                dialogue.push_question(utterance.clone(), question.clone());
                let rendered = build_patient_prompt(ctx.assets, &profile, &dialogue)?;
                let request = run.patient_request(&rendered.text, t);
                let answer = match run.complete(ctx.patient, &request) {
                    Ok(text) => text,
                    Err(source) => {
                        return Err(backend_err(
                            t,
                            Role::Patient,
                            source,
                            &turns,
                            &opening,
                            &run,
                        ))
                    }
                };
                dialogue.record_answer(answer.clone());
                turns.push(Turn {
                    index: t,
                    doctor_raw: strip_machine_tags(&utterance),
                    doctor_kind: DoctorKind::Question,
                    extracted_question: Some(strip_machine_tags(&question)),
                    thought: parse_thought(&utterance),
                    patient_answer: Some(answer),
                    probe_diagnosis_raw: probe_raw.as_deref().map(strip_machine_tags),
                    doctor_prompt,
                    patient_prompt: config.save_prompts.then_some(rendered.text),
                    probe_prompt,
                });
            }
        }
    }

    let mut forced_prompt = None;
    let (final_diagnosis_raw, terminated_by) = match final_diagnosis {
        Some(done) => done,
        None => {
            // The cap elapsed with questions only: force the diagnosis.
            let (assembled, prompt) = run
                .forced_inform(&dialogue, config.t_max + 1, RequestKind::Forced)
                .map_err(|source| {
                    backend_err(config.t_max, Role::Doctor, source, &turns, &opening, &run)
                })?;
            forced_prompt = prompt;
            (strip_machine_tags(&assembled), TerminatedBy::ForcedAtTmax)
        }
    };

    if config.probe_every_turn && config.independent_runs {
        let question_turns: Vec<u32> = turns
            .iter()
            .filter(|t| t.doctor_kind == DoctorKind::Question)
            .map(|t| t.index)
            .collect();
        for t in question_turns {
            let probe = run.independent_probe(t);
            if let Some(turn) = turns.iter_mut().find(|turn| turn.index == t) {
                turn.probe_diagnosis_raw = probe.as_deref().map(strip_machine_tags);
            }
        }
    }

    let transcript = Transcript {
        schema_version: TRANSCRIPT_SCHEMA_VERSION,
        patient_id: ctx.record.id.clone(),
        mode: config.mode,
        opening,
        turns,
        final_diagnosis_raw,
        terminated_by,
        duration_ms: run.latency.as_millis() as u64,
        tokens: run.tokens,
        forced_prompt,
        human_role: None,
    };
    transcript.validate(config.t_max)?;
    Ok(transcript)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classifies_inform_prefix() {
        let (kind, q) =
            classify_doctor_utterance("[inform] Based on the symptoms, the diagnosis is URTI.");
        assert_eq!(kind, DoctorKind::Inform);
        assert!(q.is_none());
    }

    #[test]
    fn classifies_plain_question() {
        let (kind, q) = classify_doctor_utterance("Do you have a fever?");
        assert_eq!(kind, DoctorKind::Question);
        assert_eq!(q.as_deref(), Some("Do you have a fever?"));
    }

    #[test]
    fn classifies_reasoning_question_by_marker() {
        let text = "Based on the evidence a cough, the ranked differential diagnosis is 1. URTI. To narrow down the differential diagnosis, the next question to ask is Do you smoke?";
        let (kind, q) = classify_doctor_utterance(text);
        assert_eq!(kind, DoctorKind::Question);
        assert_eq!(q.as_deref(), Some("Do you smoke?"));
    }

    #[test]
    fn empty_text_is_malformed() {
        let (kind, _) = classify_doctor_utterance("   ");
        assert_eq!(kind, DoctorKind::Malformed);
    }

    #[test]
    fn normalization_truncates_hallucinated_turns() {
        let raw = " Do you smoke?\nPatient: yes\nDoctor: ok";
        assert_eq!(normalize_utterance(raw), "Do you smoke?");
    }

    #[test]
    fn normalization_flattens_newlines() {
        assert_eq!(normalize_utterance("a\nb\n\nc"), "a b c");
    }
}
