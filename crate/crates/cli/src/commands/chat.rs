//! `dxchat chat` — interactive terminal session: the human plays one side,
//! a backend bot plays the other. Transcripts use the batch schema with the
//! human role flagged, so they score like any other session.

use std::io::{BufRead, Write};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};

use dxchat::backend::{CompletionBackend, CompletionRequest, RequestKind, RequestMetadata, Role};
use dxchat::dataset::{build_patient_profile, kickstart_facts, Catalogs, PatientRecord};
use dxchat::dialogue::{
    build_doctor_prompt, build_patient_prompt, classify_doctor_utterance, normalize_utterance,
    write_transcripts, DoctorKind, PromptMode, TerminatedBy, TokenTotals, Transcript, Turn,
    DEFAULT_T_MAX, TRANSCRIPT_SCHEMA_VERSION,
};
use dxchat::evaluation::{extract_diagnosis, MatchPolicy};
use dxchat::prompting::{DialogueHistory, PromptAssets, INFORM_MARKER};

use crate::backends::{build_pair, oracle_policy, BackendSpec};
use crate::config::{resolve, FileConfig};
use crate::data::{self, DataSource, DEFAULT_PATIENTS_FILE};
use crate::ChatArgs;

pub fn run(args: ChatArgs, file_config: &FileConfig) -> anyhow::Result<ExitCode> {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    run_with_io(args, file_config, &mut stdin.lock(), &mut stdout.lock())
}

struct ChatSetup {
    record: PatientRecord,
    catalogs: Arc<Catalogs>,
    assets: PromptAssets,
    mode: PromptMode,
    t_max: u32,
    bot: Box<dyn CompletionBackend>,
    bot_role: Role,
}

fn setup(args: &ChatArgs, file_config: &FileConfig) -> anyhow::Result<(ChatSetup, Role)> {
    let human_role = match args.role.as_str() {
        "doctor" => Role::Doctor,
        "patient" => Role::Patient,
        other => bail!("unknown role {other:?}; expected doctor or patient"),
    };
    let Some(mode) = PromptMode::parse(&args.mode) else {
        bail!("unknown mode {:?}", args.mode);
    };
    let seed = resolve(args.seed, file_config.seed, 0);
    let t_max = resolve(args.t_max, file_config.t_max, DEFAULT_T_MAX);

    let source = match args.dataset_dir.clone().or(file_config.dataset_dir.clone()) {
        Some(dir) => DataSource::Dataset {
            dir,
            patients_file: resolve(
                args.patients_file.clone(),
                file_config.patients_file.clone(),
                DEFAULT_PATIENTS_FILE.to_string(),
            ),
        },
        None => DataSource::Synthetic {
            ie_code: args.ie.clone(),
            pool: 8,
            seed,
        },
    };
    let data = data::resolve(&source)?;
    let record = match &args.patient_id {
        Some(id) => data
            .records
            .iter()
            .find(|r| &r.id == id)
            .with_context(|| format!("patient {id:?} not found"))?
            .clone(),
        None => data
            .records
            .first()
            .context("data source has no patients")?
            .clone(),
    };

    let assets = match args.asset_dir.clone().or(file_config.asset_dir.clone()) {
        Some(dir) => PromptAssets::from_dir(&dir)?,
        None => PromptAssets::embedded(),
    };
    let backend_file = file_config.backend.clone().unwrap_or_default();
    let spec = BackendSpec {
        kind: args.backend,
        http: dxchat::backend::HttpBackendConfig {
            endpoint: resolve(
                args.endpoint.clone(),
                backend_file.endpoint,
                dxchat::backend::HttpBackendConfig::default().endpoint,
            ),
            model: args.model.clone().or(backend_file.model),
            ..dxchat::backend::HttpBackendConfig::default()
        },
        oracle: oracle_policy(
            &args.oracle_inform_turn,
            args.oracle_correctness,
            false,
            seed,
        )?,
        cassette_dir: args.cassette_dir.clone(),
        record: false,
    };
    let roster = vec![record.clone()];
    let pair = build_pair(&spec, &data.catalogs, &roster, std::path::Path::new("."))?;
    let (bot, bot_role) = match human_role {
        Role::Doctor => (pair.patient, Role::Patient),
        Role::Patient => (pair.doctor, Role::Doctor),
    };
    Ok((
        ChatSetup {
            record,
            catalogs: data.catalogs,
            assets,
            mode,
            t_max,
            bot,
            bot_role,
        },
        human_role,
    ))
}

fn read_line(input: &mut impl BufRead) -> Option<String> {
    let mut line = String::new();
    match input.read_line(&mut line) {
        Ok(0) => None,
        Ok(_) => Some(line.trim().to_string()),
        Err(_) => None,
    }
}

fn question_turn(index: u32, utterance: &str, question: &str, answer: &str) -> Turn {
    Turn {
        index,
        doctor_raw: dxchat::text::strip_machine_tags(utterance),
        doctor_kind: DoctorKind::Question,
        extracted_question: Some(dxchat::text::strip_machine_tags(question)),
        thought: dxchat::prompting::parse_thought(utterance),
        patient_answer: Some(answer.to_string()),
        probe_diagnosis_raw: None,
        doctor_prompt: None,
        patient_prompt: None,
        probe_prompt: None,
    }
}

fn terminal_turn(index: u32, utterance: &str, kind: DoctorKind) -> Turn {
    Turn {
        index,
        doctor_raw: dxchat::text::strip_machine_tags(utterance),
        doctor_kind: kind,
        extracted_question: None,
        thought: None,
        patient_answer: None,
        probe_diagnosis_raw: None,
        doctor_prompt: None,
        patient_prompt: None,
        probe_prompt: None,
    }
}

pub fn run_with_io(
    args: ChatArgs,
    file_config: &FileConfig,
    input: &mut impl BufRead,
    output: &mut impl Write,
) -> anyhow::Result<ExitCode> {
    let (setup, human_role) = setup(&args, file_config)?;
    let opening = kickstart_facts(
        &setup.record,
        &setup.catalogs,
        &setup.assets.profile_template,
    )?;
    let profile = build_patient_profile(
        &setup.record,
        &setup.catalogs,
        &setup.assets.profile_template,
    )?;
    writeln!(
        output,
        "# patient {} ({} mode, t_max {})",
        setup.record.id, setup.mode, setup.t_max
    )?;
    if human_role == Role::Doctor {
        writeln!(
            output,
            "# type questions one per line; end with `{INFORM_MARKER} <diagnosis>`"
        )?;
    }
    writeln!(output, "Patient: {opening}")?;

    let mut dialogue = DialogueHistory::new(opening.clone());
    let mut turns: Vec<Turn> = Vec::new();
    let mut tokens = TokenTotals::default();
    let metadata = |role: Role, turn: u32, kind: RequestKind| RequestMetadata {
        session_id: setup.record.id.clone(),
        role,
        turn,
        kind,
    };

    let complete = |prompt: String,
                    role: Role,
                    turn: u32,
                    kind: RequestKind,
                    tokens: &mut TokenTotals|
     -> anyhow::Result<String> {
        let request = CompletionRequest::new(prompt, metadata(role, turn, kind));
        let response = setup.bot.complete(&request)?;
        tokens.add(&response.token_usage);
        Ok(normalize_utterance(&response.text))
    };

    let (final_diagnosis_raw, terminated_by) = match human_role {
        Role::Doctor => loop {
            let t = turns.len() as u32 + 1;
            if t > setup.t_max {
                writeln!(output, "# turn cap reached; enter the final diagnosis")?;
                write!(output, "Doctor: {INFORM_MARKER} ")?;
                output.flush()?;
                let line = read_line(input).unwrap_or_default();
                let assembled = if line.is_empty() {
                    "unparsed".to_string()
                } else {
                    format!("{INFORM_MARKER} {line}")
                };
                break (assembled, TerminatedBy::ForcedAtTmax);
            }
            write!(output, "Doctor: ")?;
            output.flush()?;
            let Some(line) = read_line(input) else {
                turns.push(terminal_turn(t, "", DoctorKind::Malformed));
                break ("unparsed".to_string(), TerminatedBy::AbortedMalformed);
            };
            if line.is_empty() {
                writeln!(output, "# empty line ignored")?;
                continue;
            }
            let (kind, question) = classify_doctor_utterance(&line);
            match kind {
                DoctorKind::Inform => {
                    turns.push(terminal_turn(t, &line, DoctorKind::Inform));
                    break (line, TerminatedBy::ModelInform);
                }
                DoctorKind::Malformed => continue,
                DoctorKind::Question => {
                    let question = question.expect("question turns carry a question");
                    dialogue.push_question(line.clone(), question.clone());
                    let prompt = build_patient_prompt(&setup.assets, &profile, &dialogue)?;
                    let answer = complete(
                        prompt.text,
                        setup.bot_role,
                        t,
                        RequestKind::Live,
                        &mut tokens,
                    )?;
                    writeln!(output, "Patient: {answer}")?;
                    dialogue.record_answer(answer.clone());
                    turns.push(question_turn(t, &line, &question, &answer));
                }
            }
        },
        Role::Patient => loop {
            let t = turns.len() as u32 + 1;
            let force_now = t > setup.t_max;
            if force_now {
                let forced = dialogue.with_pending_inform();
                let prompt = build_doctor_prompt(&setup.assets, setup.mode, &forced)?;
                let completion = complete(
                    prompt.text,
                    setup.bot_role,
                    t,
                    RequestKind::Forced,
                    &mut tokens,
                )?;
                let assembled = if completion.starts_with(INFORM_MARKER) {
                    completion
                } else {
                    format!("{INFORM_MARKER} {completion}")
                };
                writeln!(output, "Doctor: {assembled}")?;
                break (assembled, TerminatedBy::ForcedAtTmax);
            }
            let prompt = build_doctor_prompt(&setup.assets, setup.mode, &dialogue)?;
            let utterance = complete(
                prompt.text,
                setup.bot_role,
                t,
                RequestKind::Live,
                &mut tokens,
            )?;
            let (kind, question) = classify_doctor_utterance(&utterance);
            match kind {
                DoctorKind::Inform => {
                    writeln!(output, "Doctor: {utterance}")?;
                    turns.push(terminal_turn(t, &utterance, DoctorKind::Inform));
                    break (
                        dxchat::text::strip_machine_tags(&utterance),
                        TerminatedBy::ModelInform,
                    );
                }
                DoctorKind::Malformed => {
                    turns.push(terminal_turn(t, &utterance, DoctorKind::Malformed));
                    break ("unparsed".to_string(), TerminatedBy::AbortedMalformed);
                }
                DoctorKind::Question => {
                    let question = question.expect("question turns carry a question");
                    writeln!(
                        output,
                        "Doctor: {}",
                        dxchat::text::strip_machine_tags(&question)
                    )?;
                    write!(output, "Patient: ")?;
                    output.flush()?;
                    match read_line(input) {
                        Some(answer) if !answer.is_empty() => {
                            dialogue.push_question(utterance.clone(), question.clone());
                            dialogue.record_answer(answer.clone());
                            turns.push(question_turn(t, &utterance, &question, &answer));
                        }
                        _ => {
                            // Human left: gracefully force the diagnosis on
                            // the answered history.
                            let forced = dialogue.with_pending_inform();
                            let prompt = build_doctor_prompt(&setup.assets, setup.mode, &forced)?;
                            let completion = complete(
                                prompt.text,
                                setup.bot_role,
                                t,
                                RequestKind::Forced,
                                &mut tokens,
                            )?;
                            let assembled = if completion.starts_with(INFORM_MARKER) {
                                completion
                            } else {
                                format!("{INFORM_MARKER} {completion}")
                            };
                            writeln!(output)?;
                            writeln!(output, "Doctor: {assembled}")?;
                            break (assembled, TerminatedBy::ForcedAtTmax);
                        }
                    }
                }
            }
        },
    };

    let transcript = Transcript {
        schema_version: TRANSCRIPT_SCHEMA_VERSION,
        patient_id: setup.record.id.clone(),
        mode: setup.mode,
        opening,
        turns,
        final_diagnosis_raw: dxchat::text::strip_machine_tags(&final_diagnosis_raw),
        terminated_by,
        duration_ms: 0,
        tokens,
        forced_prompt: None,
        human_role: Some(human_role),
    };

    let matched = extract_diagnosis(
        &transcript.final_diagnosis_raw,
        &setup.catalogs.conditions,
        MatchPolicy::default(),
    )
    .with_truth(&setup.record.pathology);
    writeln!(
        output,
        "# diagnosis match: {} ({})",
        matched.matched.as_deref().unwrap_or("none"),
        if matched.correct {
            "correct"
        } else {
            "incorrect"
        }
    )?;

    if let Some(out) = &args.out {
        if let Some(parent) = out.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        write_transcripts(out, &[transcript])?;
        writeln!(output, "# transcript saved to {}", out.display())?;
    }
    Ok(ExitCode::SUCCESS)
}
