//! Acceptance suite: one test per criterion, each printing a pass line and
//! holding its runtime budget. Run with
//! `cargo test -p dxchat --test acceptance -- --nocapture`.
//!
//! Criterion 7 needs the real dataset release; point `DDXPLUS_DIR` at it
//! (or place it under `data/ddxplus/`), otherwise that criterion reports a
//! skip notice and does not fail.

mod common;

use std::collections::BTreeMap;
use std::fs::File;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::stub::{Reply, StubServer};
use common::Bench;
use dxchat::backend::{
    CompletionBackend, CompletionRequest, HttpBackend, HttpBackendConfig, OracleDoctor,
    OraclePatient, OraclePolicy, RecordingBackend, ReplayBackend, RequestKind, RequestMetadata,
    Role,
};
use dxchat::dataset::{
    build_patient_profile, kickstart_facts, load_condition_catalog, load_evidence_catalog,
    load_patients, pool_size, sample_split, ConditionCatalog, EvidenceAssertion, PatientRecord,
    Sex, SplitName,
};
use dxchat::dialogue::{
    run_batch, run_session, write_transcripts, PromptMode, SessionConfig, SessionContext,
    TerminatedBy,
};
use dxchat::evaluation::{
    aggregate, build_criticality_packet, extract_diagnosis, packet_violations, parse_verdicts,
    score_session, tabulate_verdicts, MatchPolicy, SplitTranscripts,
};
use dxchat::prompting::{
    extract_question, render_drcot_doctor_prompt, render_standard_doctor_prompt,
    render_thought_sentence, DialogueHistory, DrCotThought, Exemplar, ExemplarTurn, PromptAssets,
    PromptParts,
};
use dxchat::synthetic::{generate_patients, mini_catalogs};

fn pass(criterion: u32, what: &str, started: Instant, budget: Duration) {
    let elapsed = started.elapsed();
    println!(
        "[PASS] criterion {criterion}: {what} ({:.2?} of {:.0?} budget)",
        elapsed, budget
    );
    assert!(
        elapsed < budget,
        "criterion {criterion} exceeded its runtime budget: {elapsed:.2?} >= {budget:.0?}"
    );
}

// -------------------------------------------------------------------------
// 1. Golden prompts
// -------------------------------------------------------------------------

#[test]
fn criterion_1_golden_prompts() {
    let started = Instant::now();
    let catalogs = mini_catalogs();
    let assets = PromptAssets::embedded();
    let record = PatientRecord {
        id: "golden-0001".into(),
        age: 34,
        sex: Sex::Male,
        initial_evidence: "cough".into(),
        evidences: vec![
            EvidenceAssertion {
                code: "cough".into(),
                value: None,
            },
            EvidenceAssertion {
                code: "fever".into(),
                value: None,
            },
            EvidenceAssertion {
                code: "pain_location".into(),
                value: Some("right_side".into()),
            },
        ],
        pathology: "Amberitis".into(),
    };
    let kickstart = kickstart_facts(&record, &catalogs, &assets.profile_template).unwrap();
    let profile = build_patient_profile(&record, &catalogs, &assets.profile_template).unwrap();

    let parts = PromptParts {
        instruction: assets.standard_instruction.clone(),
        shots: assets.doctor_shots.clone(),
        profile: None,
        dialogue: DialogueHistory::new(kickstart.clone()),
    };
    let golden = |name: &str| {
        std::fs::read_to_string(format!(
            "{}/tests/golden/{name}",
            env!("CARGO_MANIFEST_DIR")
        ))
        .unwrap_or_else(|e| panic!("missing golden fixture {name}: {e}"))
    };
    assert_eq!(
        render_standard_doctor_prompt(&parts).unwrap().text,
        golden("standard_prompt.txt")
    );
    let mut inform = parts.clone();
    inform.dialogue.pending_inform = true;
    assert_eq!(
        render_standard_doctor_prompt(&inform).unwrap().text,
        golden("standard_prompt_inform.txt")
    );
    assert_eq!(
        render_drcot_doctor_prompt(&parts, &assets.drcot_augmentation)
            .unwrap()
            .text,
        golden("drcot_prompt.txt")
    );
    let mut patient_dialogue = DialogueHistory::new(kickstart);
    patient_dialogue.push_question("Do you have a fever?".into(), "Do you have a fever?".into());
    let patient_parts = PromptParts {
        instruction: assets.patient_instruction.clone(),
        shots: vec![assets.patient_shot.clone()],
        profile: Some(profile),
        dialogue: patient_dialogue,
    };
    assert_eq!(
        dxchat::prompting::render_patient_prompt(&patient_parts)
            .unwrap()
            .text,
        golden("patient_prompt.txt")
    );
    pass(
        1,
        "golden prompts match frozen fixtures byte for byte",
        started,
        Duration::from_secs(1),
    );
}

// -------------------------------------------------------------------------
// 2. DR-CoT delta property over 200 randomized exemplar sets
// -------------------------------------------------------------------------

fn pick_words(rng: &mut ChaCha8Rng, n: usize) -> String {
    let words = [
        "cough", "fever", "chills", "pain", "smoker", "breath", "nose", "throat",
    ];
    (0..n)
        .map(|_| words[rng.gen_range(0..words.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_exemplar(rng: &mut ChaCha8Rng) -> Exemplar {
    let n_turns = rng.gen_range(1..=5);
    let turns: Vec<ExemplarTurn> = (0..n_turns)
        .map(|i| {
            let about = pick_words(rng, 2);
            let said = pick_words(rng, 1);
            ExemplarTurn {
                q: format!("Question {i} about {about}?"),
                a: format!("Answer {i} {said}."),
            }
        })
        .collect();
    let conditions = [
        "Amberitis",
        "Viral amberitis",
        "Coralline fever",
        "Duskwood flu",
    ];
    let thoughts: Vec<DrCotThought> = turns
        .iter()
        .skip(1)
        .cloned()
        .collect::<Vec<_>>()
        .into_iter()
        .map(|turn| {
            let mut ddx: Vec<String> = conditions.iter().map(|s| s.to_string()).collect();
            ddx.shuffle(rng);
            ddx.truncate(rng.gen_range(1..=3));
            DrCotThought {
                evidence_summary: pick_words(rng, 3),
                ranked_ddx: ddx,
                next_question: turn.q,
            }
        })
        .collect();
    let opening_detail = pick_words(rng, 2);
    Exemplar {
        profile: None,
        opening: format!("Hello doctor, {opening_detail}."),
        turns,
        closing: format!(
            "[inform] The diagnosis is {}.",
            conditions[rng.gen_range(0..4)]
        ),
        thoughts: Some(thoughts),
    }
}

#[test]
fn criterion_2_drcot_delta_property() {
    let started = Instant::now();
    let assets = PromptAssets::embedded();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for case in 0..200 {
        let shots: Vec<Exemplar> = (0..rng.gen_range(1..=3))
            .map(|_| random_exemplar(&mut rng))
            .collect();
        let parts = PromptParts {
            instruction: assets.standard_instruction.clone(),
            shots,
            profile: None,
            dialogue: DialogueHistory::new("Hello doctor, I am unwell."),
        };
        let standard = render_standard_doctor_prompt(&parts).unwrap().text;
        let drcot = render_drcot_doctor_prompt(&parts, &assets.drcot_augmentation)
            .unwrap()
            .text;

        // Remove the augmentation sentence and unwrap every rewrite
        // sentence; the result must equal the standard prompt exactly.
        let mut recovered = drcot.replace(&format!(" {}", assets.drcot_augmentation), "");
        for shot in &parts.shots {
            let first = format!("Doctor: {}\n", shot.turns[0].q);
            assert!(drcot.contains(&first), "case {case}: q_1 was rewritten");
            for (k, thought) in shot.thoughts.as_ref().unwrap().iter().enumerate() {
                let sentence = render_thought_sentence(thought);
                assert!(
                    drcot.contains(&sentence),
                    "case {case}: rewrite sentence missing"
                );
                assert_eq!(
                    extract_question(&sentence),
                    shot.turns[k + 1].q,
                    "case {case}: extraction failed to round-trip"
                );
                recovered = recovered.replace(&sentence, &shot.turns[k + 1].q);
            }
        }
        assert_eq!(
            recovered, standard,
            "case {case}: delta is not exactly the two modifications"
        );
    }
    pass(
        2,
        "delta over 200 randomized exemplar sets is exactly the two modifications",
        started,
        Duration::from_secs(5),
    );
}

// -------------------------------------------------------------------------
// 3. Oracle end-to-end accuracy curve
// -------------------------------------------------------------------------

#[test]
fn criterion_3_oracle_end_to_end() {
    let started = Instant::now();
    let config = SessionConfig::default();

    let bench = Bench::new("cough", 50, 30, OraclePolicy::default());
    let outcome = bench.run(&config);
    assert!(outcome.all_succeeded());
    let scores: Vec<_> = outcome
        .transcripts
        .iter()
        .zip(&bench.records)
        .map(|(t, r)| {
            score_session(
                t,
                &r.pathology,
                &bench.catalogs.conditions,
                8,
                MatchPolicy::default(),
            )
        })
        .collect();
    let metrics = aggregate(&scores, "ID", PromptMode::Standard, 8).unwrap();
    assert_eq!(
        metrics.per_turn_accuracy,
        vec![0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]
    );

    let bench = Bench::new(
        "cough",
        50,
        31,
        OraclePolicy {
            correctness: 0.8,
            ..OraclePolicy::default()
        },
    );
    let outcome = bench.run(&config);
    let scores: Vec<_> = outcome
        .transcripts
        .iter()
        .zip(&bench.records)
        .map(|(t, r)| {
            score_session(
                t,
                &r.pathology,
                &bench.catalogs.conditions,
                8,
                MatchPolicy::default(),
            )
        })
        .collect();
    let metrics = aggregate(&scores, "ID", PromptMode::Standard, 8).unwrap();
    assert_eq!(
        metrics.final_accuracy, 0.8,
        "final accuracy must be exact by counting"
    );
    pass(
        3,
        "50-session oracle curve is [0,0,1,...] and p=0.8 is exact",
        started,
        Duration::from_secs(30),
    );
}

// -------------------------------------------------------------------------
// 4. Turn-cap enforcement
// -------------------------------------------------------------------------

#[test]
fn criterion_4_turn_cap_enforcement() {
    let started = Instant::now();
    let bench = Bench::new(
        "cough",
        50,
        40,
        OraclePolicy {
            inform_turn: None,
            ..OraclePolicy::default()
        },
    );
    let outcome = bench.run(&SessionConfig::default());
    assert!(outcome.all_succeeded());
    assert_eq!(outcome.transcripts.len(), 50);
    for transcript in &outcome.transcripts {
        assert_eq!(
            transcript.question_turns(),
            8,
            "expected exactly 8 question turns"
        );
        assert_eq!(transcript.terminated_by, TerminatedBy::ForcedAtTmax);
        assert!(transcript.final_diagnosis_raw.starts_with("[inform]"));
        transcript.validate(8).unwrap();
    }
    pass(
        4,
        "never-informing doctor always yields 8 questions plus one forced inform",
        started,
        Duration::from_secs(30),
    );
}

// -------------------------------------------------------------------------
// 5. Diagnosis extraction vs. brute force over a 49-condition catalog
// -------------------------------------------------------------------------

fn forty_nine_conditions() -> ConditionCatalog {
    let stems = [
        "amberitis",
        "coralline fever",
        "duskwood flu",
        "silverpine chill",
        "marrowpox",
        "gleam fever",
        "harrow cough syndrome",
        "ashen pneumonia",
        "briar pox",
        "cinder angina",
        "drift palsy",
        "ember colic",
        "fenwick ague",
        "garnet croup",
        "hollow rale",
        "ivory spasm",
        "juniper gripe",
        "kestrel fever",
        "lumen rash",
        "mire fever",
        "nettle chill",
        "onyx tremor",
        "pale dropsy",
        "quill fever",
        "rowan blight",
    ];
    let mut names: Vec<String> = Vec::new();
    for stem in stems {
        names.push(capitalize(stem));
        if names.len() >= 49 {
            break;
        }
        names.push(format!("Viral {stem}"));
        if names.len() >= 49 {
            break;
        }
    }
    names.truncate(49);
    // A couple of accented spellings exercise normalization.
    names[47] = "Ménière blight".to_string();
    names[48] = "Grün-Barr disorder".to_string();
    let mut catalog = ConditionCatalog::new();
    for name in &names {
        catalog.insert(name).unwrap();
    }
    assert_eq!(catalog.len(), 49);
    catalog
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

#[test]
fn criterion_5_extraction_matches_brute_force() {
    let started = Instant::now();
    let catalog = forty_nine_conditions();
    let names: Vec<(String, String)> = catalog
        .iter()
        .map(|c| (c.name.clone(), c.normalized_name.clone()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let prefixes = [
        "[inform] Based on the gathered evidence, the most likely diagnosis is",
        "the diagnosis is",
        "it might be",
        "I cannot rule out",
        "no diagnosis today for",
    ];
    let mut agreements = 0usize;
    for _ in 0..1000 {
        let mut utterance = prefixes[rng.gen_range(0..prefixes.len())].to_string();
        for _ in 0..rng.gen_range(0..3) {
            let name = &names[rng.gen_range(0..names.len())].0;
            let mangled = match rng.gen_range(0..3) {
                0 => name.to_lowercase(),
                1 => name.to_uppercase(),
                _ => name.clone(),
            };
            utterance.push(' ');
            utterance.push_str(&mangled);
            if rng.gen_bool(0.3) {
                utterance.push(',');
            }
        }
        utterance.push('.');

        let fast = extract_diagnosis(&utterance, &catalog, MatchPolicy::LongestSubstring);
        let slow = brute_force(&utterance, &names);
        assert_eq!(fast.matched, slow, "disagreement on {utterance:?}");
        agreements += 1;
    }
    assert_eq!(agreements, 1000);
    pass(
        5,
        "extraction agrees with the brute-force oracle on 1000 utterances",
        started,
        Duration::from_secs(5),
    );
}

/// Independent longest/earliest containment search by explicit enumeration.
fn brute_force(raw: &str, names: &[(String, String)]) -> Option<String> {
    let haystack = dxchat::text::normalize(raw);
    let bytes = haystack.as_bytes();
    let mut best: Option<(usize, usize, &str)> = None;
    for (name, normalized) in names {
        let needle = normalized.as_bytes();
        if needle.is_empty() || needle.len() > bytes.len() {
            continue;
        }
        for pos in 0..=bytes.len() - needle.len() {
            if &bytes[pos..pos + needle.len()] == needle {
                let candidate = (needle.len(), pos, name.as_str());
                best = Some(match best {
                    None => candidate,
                    Some(cur)
                        if candidate.0 > cur.0 || (candidate.0 == cur.0 && candidate.1 < cur.1) =>
                    {
                        candidate
                    }
                    Some(cur) => cur,
                });
                break;
            }
        }
    }
    best.map(|(_, _, name)| name.to_string())
}

// -------------------------------------------------------------------------
// 6. Determinism and replay
// -------------------------------------------------------------------------

#[test]
fn criterion_6_determinism_and_replay() {
    let started = Instant::now();
    let catalogs = Arc::new(mini_catalogs());
    let records = generate_patients(&catalogs, "cough", 8, 60);
    let assets = PromptAssets::embedded();
    let config = SessionConfig::default();
    let dir = tempfile::tempdir().unwrap();

    // Record once.
    {
        let doctor = RecordingBackend::to_path(
            OracleDoctor::new(OraclePolicy::default(), catalogs.clone(), &records),
            &dir.path().join("doctor.jsonl"),
        )
        .unwrap();
        let patient = RecordingBackend::to_path(
            OraclePatient::new(catalogs.clone(), &records),
            &dir.path().join("patient.jsonl"),
        )
        .unwrap();
        run_batch(&records, &catalogs, &assets, &doctor, &patient, &config, 4);
    }

    // Two full replayed runs must produce identical bytes.
    let mut artifacts: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
    for run in 0..2 {
        let doctor = ReplayBackend::from_path(&dir.path().join("doctor.jsonl")).unwrap();
        let patient = ReplayBackend::from_path(&dir.path().join("patient.jsonl")).unwrap();
        let outcome = run_batch(&records, &catalogs, &assets, &doctor, &patient, &config, 4);
        assert!(outcome.all_succeeded());
        let transcripts_path = dir.path().join(format!("transcripts-{run}.jsonl"));
        write_transcripts(&transcripts_path, &outcome.transcripts).unwrap();
        let scores: Vec<_> = outcome
            .transcripts
            .iter()
            .zip(&records)
            .map(|(t, r)| {
                score_session(
                    t,
                    &r.pathology,
                    &catalogs.conditions,
                    8,
                    MatchPolicy::default(),
                )
            })
            .collect();
        let metrics = aggregate(&scores, "ID", PromptMode::Standard, 8).unwrap();
        artifacts.push((
            std::fs::read(&transcripts_path).unwrap(),
            serde_json::to_vec(&metrics).unwrap(),
        ));
    }
    assert_eq!(
        artifacts[0].0, artifacts[1].0,
        "transcripts differ between replayed runs"
    );
    assert_eq!(
        artifacts[0].1, artifacts[1].1,
        "metrics differ between replayed runs"
    );

    // Split sampling is invariant under input permutation.
    let mut shuffled = records.clone();
    shuffled.reverse();
    let a = sample_split(&records, SplitName::Id, "cough", 5, 6).unwrap();
    let b = sample_split(&shuffled, SplitName::Id, "cough", 5, 6).unwrap();
    assert_eq!(a.patient_ids, b.patient_ids);
    pass(
        6,
        "replayed runs are byte-identical and sampling is permutation-stable",
        started,
        Duration::from_secs(10),
    );
}

// -------------------------------------------------------------------------
// 7. Real-dataset checks (skipped with notice when absent)
// -------------------------------------------------------------------------

fn ddxplus_dir() -> Option<std::path::PathBuf> {
    if let Ok(dir) = std::env::var("DDXPLUS_DIR") {
        let path = std::path::PathBuf::from(dir);
        if path.is_dir() {
            return Some(path);
        }
    }
    let fallback = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/ddxplus");
    fallback.is_dir().then_some(fallback)
}

#[test]
fn criterion_7_real_dataset_checks() {
    let started = Instant::now();
    let Some(dir) = ddxplus_dir() else {
        println!(
            "[SKIP] criterion 7: real dataset not present (set DDXPLUS_DIR or place the release under data/ddxplus/)"
        );
        return;
    };
    let evidences =
        load_evidence_catalog(File::open(dir.join("release_evidences.json")).unwrap()).unwrap();
    let conditions =
        load_condition_catalog(File::open(dir.join("release_conditions.json")).unwrap()).unwrap();
    assert_eq!(evidences.len(), 223, "expected 223 evidences");
    assert_eq!(conditions.len(), 49, "expected 49 conditions");

    let catalogs = dxchat::dataset::Catalogs {
        evidences,
        conditions,
    };
    let report = load_patients(
        File::open(dir.join("release_test_patients.csv")).unwrap(),
        &catalogs,
    )
    .unwrap();
    assert!(
        report.issues.is_empty(),
        "test set rows were quarantined: {:?}",
        &report.issues[..report.issues.len().min(3)]
    );

    assert_eq!(pool_size(&report.records, "toux"), 618);
    assert_eq!(pool_size(&report.records, "dyspn"), 11305);
    assert_eq!(pool_size(&report.records, "rhino_clair"), 6270);

    sample_split(&report.records, SplitName::Id, "toux", 200, 0).unwrap();
    sample_split(&report.records, SplitName::Od1, "dyspn", 100, 0).unwrap();
    sample_split(&report.records, SplitName::Od2, "rhino_clair", 100, 0).unwrap();
    pass(
        7,
        "real-dataset counts, pools, and splits check out",
        started,
        Duration::from_secs(120),
    );
}

// -------------------------------------------------------------------------
// 8. Live endpoint against a local stub
// -------------------------------------------------------------------------

#[test]
fn criterion_8_stub_endpoint_integration() {
    let started = Instant::now();

    // Default parameters on the wire.
    let server = StubServer::start(vec![Reply::Ok(" ok")]);
    let backend = HttpBackend::new(HttpBackendConfig {
        endpoint: server.address.clone(),
        attempts: 3,
        backoff_ms: 5,
        ..HttpBackendConfig::default()
    })
    .unwrap();
    let request = CompletionRequest::new(
        "prompt",
        RequestMetadata {
            session_id: "p".into(),
            role: Role::Doctor,
            turn: 1,
            kind: RequestKind::Live,
        },
    );
    backend.complete(&request).unwrap();
    let bodies = server.stop();
    assert_eq!(bodies[0]["max_tokens"], 384);
    assert_eq!(bodies[0]["temperature"], 0.0);

    // Bounded retries.
    let server = StubServer::start(vec![Reply::Status(500)]);
    let backend = HttpBackend::new(HttpBackendConfig {
        endpoint: server.address.clone(),
        attempts: 3,
        backoff_ms: 5,
        ..HttpBackendConfig::default()
    })
    .unwrap();
    backend.complete(&request).unwrap_err();
    assert_eq!(
        server.hits(),
        3,
        "retry policy exceeded configured attempts"
    );
    server.stop();

    // A two-turn scripted session completes and scores.
    let server = StubServer::start(vec![
        Reply::Ok(" Do you have a fever?"),
        Reply::Ok(" Yes."),
        Reply::Ok(" [inform] The most likely diagnosis is Amberitis."),
    ]);
    let backend = HttpBackend::new(HttpBackendConfig {
        endpoint: server.address.clone(),
        attempts: 3,
        backoff_ms: 5,
        ..HttpBackendConfig::default()
    })
    .unwrap();
    let catalogs = mini_catalogs();
    let assets = PromptAssets::embedded();
    let records = generate_patients(&catalogs, "cough", 1, 80);
    let config = SessionConfig {
        probe_every_turn: false,
        ..SessionConfig::default()
    };
    let transcript = run_session(
        SessionContext {
            record: &records[0],
            catalogs: &catalogs,
            assets: &assets,
            doctor: &backend,
            patient: &backend,
        },
        &config,
    )
    .unwrap();
    assert_eq!(transcript.turns.len(), 2);
    assert_eq!(transcript.terminated_by, TerminatedBy::ModelInform);
    let score = score_session(
        &transcript,
        "Amberitis",
        &catalogs.conditions,
        8,
        MatchPolicy::default(),
    );
    assert!(score.final_correct);
    server.stop();
    pass(
        8,
        "stub endpoint sees default parameters, bounded retries, and a scoring session",
        started,
        Duration::from_secs(10),
    );
}

// -------------------------------------------------------------------------
// 9. Blinded criticality packets and verdict tabulation
// -------------------------------------------------------------------------

#[test]
fn criterion_9_blinding_and_tabulation() {
    let started = Instant::now();
    let catalogs = Arc::new(mini_catalogs());
    let assets = PromptAssets::embedded();
    let mut groups = Vec::new();
    for (split, ie, count) in [
        ("ID", "cough", 20usize),
        ("OD1", "short_breath", 10),
        ("OD2", "runny_nose", 10),
    ] {
        let records = generate_patients(&catalogs, ie, count + 2, 90);
        let mut by_mode = Vec::new();
        for mode in [PromptMode::Standard, PromptMode::Drcot] {
            let doctor = OracleDoctor::new(OraclePolicy::default(), catalogs.clone(), &records);
            let patient = OraclePatient::new(catalogs.clone(), &records);
            let config = SessionConfig {
                mode,
                probe_every_turn: false,
                ..SessionConfig::default()
            };
            let outcome = run_batch(&records, &catalogs, &assets, &doctor, &patient, &config, 4);
            assert!(outcome.all_succeeded());
            by_mode.push(outcome.transcripts);
        }
        let drcot = by_mode.pop().unwrap();
        let standard = by_mode.pop().unwrap();
        groups.push(SplitTranscripts {
            split: split.to_string(),
            count,
            standard,
            drcot,
        });
    }
    let packet = build_criticality_packet(&groups, 9).unwrap();
    assert_eq!(packet.pairs.len(), 40, "expected 20 + 10 + 10 pairs");

    let texts: Vec<&str> = packet
        .pairs
        .iter()
        .flat_map(|p| [p.dialogue_a.as_str(), p.dialogue_b.as_str()])
        .collect();
    let violations = packet_violations(
        &texts,
        &[
            "standard",
            "drcot",
            "dr-cot",
            "[inform]",
            "the ranked differential diagnosis is",
        ],
    );
    assert!(violations.is_empty(), "blinding violated: {violations:?}");

    // Assign every verdict to A and check the tabulation against a direct
    // decode-and-count over the key.
    let verdict_text: String = packet
        .pairs
        .iter()
        .map(|p| format!("{} A\n", p.pair_id))
        .collect();
    let verdicts = parse_verdicts(&verdict_text).unwrap();
    let summary = tabulate_verdicts(&verdicts, &packet.key).unwrap();
    let mut expected: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for entry in &packet.key {
        let slot = expected.entry(entry.split.clone()).or_default();
        match entry.mode_a {
            PromptMode::Standard => slot.0 += 1,
            PromptMode::Drcot => slot.1 += 1,
        }
    }
    assert_eq!(summary.by_split, expected);
    let (std_total, drcot_total) = summary.totals();
    assert_eq!(std_total + drcot_total, 40);
    pass(
        9,
        "criticality packets are blind and verdict tabulation matches the decode-and-count oracle",
        started,
        Duration::from_secs(5),
    );
}
