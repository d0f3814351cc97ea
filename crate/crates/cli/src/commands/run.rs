//! `dxchat run` — sample a split, run one self-chat session per patient
//! with bounded parallelism, and persist transcripts plus the manifest.

use std::collections::BTreeMap;
use std::process::ExitCode;

use anyhow::{bail, Context};
use chrono::Utc;

use dxchat::backend::HttpBackendConfig;
use dxchat::backend::DEFAULT_API_KEY_ENV;
use dxchat::dataset::{sample_split, SplitName};
use dxchat::dialogue::{run_batch, write_transcripts, PromptMode, SessionConfig, DEFAULT_T_MAX};
use dxchat::prompting::PromptAssets;

use crate::backends::{build_pair, oracle_policy, BackendSpec};
use crate::config::{resolve, FileConfig};
use crate::data::{self, DataSource, DEFAULT_PATIENTS_FILE};
use crate::manifest::{sha256_file, sha256_text, RunManifest};
use crate::{RunArgs, EXIT_SESSIONS};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRANSCRIPTS_FILE: &str = "transcripts.jsonl";

pub fn run(args: RunArgs, file_config: &FileConfig) -> anyhow::Result<ExitCode> {
    let Some(mode) = PromptMode::parse(&args.mode) else {
        bail!("unknown mode {:?}; expected standard or drcot", args.mode);
    };
    let seed = resolve(args.seed, file_config.seed, 0);
    let t_max = resolve(args.t_max, file_config.t_max, DEFAULT_T_MAX);
    let parallelism = resolve(args.parallelism, file_config.parallelism, 4);
    let asset_dir = args.asset_dir.clone().or(file_config.asset_dir.clone());

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
            pool: args.synthetic_pool.unwrap_or_else(|| args.n.max(1) * 2),
            seed,
        },
    };
    let data = data::resolve(&source)?;
    if !data.issues.is_empty() {
        eprintln!("warning: {} dataset rows quarantined", data.issues.len());
    }

    let split_name = SplitName::parse(&args.split);
    let split = sample_split(&data.records, split_name.clone(), &args.ie, args.n, seed)?;
    let by_id: BTreeMap<&str, &dxchat::dataset::PatientRecord> =
        data.records.iter().map(|r| (r.id.as_str(), r)).collect();
    let sampled: Vec<dxchat::dataset::PatientRecord> = split
        .patient_ids
        .iter()
        .map(|id| (*by_id.get(id.as_str()).expect("sampled id exists")).clone())
        .collect();

    let assets = match &asset_dir {
        Some(dir) => PromptAssets::from_dir(dir)?,
        None => PromptAssets::embedded(),
    };
    let session = SessionConfig {
        mode,
        t_max,
        probe_every_turn: !args.no_probe,
        independent_runs: args.independent_runs,
        seed,
        save_prompts: args.save_prompts,
    };

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating run directory {}", args.out.display()))?;

    let backend_file = file_config.backend.clone().unwrap_or_default();
    let spec = BackendSpec {
        kind: args.backend,
        http: HttpBackendConfig {
            endpoint: resolve(
                args.endpoint.clone(),
                backend_file.endpoint,
                HttpBackendConfig::default().endpoint,
            ),
            model: args.model.clone().or(backend_file.model),
            api_key_env: backend_file
                .api_key_env
                .unwrap_or_else(|| DEFAULT_API_KEY_ENV.to_string()),
            attempts: resolve(args.attempts, backend_file.attempts, 3),
            rate_limit_per_min: args.rate_limit.or(backend_file.rate_limit_per_min),
            ..HttpBackendConfig::default()
        },
        oracle: oracle_policy(
            &args.oracle_inform_turn,
            args.oracle_correctness,
            args.oracle_probe_correct,
            seed,
        )?,
        cassette_dir: args.cassette_dir.clone(),
        record: args.record,
    };
    let pair = build_pair(&spec, &data.catalogs, &sampled, &args.out)?;

    let mut checksums = BTreeMap::new();
    if let DataSource::Dataset { dir, patients_file } = &source {
        for file in [
            data::EVIDENCES_FILE,
            data::CONDITIONS_FILE,
            patients_file.as_str(),
        ] {
            let path = dir.join(file);
            checksums.insert(file.to_string(), sha256_file(&path)?);
        }
    }
    checksums.insert(
        "assets".to_string(),
        match &asset_dir {
            Some(dir) => {
                let mut digest = String::new();
                for name in dxchat::prompting::assets::ASSET_FILES {
                    let path = dir.join(name);
                    if path.exists() {
                        digest.push_str(&sha256_file(&path)?);
                    }
                }
                sha256_text(&digest)
            }
            None => format!("embedded:{}", env!("CARGO_PKG_VERSION")),
        },
    );

    let mut manifest = RunManifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        split: split_name.to_string(),
        ie_code: args.ie.clone(),
        n: args.n,
        seed,
        session: session.clone(),
        backend: pair.label.clone(),
        zero_shot: assets.doctor_shots.is_empty(),
        parallelism,
        data_source: source.label(),
        checksums,
        started_at: Utc::now(),
        finished_at: None,
        sessions_ok: 0,
        sessions_failed: 0,
        prompt_tokens: 0,
        completion_tokens: 0,
        requests: 0,
    };

    let outcome = run_batch(
        &sampled,
        &data.catalogs,
        &assets,
        &pair.doctor,
        &pair.patient,
        &session,
        parallelism,
    );

    for transcript in &outcome.transcripts {
        manifest.prompt_tokens += transcript.tokens.prompt_tokens;
        manifest.completion_tokens += transcript.tokens.completion_tokens;
        manifest.requests += transcript.tokens.requests;
    }
    manifest.sessions_ok = outcome.transcripts.len();
    manifest.sessions_failed = outcome.failures.len();
    manifest.finished_at = Some(Utc::now());

    write_transcripts(&args.out.join(TRANSCRIPTS_FILE), &outcome.transcripts)?;
    manifest.write(&args.out.join(MANIFEST_FILE))?;

    println!(
        "{} sessions ok, {} failed ({} {} mode, split {})",
        manifest.sessions_ok, manifest.sessions_failed, pair.label, mode, manifest.split
    );
    println!(
        "tokens: {} prompt + {} completion over {} requests",
        manifest.prompt_tokens, manifest.completion_tokens, manifest.requests
    );
    for (patient, error) in &outcome.failures {
        eprintln!("session {patient}: {error}");
    }
    if outcome.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_SESSIONS))
    }
}
