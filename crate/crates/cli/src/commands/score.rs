//! `dxchat score` — score a run directory into per-session vectors and the
//! per-turn accuracy table.

use std::collections::BTreeMap;
use std::process::ExitCode;

use anyhow::{bail, Context};

use dxchat::dialogue::read_transcripts;
use dxchat::evaluation::{aggregate, score_session, MatchPolicy};

use crate::config::FileConfig;
use crate::data::{self, DataSource};
use crate::manifest::RunManifest;
use crate::ScoreArgs;

pub const METRICS_FILE: &str = "metrics.json";
pub const SCORES_FILE: &str = "scores.jsonl";
pub const PER_TURN_FILE: &str = "per_turn.tsv";

pub fn run(args: ScoreArgs, _file_config: &FileConfig) -> anyhow::Result<ExitCode> {
    let matching = match args.matching.as_str() {
        "longest" => MatchPolicy::LongestSubstring,
        "exact" => MatchPolicy::ExactOnly,
        other => bail!("unknown matching rule {other:?}; expected longest or exact"),
    };
    let manifest = RunManifest::read(&args.run_dir.join(super::run::MANIFEST_FILE))
        .with_context(|| format!("reading manifest in {}", args.run_dir.display()))?;
    let transcripts = read_transcripts(&args.run_dir.join(super::run::TRANSCRIPTS_FILE))?;
    if transcripts.is_empty() {
        bail!("run directory holds no transcripts");
    }

    let source = DataSource::parse_label(&manifest.data_source)?;
    let data = data::resolve(&source)?;
    let pathology_by_id: BTreeMap<&str, &str> = data
        .records
        .iter()
        .map(|r| (r.id.as_str(), r.pathology.as_str()))
        .collect();

    let t_max = manifest.session.t_max;
    let mut scores = Vec::with_capacity(transcripts.len());
    for transcript in &transcripts {
        let pathology = pathology_by_id
            .get(transcript.patient_id.as_str())
            .with_context(|| {
                format!("patient {} not found in data source", transcript.patient_id)
            })?;
        scores.push(score_session(
            transcript,
            pathology,
            &data.catalogs.conditions,
            t_max,
            matching,
        ));
    }
    let metrics = aggregate(&scores, &manifest.split, manifest.session.mode, t_max)?;

    let out = args.out.clone().unwrap_or_else(|| args.run_dir.clone());
    std::fs::create_dir_all(&out)?;
    std::fs::write(
        out.join(METRICS_FILE),
        serde_json::to_string_pretty(&metrics)?,
    )?;
    let mut lines = String::new();
    for score in &scores {
        lines.push_str(&serde_json::to_string(score)?);
        lines.push('\n');
    }
    std::fs::write(out.join(SCORES_FILE), lines)?;
    let mut table = String::from("turn\taccuracy\tvalid\n");
    for (i, (acc, valid)) in metrics
        .per_turn_accuracy
        .iter()
        .zip(&metrics.per_turn_valid)
        .enumerate()
    {
        table.push_str(&format!("{}\t{acc:.4}\t{valid}\n", i + 1));
    }
    std::fs::write(out.join(PER_TURN_FILE), table)?;

    println!(
        "scored {} sessions ({} {}): final accuracy {:.4}, {} unparsed",
        metrics.n, metrics.split, metrics.mode, metrics.final_accuracy, metrics.unparsed_count
    );
    Ok(ExitCode::SUCCESS)
}
