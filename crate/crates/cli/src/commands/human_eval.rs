//! `dxchat export-human-eval` — blinded packet generation and verdict
//! tabulation. Items go into a human-readable text file; the sealed key
//! mapping items back to modes is written separately.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context};

use dxchat::dataset::build_patient_profile;
use dxchat::dialogue::{read_transcripts, Transcript};
use dxchat::evaluation::{
    build_criticality_packet, build_faithfulness_packet, collect_qa_pairs, packet_violations,
    parse_verdicts, tabulate_verdicts, CriticalityKeyEntry, SplitTranscripts,
};
use dxchat::prompting::PromptAssets;

use crate::config::FileConfig;
use crate::data::{self, DataSource};
use crate::manifest::RunManifest;
use crate::{HumanEvalArgs, HumanEvalKind};

/// Strings that must never appear in blinded items.
pub const BLINDING_FORBIDDEN: &[&str] = &[
    "standard",
    "drcot",
    "dr-cot",
    "[inform]",
    "the ranked differential diagnosis is",
];

fn load_run(dir: &Path) -> anyhow::Result<(RunManifest, Vec<Transcript>)> {
    let manifest = RunManifest::read(&dir.join(super::run::MANIFEST_FILE))
        .with_context(|| format!("reading manifest in {}", dir.display()))?;
    let transcripts = read_transcripts(&dir.join(super::run::TRANSCRIPTS_FILE))?;
    Ok((manifest, transcripts))
}

/// Rebuild every profile for the patients of a run.
fn profiles_for(
    manifest: &RunManifest,
    transcripts: &[Transcript],
) -> anyhow::Result<BTreeMap<String, String>> {
    let source = DataSource::parse_label(&manifest.data_source)?;
    let data = data::resolve(&source)?;
    let assets = PromptAssets::embedded();
    let wanted: BTreeMap<&str, ()> = transcripts
        .iter()
        .map(|t| (t.patient_id.as_str(), ()))
        .collect();
    let mut profiles = BTreeMap::new();
    for record in &data.records {
        if wanted.contains_key(record.id.as_str()) {
            profiles.insert(
                record.id.clone(),
                build_patient_profile(record, &data.catalogs, &assets.profile_template)?,
            );
        }
    }
    Ok(profiles)
}

fn check_blinding(texts: &[&str]) -> anyhow::Result<()> {
    let violations = packet_violations(texts, BLINDING_FORBIDDEN);
    if !violations.is_empty() {
        bail!("blinding violated: {}", violations.join("; "));
    }
    Ok(())
}

pub fn run(args: HumanEvalArgs, _file_config: &FileConfig) -> anyhow::Result<ExitCode> {
    match args.kind {
        HumanEvalKind::Faithfulness {
            run_dir,
            n,
            seed,
            out,
        } => {
            let mut pool = Vec::new();
            for dir in &run_dir {
                let (manifest, transcripts) = load_run(dir)?;
                let profiles = profiles_for(&manifest, &transcripts)?;
                pool.extend(collect_qa_pairs(&transcripts, &profiles)?);
            }
            let packet = build_faithfulness_packet(&pool, n, seed)?;
            let texts: Vec<&str> = packet
                .items
                .iter()
                .flat_map(|i| [i.question.as_str(), i.answer.as_str()])
                .collect();
            check_blinding(&texts)?;

            std::fs::create_dir_all(&out)?;
            let mut text = String::new();
            for item in &packet.items {
                writeln!(text, "=== item {} ===", item.item_id)?;
                writeln!(text, "Profile: {}", item.profile)?;
                writeln!(text, "Q: {}", item.question)?;
                writeln!(text, "A: {}\n", item.answer)?;
            }
            std::fs::write(out.join("faithfulness_packet.txt"), text)?;
            std::fs::write(
                out.join("faithfulness_key.json"),
                serde_json::to_string_pretty(&packet.key)?,
            )?;
            println!(
                "{} faithfulness items exported to {}",
                packet.items.len(),
                out.display()
            );
        }
        HumanEvalKind::Criticality { splits, seed, out } => {
            let mut groups = Vec::new();
            for spec in &splits {
                let parts: Vec<&str> = spec.split(':').collect();
                let [label, std_dir, drcot_dir, count] = parts.as_slice() else {
                    bail!("--split takes LABEL:STD_RUN_DIR:DRCOT_RUN_DIR:COUNT, got {spec:?}");
                };
                let (_, standard) = load_run(Path::new(std_dir))?;
                let (_, drcot) = load_run(Path::new(drcot_dir))?;
                groups.push(SplitTranscripts {
                    split: label.to_string(),
                    count: count.parse().context("COUNT must be an integer")?,
                    standard,
                    drcot,
                });
            }
            let packet = build_criticality_packet(&groups, seed)?;
            let texts: Vec<&str> = packet
                .pairs
                .iter()
                .flat_map(|p| [p.dialogue_a.as_str(), p.dialogue_b.as_str()])
                .collect();
            check_blinding(&texts)?;

            std::fs::create_dir_all(&out)?;
            let mut text = String::new();
            for pair in &packet.pairs {
                writeln!(text, "=== pair {} (split {}) ===", pair.pair_id, pair.split)?;
                writeln!(text, "--- dialogue A ---\n{}", pair.dialogue_a)?;
                writeln!(text, "--- dialogue B ---\n{}\n", pair.dialogue_b)?;
            }
            std::fs::write(out.join("criticality_packet.txt"), text)?;
            std::fs::write(
                out.join("criticality_key.json"),
                serde_json::to_string_pretty(&packet.key)?,
            )?;
            for skipped in &packet.skipped {
                eprintln!("warning: unpaired patient skipped ({skipped})");
            }
            println!(
                "{} dialogue pairs exported to {}",
                packet.pairs.len(),
                out.display()
            );
        }
        HumanEvalKind::Tabulate { key, verdicts, out } => {
            let key: Vec<CriticalityKeyEntry> =
                serde_json::from_str(&std::fs::read_to_string(&key)?)?;
            let verdicts = parse_verdicts(&std::fs::read_to_string(&verdicts)?)?;
            let summary = tabulate_verdicts(&verdicts, &key)?;
            let table = summary.to_table();
            print!("{table}");
            if let Some(out) = out {
                if let Some(parent) = out.parent() {
                    if !parent.as_os_str().is_empty() {
                        std::fs::create_dir_all(parent)?;
                    }
                }
                std::fs::write(out, table)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
