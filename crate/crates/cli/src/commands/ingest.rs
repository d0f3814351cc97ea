//! `dxchat ingest` — load and validate a dataset directory, cache the
//! parsed catalogs, and write the row-level validation report.

use std::process::ExitCode;

use anyhow::Context;

use crate::config::{resolve, FileConfig};
use crate::data::{self, DEFAULT_PATIENTS_FILE};
use crate::{IngestArgs, EXIT_INTEGRITY};

pub fn run(args: IngestArgs, file_config: &FileConfig) -> anyhow::Result<ExitCode> {
    let Some(dataset_dir) = args.dataset_dir.clone().or(file_config.dataset_dir.clone()) else {
        eprintln!("error: ingest requires --dataset-dir (or dataset_dir in the config file)");
        return Ok(ExitCode::from(EXIT_INTEGRITY));
    };
    let patients_file = resolve(
        args.patients_file.clone(),
        file_config.patients_file.clone(),
        DEFAULT_PATIENTS_FILE.to_string(),
    );
    let (catalogs, report) = data::load_release(&dataset_dir, &patients_file)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    std::fs::write(
        args.out.join("catalogs.json"),
        serde_json::to_string_pretty(&catalogs)?,
    )?;
    let mut patients = String::new();
    for record in &report.records {
        patients.push_str(&serde_json::to_string(record)?);
        patients.push('\n');
    }
    std::fs::write(args.out.join("patients.jsonl"), patients)?;
    let report_lines = report.report_lines();
    std::fs::write(
        args.out.join("validation_report.txt"),
        report_lines.join("\n") + if report_lines.is_empty() { "" } else { "\n" },
    )?;

    println!(
        "{} evidences, {} conditions",
        catalogs.evidences.len(),
        catalogs.conditions.len()
    );
    println!(
        "{} patients valid, {} rows quarantined",
        report.records.len(),
        report.issues.len()
    );
    for ie in ["toux", "dyspn", "rhino_clair"] {
        let pool = dxchat::dataset::pool_size(&report.records, ie);
        if pool > 0 {
            println!("pool {ie}: {pool}");
        }
    }
    if !report.issues.is_empty() {
        println!("see {}", args.out.join("validation_report.txt").display());
    }
    Ok(ExitCode::SUCCESS)
}
