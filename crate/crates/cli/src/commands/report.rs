//! `dxchat report` — turn metrics files into the comparison table that
//! mirrors the per-turn accuracy figures.

use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context};

use dxchat::evaluation::{compare_modes, RunMetrics};

use crate::ReportArgs;

fn read_metrics(path: &Path) -> anyhow::Result<RunMetrics> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading metrics file {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn single_mode_table(metrics: &RunMetrics) -> String {
    let mut out = String::from("turn\taccuracy\n");
    for (i, acc) in metrics.per_turn_accuracy.iter().enumerate() {
        out.push_str(&format!("{}\t{acc:.4}\n", i + 1));
    }
    out.push_str(&format!("final\t{:.4}\n", metrics.final_accuracy));
    out
}

pub fn run(args: ReportArgs) -> anyhow::Result<ExitCode> {
    std::fs::create_dir_all(&args.out)?;
    match (&args.standard, &args.drcot) {
        (Some(standard), Some(drcot)) => {
            let standard = read_metrics(standard)?;
            let drcot = read_metrics(drcot)?;
            let table = compare_modes(&standard, &drcot)?;
            std::fs::write(args.out.join("comparison.tsv"), table.to_tsv())?;
            std::fs::write(
                args.out.join("comparison.json"),
                serde_json::to_string_pretty(&table)?,
            )?;
            println!(
                "split {}: final {:.4} (standard) vs {:.4} (drcot), delta {:+.4}",
                table.split, table.final_standard, table.final_drcot, table.final_delta
            );
        }
        (Some(only), None) | (None, Some(only)) => {
            let metrics = read_metrics(only)?;
            std::fs::write(args.out.join("accuracy.tsv"), single_mode_table(&metrics))?;
            println!(
                "split {} ({}): final accuracy {:.4}",
                metrics.split, metrics.mode, metrics.final_accuracy
            );
        }
        (None, None) => bail!("report needs --standard and/or --drcot metrics files"),
    }
    Ok(ExitCode::SUCCESS)
}
