//! Command-line front end: ingest the dataset, run evaluation batches,
//! score and compare them, export blinded human-evaluation packets, and
//! chat interactively against either bot.

mod backends;
mod commands;
mod config;
mod data;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use backends::BackendKind;

/// Exit code for integrity problems: unreadable or inconsistent inputs.
pub const EXIT_INTEGRITY: u8 = 2;
/// Exit code for session-level failures during a run.
pub const EXIT_SESSIONS: u8 = 1;

#[derive(Parser)]
#[command(
    name = "dxchat",
    version,
    about = "Self-chat evaluation harness for diagnostic dialogue agents"
)]
struct Cli {
    /// Optional TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset directory and cache the parsed catalogs.
    Ingest(IngestArgs),
    /// Run one batch of self-chat sessions and persist transcripts.
    Run(RunArgs),
    /// Score a run directory into per-turn accuracy metrics.
    Score(ScoreArgs),
    /// Compare metrics across prompting modes into a plot-ready table.
    Report(ReportArgs),
    /// Export blinded packets for human evaluation, or tabulate verdicts.
    ExportHumanEval(HumanEvalArgs),
    /// Chat interactively, playing either the doctor or the patient.
    Chat(ChatArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Dataset directory with the release files.
    #[arg(long)]
    dataset_dir: Option<PathBuf>,
    /// Patient table file name inside the dataset directory.
    #[arg(long)]
    patients_file: Option<String>,
    /// Output directory for the cached catalogs and the validation report.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Prompting mode: standard or drcot.
    #[arg(long, default_value = "standard")]
    mode: String,
    /// Split label: ID, OD1, OD2, or a custom name.
    #[arg(long, default_value = "ID")]
    split: String,
    /// Initial-evidence code defining the pool.
    #[arg(long)]
    ie: String,
    /// Number of patients to sample from the pool.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Backend for both roles.
    #[arg(long, value_enum, default_value_t = BackendKind::Oracle)]
    backend: BackendKind,
    /// Dataset directory; omit to use the synthetic generator.
    #[arg(long)]
    dataset_dir: Option<PathBuf>,
    #[arg(long)]
    patients_file: Option<String>,
    /// Synthetic pool size per initial evidence (used without --dataset-dir).
    #[arg(long)]
    synthetic_pool: Option<usize>,
    /// Run directory to create.
    #[arg(long)]
    out: PathBuf,
    /// Record every completion into cassettes inside the run directory.
    #[arg(long)]
    record: bool,
    /// Directory holding cassettes for --backend replay.
    #[arg(long)]
    cassette_dir: Option<PathBuf>,
    #[arg(long)]
    t_max: Option<u32>,
    /// Disable per-turn forced-diagnosis probes.
    #[arg(long)]
    no_probe: bool,
    /// Fill probes by independent truncated re-runs instead of prompt forks.
    #[arg(long)]
    independent_runs: bool,
    #[arg(long)]
    parallelism: Option<usize>,
    /// Persist full prompts into transcripts.
    #[arg(long)]
    save_prompts: bool,
    /// Directory overriding the embedded prompt assets.
    #[arg(long)]
    asset_dir: Option<PathBuf>,
    /// Oracle: turn at which the doctor informs, or `never`.
    #[arg(long, default_value = "3")]
    oracle_inform_turn: String,
    /// Oracle: fraction of sessions diagnosed correctly.
    #[arg(long, default_value_t = 1.0)]
    oracle_correctness: f64,
    /// Oracle: probes before the inform turn answer correctly.
    #[arg(long)]
    oracle_probe_correct: bool,
    /// HTTP: completions endpoint URL.
    #[arg(long)]
    endpoint: Option<String>,
    /// HTTP: model name for the request body.
    #[arg(long)]
    model: Option<String>,
    /// HTTP: maximum attempts per completion.
    #[arg(long)]
    attempts: Option<u32>,
    /// HTTP: requests per minute across all sessions.
    #[arg(long)]
    rate_limit: Option<u32>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Run directory produced by `run`.
    #[arg(long)]
    run_dir: PathBuf,
    /// Matching rule: longest (default) or exact.
    #[arg(long, default_value = "longest")]
    matching: String,
    /// Output directory; defaults to the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// metrics.json of the standard-mode run.
    #[arg(long)]
    standard: Option<PathBuf>,
    /// metrics.json of the drcot-mode run.
    #[arg(long)]
    drcot: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HumanEvalArgs {
    #[command(subcommand)]
    kind: HumanEvalKind,
}

#[derive(Subcommand)]
enum HumanEvalKind {
    /// Sample blinded (question, answer, profile) items from run dirs.
    Faithfulness {
        /// One or more scored run directories.
        #[arg(long, required = true)]
        run_dir: Vec<PathBuf>,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pair standard/drcot dialogues per split into blinded A/B items.
    Criticality {
        /// Split spec `LABEL:STD_RUN_DIR:DRCOT_RUN_DIR:COUNT`, repeatable.
        #[arg(long = "split", required = true)]
        splits: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a judge's verdict file through the sealed key.
    Tabulate {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        verdicts: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ChatArgs {
    /// Which side the human plays.
    #[arg(long)]
    role: String,
    #[arg(long, default_value = "standard")]
    mode: String,
    #[arg(long, value_enum, default_value_t = BackendKind::Oracle)]
    backend: BackendKind,
    #[arg(long)]
    dataset_dir: Option<PathBuf>,
    #[arg(long)]
    patients_file: Option<String>,
    /// Patient id to chat about; defaults to the first of the pool.
    #[arg(long)]
    patient_id: Option<String>,
    /// Initial evidence for the synthetic pool.
    #[arg(long, default_value = "cough")]
    ie: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t_max: Option<u32>,
    #[arg(long)]
    asset_dir: Option<PathBuf>,
    /// Transcript output file (JSONL, one record).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Oracle: turn at which the doctor informs, or `never`.
    #[arg(long, default_value = "3")]
    oracle_inform_turn: String,
    #[arg(long, default_value_t = 1.0)]
    oracle_correctness: f64,
    #[arg(long)]
    cassette_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file_config = match config::FileConfig::load_optional(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("error: {err:#}");
            return ExitCode::from(EXIT_INTEGRITY);
        }
    };
    let outcome = match cli.command {
        Command::Ingest(args) => commands::ingest::run(args, &file_config),
        Command::Run(args) => commands::run::run(args, &file_config),
        Command::Score(args) => commands::score::run(args, &file_config),
        Command::Report(args) => commands::report::run(args),
        Command::ExportHumanEval(args) => commands::human_eval::run(args, &file_config),
        Command::Chat(args) => commands::chat::run(args, &file_config),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::classify_exit(&err))
        }
    }
}
