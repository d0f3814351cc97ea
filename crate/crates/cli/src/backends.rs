//! Build doctor/patient backend pairs from command-line options: oracles
//! over the sampled roster, a shared HTTP client, or replay cassettes, each
//! optionally wrapped in a recorder.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::ValueEnum;

use dxchat::backend::{
    CompletionBackend, HttpBackend, HttpBackendConfig, OracleDoctor, OraclePatient, OraclePolicy,
    QuestionOrder, RecordingBackend, ReplayBackend,
};
use dxchat::dataset::{Catalogs, PatientRecord};

pub const DOCTOR_CASSETTE: &str = "cassette_doctor.jsonl";
pub const PATIENT_CASSETTE: &str = "cassette_patient.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Oracle,
    Http,
    Replay,
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendKind::Oracle => write!(f, "oracle"),
            BackendKind::Http => write!(f, "http"),
            BackendKind::Replay => write!(f, "replay"),
        }
    }
}

/// Resolved backend options for one run.
#[derive(Debug, Clone)]
pub struct BackendSpec {
    pub kind: BackendKind,
    pub http: HttpBackendConfig,
    pub oracle: OraclePolicy,
    /// Directory holding the doctor/patient cassettes for replay.
    pub cassette_dir: Option<PathBuf>,
    /// Record every completion into the run directory's cassettes.
    pub record: bool,
}

pub struct BackendPair {
    pub doctor: Box<dyn CompletionBackend>,
    pub patient: Box<dyn CompletionBackend>,
    pub label: String,
}

/// Oracle policy knobs shared by `run` and `chat`.
pub fn oracle_policy(
    inform_turn: &str,
    correctness: f64,
    probe_correct: bool,
    seed: u64,
) -> anyhow::Result<OraclePolicy> {
    let inform_turn = match inform_turn {
        "never" => None,
        raw => Some(
            raw.parse::<u32>()
                .context("--oracle-inform-turn takes a turn number or `never`")?,
        ),
    };
    if let Some(k) = inform_turn {
        if k < 1 {
            bail!("--oracle-inform-turn must be at least 1");
        }
    }
    if !(0.0..=1.0).contains(&correctness) {
        bail!("--oracle-correctness must be within [0, 1]");
    }
    Ok(OraclePolicy {
        inform_turn,
        correctness,
        question_order: QuestionOrder::RecordOrder,
        seed,
        probe_correct_before_inform: probe_correct,
    })
}

fn wrap_recording(
    backend: impl CompletionBackend + 'static,
    record_to: Option<&Path>,
) -> anyhow::Result<Box<dyn CompletionBackend>> {
    Ok(match record_to {
        Some(path) => Box::new(
            RecordingBackend::to_path(backend, path)
                .with_context(|| format!("opening cassette {}", path.display()))?,
        ),
        None => Box::new(backend),
    })
}

/// Materialize the doctor and patient backends for a batch over `records`.
pub fn build_pair(
    spec: &BackendSpec,
    catalogs: &Arc<Catalogs>,
    records: &[PatientRecord],
    run_dir: &Path,
) -> anyhow::Result<BackendPair> {
    let record_paths = spec.record.then(|| {
        (
            run_dir.join(DOCTOR_CASSETTE),
            run_dir.join(PATIENT_CASSETTE),
        )
    });
    let (doctor_rec, patient_rec) = match &record_paths {
        Some((d, p)) => (Some(d.as_path()), Some(p.as_path())),
        None => (None, None),
    };
    let pair = match spec.kind {
        BackendKind::Oracle => {
            let doctor = OracleDoctor::new(spec.oracle.clone(), catalogs.clone(), records);
            let patient = OraclePatient::new(catalogs.clone(), records);
            BackendPair {
                doctor: wrap_recording(doctor, doctor_rec)?,
                patient: wrap_recording(patient, patient_rec)?,
                label: format!(
                    "oracle(inform_turn={:?}, correctness={})",
                    spec.oracle.inform_turn, spec.oracle.correctness
                ),
            }
        }
        BackendKind::Http => {
            let shared = Arc::new(HttpBackend::new(spec.http.clone())?);
            BackendPair {
                doctor: wrap_recording(shared.clone(), doctor_rec)?,
                patient: wrap_recording(shared, patient_rec)?,
                label: format!("http({})", spec.http.endpoint),
            }
        }
        BackendKind::Replay => {
            let dir = spec
                .cassette_dir
                .as_deref()
                .context("--backend replay requires --cassette-dir")?;
            let doctor = ReplayBackend::from_path(&dir.join(DOCTOR_CASSETTE))?;
            let patient = ReplayBackend::from_path(&dir.join(PATIENT_CASSETTE))?;
            BackendPair {
                doctor: Box::new(doctor),
                patient: Box::new(patient),
                label: format!("replay({})", dir.display()),
            }
        }
    };
    Ok(pair)
}
