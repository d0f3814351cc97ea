//! Resolve catalogs and patients from either the real release directory or
//! the built-in synthetic generator.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};

use dxchat::dataset::{
    load_condition_catalog, load_evidence_catalog, load_patients, Catalogs, LoadReport,
    PatientRecord,
};
use dxchat::synthetic::{generate_patients, mini_catalogs};

pub const EVIDENCES_FILE: &str = "release_evidences.json";
pub const CONDITIONS_FILE: &str = "release_conditions.json";
pub const DEFAULT_PATIENTS_FILE: &str = "release_test_patients.csv";

/// Where patients come from; recorded in the manifest so scoring can
/// rebuild the same pool.
#[derive(Debug, Clone)]
pub enum DataSource {
    Dataset {
        dir: PathBuf,
        patients_file: String,
    },
    Synthetic {
        ie_code: String,
        pool: usize,
        seed: u64,
    },
}

impl DataSource {
    pub fn label(&self) -> String {
        match self {
            DataSource::Dataset { dir, patients_file } => {
                format!("{}/{patients_file}", dir.display())
            }
            DataSource::Synthetic {
                ie_code,
                pool,
                seed,
            } => {
                format!("synthetic:{ie_code}:{pool}:{seed}")
            }
        }
    }

    pub fn parse_label(label: &str) -> anyhow::Result<Self> {
        if let Some(rest) = label.strip_prefix("synthetic:") {
            let mut parts = rest.split(':');
            let (Some(ie), Some(pool), Some(seed)) = (parts.next(), parts.next(), parts.next())
            else {
                bail!("malformed synthetic data source {label:?}");
            };
            return Ok(DataSource::Synthetic {
                ie_code: ie.to_string(),
                pool: pool.parse()?,
                seed: seed.parse()?,
            });
        }
        let path = PathBuf::from(label);
        let (Some(dir), Some(file)) = (path.parent(), path.file_name()) else {
            bail!("malformed dataset source {label:?}");
        };
        Ok(DataSource::Dataset {
            dir: dir.to_path_buf(),
            patients_file: file.to_string_lossy().into_owned(),
        })
    }
}

pub struct ResolvedData {
    pub catalogs: Arc<Catalogs>,
    pub records: Vec<PatientRecord>,
    pub issues: Vec<String>,
}

pub fn load_release_catalogs(dir: &Path) -> anyhow::Result<Catalogs> {
    let evidences_path = dir.join(EVIDENCES_FILE);
    let conditions_path = dir.join(CONDITIONS_FILE);
    let evidences = load_evidence_catalog(
        File::open(&evidences_path)
            .with_context(|| format!("missing evidence file {}", evidences_path.display()))?,
    )?;
    let conditions = load_condition_catalog(
        File::open(&conditions_path)
            .with_context(|| format!("missing condition file {}", conditions_path.display()))?,
    )?;
    Ok(Catalogs {
        evidences,
        conditions,
    })
}

pub fn load_release(dir: &Path, patients_file: &str) -> anyhow::Result<(Catalogs, LoadReport)> {
    let catalogs = load_release_catalogs(dir)?;
    let patients_path = dir.join(patients_file);
    let report = load_patients(
        File::open(&patients_path)
            .with_context(|| format!("missing patient file {}", patients_path.display()))?,
        &catalogs,
    )?;
    Ok((catalogs, report))
}

pub fn resolve(source: &DataSource) -> anyhow::Result<ResolvedData> {
    match source {
        DataSource::Dataset { dir, patients_file } => {
            let (catalogs, report) = load_release(dir, patients_file)?;
            let issues = report.report_lines();
            Ok(ResolvedData {
                catalogs: Arc::new(catalogs),
                records: report.records,
                issues,
            })
        }
        DataSource::Synthetic {
            ie_code,
            pool,
            seed,
        } => {
            let catalogs = Arc::new(mini_catalogs());
            let records = generate_patients(&catalogs, ie_code, *pool, *seed);
            Ok(ResolvedData {
                catalogs,
                records,
                issues: Vec::new(),
            })
        }
    }
}
