//! Deterministic evaluation-split sampling over initial-evidence pools.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, PatientRecord};

/// The three named splits plus free-form custom splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitName {
    #[serde(rename = "ID")]
    Id,
    #[serde(rename = "OD1")]
    Od1,
    #[serde(rename = "OD2")]
    Od2,
    #[serde(untagged)]
    Custom(String),
}

impl SplitName {
    pub fn parse(raw: &str) -> Self {
        match raw {
            "ID" | "id" => SplitName::Id,
            "OD1" | "od1" => SplitName::Od1,
            "OD2" | "od2" => SplitName::Od2,
            other => SplitName::Custom(other.to_string()),
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitName::Id => write!(f, "ID"),
            SplitName::Od1 => write!(f, "OD1"),
            SplitName::Od2 => write!(f, "OD2"),
            SplitName::Custom(name) => write!(f, "{name}"),
        }
    }
}

/// A seeded sample of patient ids sharing one initial evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSplit {
    pub name: SplitName,
    pub ie_code: String,
    pub patient_ids: Vec<String>,
    pub seed: u64,
}

/// Sample `n` patients uniformly without replacement from the pool whose
/// initial evidence equals `ie_code`. The pool is sorted by patient id
/// before sampling, so the result does not depend on input order.
pub fn sample_split(
    patients: &[PatientRecord],
    name: SplitName,
    ie_code: &str,
    n: usize,
    seed: u64,
) -> Result<SampleSplit, DatasetError> {
    let mut pool: Vec<&PatientRecord> = patients
        .iter()
        .filter(|p| p.initial_evidence == ie_code)
        .collect();
    pool.sort_by(|a, b| a.id.cmp(&b.id));
    pool.dedup_by(|a, b| a.id == b.id);
    if pool.len() < n {
        return Err(DatasetError::InsufficientPool {
            ie: ie_code.to_string(),
            pool: pool.len(),
            requested: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, pool.len(), n);
    let patient_ids = chosen.iter().map(|i| pool[i].id.clone()).collect();
    Ok(SampleSplit {
        name,
        ie_code: ie_code.to_string(),
        patient_ids,
        seed,
    })
}

/// Size of the pool for one initial evidence.
pub fn pool_size(patients: &[PatientRecord], ie_code: &str) -> usize {
    patients
        .iter()
        .filter(|p| p.initial_evidence == ie_code)
        .count()
}
