//! DDXPlus-style dataset handling: evidence/condition catalogs, patient
//! records, rule-based profile rendering, and deterministic split sampling.

mod load;
mod profile;
mod sample;

pub use load::{
    load_condition_catalog, load_evidence_catalog, load_patients, LoadReport, RowIssue,
};
pub use profile::{build_patient_profile, kickstart_facts, ProfileTemplate};
pub use sample::{pool_size, sample_split, SampleSplit, SplitName};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate evidence code {0:?}")]
    DuplicateEvidence(String),
    #[error("duplicate condition name {0:?}")]
    DuplicateCondition(String),
    #[error("conditions {first:?} and {second:?} normalize to the same name {normalized:?}")]
    AmbiguousCondition {
        first: String,
        second: String,
        normalized: String,
    },
    #[error("unknown evidence code {0:?}")]
    UnknownEvidence(String),
    #[error("unknown condition {0:?}")]
    UnknownCondition(String),
    #[error("evidence descriptor {code:?} is invalid: {reason}")]
    BadDescriptor { code: String, reason: String },
    #[error("evidence assertion {raw:?} is malformed: {reason}")]
    BadAssertion { raw: String, reason: String },
    #[error("record {id:?} violates an invariant: {reason}")]
    InvariantViolation { id: String, reason: String },
    #[error("pool for initial evidence {ie:?} has {pool} patients, requested {requested}")]
    InsufficientPool {
        ie: String,
        pool: usize,
        requested: usize,
    },
    #[error("profile template is invalid: {0}")]
    BadTemplate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How an evidence is answered: yes/no, one value, or several values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    Binary,
    Categorical,
    MultiChoice,
}

/// One entry of the evidence catalog: the question the doctor would ask and
/// the value vocabulary for non-binary evidences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvidenceDescriptor {
    pub code: String,
    pub question_text: String,
    pub kind: EvidenceKind,
    pub possible_values: Vec<String>,
    pub value_texts: BTreeMap<String, String>,
    pub default_value: Option<String>,
}

impl EvidenceDescriptor {
    /// Enforce the kind/value-vocabulary invariants.
    pub fn check(&self) -> Result<(), DatasetError> {
        let bad = |reason: &str| DatasetError::BadDescriptor {
            code: self.code.clone(),
            reason: reason.to_string(),
        };
        match self.kind {
            EvidenceKind::Binary => {
                if !self.possible_values.is_empty() {
                    return Err(bad("binary evidence must not list possible values"));
                }
            }
            EvidenceKind::Categorical | EvidenceKind::MultiChoice => {
                if self.possible_values.is_empty() {
                    return Err(bad("non-binary evidence must list possible values"));
                }
                if let Some(default) = &self.default_value {
                    if !self.possible_values.contains(default) {
                        return Err(bad("default value is not among possible values"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Display text for a value code, falling back to the raw code.
    pub fn value_text<'a>(&'a self, value: &'a str) -> &'a str {
        self.value_texts
            .get(value)
            .map(String::as_str)
            .unwrap_or(value)
    }
}

/// Evidence descriptors keyed by code.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvidenceCatalog {
    by_code: BTreeMap<String, EvidenceDescriptor>,
}

impl EvidenceCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, descriptor: EvidenceDescriptor) -> Result<(), DatasetError> {
        descriptor.check()?;
        if self.by_code.contains_key(&descriptor.code) {
            return Err(DatasetError::DuplicateEvidence(descriptor.code));
        }
        self.by_code.insert(descriptor.code.clone(), descriptor);
        Ok(())
    }

    pub fn get(&self, code: &str) -> Option<&EvidenceDescriptor> {
        self.by_code.get(code)
    }

    pub fn len(&self) -> usize {
        self.by_code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_code.is_empty()
    }

    /// Descriptors in code order.
    pub fn iter(&self) -> impl Iterator<Item = &EvidenceDescriptor> {
        self.by_code.values()
    }

    /// Reverse lookup used by the oracle patient when no machine tag is
    /// present: exact match on the question text.
    pub fn find_by_question(&self, question: &str) -> Option<&EvidenceDescriptor> {
        self.by_code.values().find(|d| d.question_text == question)
    }
}

/// One diagnosable condition, with a precomputed normalized form used for
/// diagnosis matching.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionDescriptor {
    pub name: String,
    pub normalized_name: String,
}

impl ConditionDescriptor {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        let normalized_name = normalize(&name);
        Self {
            name,
            normalized_name,
        }
    }
}

/// Condition descriptors keyed by canonical name.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConditionCatalog {
    by_name: BTreeMap<String, ConditionDescriptor>,
}

impl ConditionCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str) -> Result<(), DatasetError> {
        let descriptor = ConditionDescriptor::new(name);
        if self.by_name.contains_key(&descriptor.name) {
            return Err(DatasetError::DuplicateCondition(descriptor.name));
        }
        if let Some(existing) = self
            .by_name
            .values()
            .find(|d| d.normalized_name == descriptor.normalized_name)
        {
            return Err(DatasetError::AmbiguousCondition {
                first: existing.name.clone(),
                second: descriptor.name,
                normalized: existing.normalized_name.clone(),
            });
        }
        self.by_name.insert(descriptor.name.clone(), descriptor);
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.by_name.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_name.is_empty()
    }

    /// Descriptors in name order.
    pub fn iter(&self) -> impl Iterator<Item = &ConditionDescriptor> {
        self.by_name.values()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.by_name.keys().map(String::as_str)
    }
}

/// Both catalogs, loaded once and shared read-only across sessions.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Catalogs {
    pub evidences: EvidenceCatalog,
    pub conditions: ConditionCatalog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub fn parse(raw: &str) -> Option<Self> {
        match raw.trim() {
            "M" | "m" | "male" | "Male" => Some(Sex::Male),
            "F" | "f" | "female" | "Female" => Some(Sex::Female),
            _ => None,
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sex::Male => write!(f, "male"),
            Sex::Female => write!(f, "female"),
        }
    }
}

/// One evidence a patient experiences, parsed from the DDXPlus
/// `code` / `code_@_value` string convention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceAssertion {
    pub code: String,
    pub value: Option<String>,
}

impl EvidenceAssertion {
    /// Split at the first `_@_`; the value side is kept verbatim.
    pub fn parse(raw: &str) -> Result<Self, DatasetError> {
        let bad = |reason: &str| DatasetError::BadAssertion {
            raw: raw.to_string(),
            reason: reason.to_string(),
        };
        if raw.is_empty() {
            return Err(bad("empty assertion"));
        }
        match raw.split_once("_@_") {
            None => Ok(Self {
                code: raw.to_string(),
                value: None,
            }),
            Some((code, value)) => {
                if value.contains("_@_") {
                    return Err(bad("more than one value separator"));
                }
                if code.is_empty() {
                    return Err(bad("empty code before value separator"));
                }
                Ok(Self {
                    code: code.to_string(),
                    value: Some(value.to_string()),
                })
            }
        }
    }

    /// Re-serialize using the `code[_@_value]` convention.
    pub fn to_raw(&self) -> String {
        match &self.value {
            Some(value) => format!("{}_@_{}", self.code, value),
            None => self.code.clone(),
        }
    }
}

/// One DDXPlus patient. `pathology` is the ground-truth diagnosis and never
/// reaches any prompt; it is used only for scoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub id: String,
    pub age: u32,
    pub sex: Sex,
    pub initial_evidence: String,
    pub evidences: Vec<EvidenceAssertion>,
    pub pathology: String,
}

impl PatientRecord {
    /// Validate the record against the catalogs. Non-binary assertions
    /// without a value are filled from the descriptor's default first.
    pub fn validate(&mut self, catalogs: &Catalogs) -> Result<(), DatasetError> {
        let violation = |id: &str, reason: String| DatasetError::InvariantViolation {
            id: id.to_string(),
            reason,
        };
        for assertion in &mut self.evidences {
            let descriptor = catalogs
                .evidences
                .get(&assertion.code)
                .ok_or_else(|| DatasetError::UnknownEvidence(assertion.code.clone()))?;
            match (descriptor.kind, &assertion.value) {
                (EvidenceKind::Binary, Some(_)) => {
                    return Err(violation(
                        &self.id,
                        format!("binary evidence {:?} carries a value", assertion.code),
                    ));
                }
                (EvidenceKind::Binary, None) => {}
                (_, Some(value)) => {
                    if !descriptor.possible_values.contains(value) {
                        return Err(violation(
                            &self.id,
                            format!(
                                "value {:?} is not allowed for evidence {:?}",
                                value, assertion.code
                            ),
                        ));
                    }
                }
                (_, None) => match &descriptor.default_value {
                    Some(default) => assertion.value = Some(default.clone()),
                    None => {
                        return Err(violation(
                            &self.id,
                            format!(
                                "non-binary evidence {:?} has no value and no default",
                                assertion.code
                            ),
                        ));
                    }
                },
            }
        }
        if catalogs.evidences.get(&self.initial_evidence).is_none() {
            return Err(DatasetError::UnknownEvidence(self.initial_evidence.clone()));
        }
        if !self
            .evidences
            .iter()
            .any(|a| a.code == self.initial_evidence)
        {
            return Err(violation(
                &self.id,
                format!(
                    "initial evidence {:?} does not appear among the evidences",
                    self.initial_evidence
                ),
            ));
        }
        if !catalogs.conditions.contains(&self.pathology) {
            return Err(DatasetError::UnknownCondition(self.pathology.clone()));
        }
        Ok(())
    }

    /// The assertion that carries the initial evidence.
    pub fn initial_assertion(&self) -> Option<&EvidenceAssertion> {
        self.evidences
            .iter()
            .find(|a| a.code == self.initial_evidence)
    }
}
