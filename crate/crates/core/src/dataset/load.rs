//! Loaders for the DDXPlus release files: evidence metadata (JSON map),
//! condition metadata (JSON map), and the patient table (CSV with a
//! bracketed EVIDENCES list per row).

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use serde::de::{self, DeserializeSeed, Deserializer, IgnoredAny, MapAccess, Visitor};
use serde::Deserialize;

use super::{
    Catalogs, ConditionCatalog, DatasetError, EvidenceAssertion, EvidenceCatalog,
    EvidenceDescriptor, EvidenceKind, PatientRecord, Sex,
};

fn json_error(err: &serde_json::Error) -> DatasetError {
    DatasetError::Parse {
        line: err.line(),
        column: err.column(),
        message: err.to_string(),
    }
}

/// A `possible-values` entry may be a string or a bare number.
fn scalar_to_string(value: &serde_json::Value) -> Option<String> {
    match value {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        serde_json::Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

#[derive(Debug, Deserialize)]
struct RawValueMeaning {
    #[serde(default)]
    en: Option<String>,
    #[serde(default)]
    fr: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawEvidence {
    #[serde(default)]
    question_en: Option<String>,
    #[serde(default)]
    code_question: Option<String>,
    #[serde(default)]
    data_type: Option<String>,
    #[serde(rename = "possible-values", alias = "possible_values", default)]
    possible_values: Vec<serde_json::Value>,
    #[serde(default)]
    value_meaning: BTreeMap<String, RawValueMeaning>,
    #[serde(default)]
    default_value: Option<serde_json::Value>,
}

impl RawEvidence {
    fn into_descriptor(self, code: String) -> Result<EvidenceDescriptor, DatasetError> {
        let question_text = self
            .question_en
            .or(self.code_question)
            .unwrap_or_else(|| code.clone());
        let possible_values: Vec<String> = self
            .possible_values
            .iter()
            .filter_map(scalar_to_string)
            .collect();
        let kind = match self.data_type.as_deref() {
            Some("B") => EvidenceKind::Binary,
            Some("C") => EvidenceKind::Categorical,
            Some("M") => EvidenceKind::MultiChoice,
            Some(other) => {
                return Err(DatasetError::BadDescriptor {
                    code,
                    reason: format!("unknown data type {other:?}"),
                })
            }
            None if possible_values.is_empty() => EvidenceKind::Binary,
            None => EvidenceKind::Categorical,
        };
        let value_texts = self
            .value_meaning
            .into_iter()
            .filter_map(|(value, meaning)| meaning.en.or(meaning.fr).map(|text| (value, text)))
            .collect();
        let default_value = self.default_value.as_ref().and_then(scalar_to_string);
        // DDXPlus lists a default even for binary evidences; it is meaningless
        // there, so drop it instead of failing the kind invariant.
        let default_value = match kind {
            EvidenceKind::Binary => None,
            _ => default_value.filter(|v| possible_values.contains(v)),
        };
        Ok(EvidenceDescriptor {
            code,
            question_text,
            kind,
            possible_values: match kind {
                EvidenceKind::Binary => vec![],
                _ => possible_values,
            },
            value_texts,
            default_value,
        })
    }
}

/// Seed that builds an [`EvidenceCatalog`] entry by entry so duplicate keys
/// in the document are caught instead of silently collapsed.
struct EvidenceCatalogSeed;

impl<'de> DeserializeSeed<'de> for EvidenceCatalogSeed {
    type Value = EvidenceCatalog;

    fn deserialize<D>(self, deserializer: D) -> Result<Self::Value, D::Error>
    where
        D: Deserializer<'de>,
    {
        struct CatalogVisitor;

        impl<'de> Visitor<'de> for CatalogVisitor {
            type Value = EvidenceCatalog;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of evidence code to evidence metadata")
            }

            fn visit_map<A>(self, mut map: A) -> Result<Self::Value, A::Error>
            where
                A: MapAccess<'de>,
            {
                let mut catalog = EvidenceCatalog::new();
                while let Some((code, raw)) = map.next_entry::<String, RawEvidence>()? {
                    let descriptor = raw
                        .into_descriptor(code)
                        .map_err(|e| de::Error::custom(e.to_string()))?;
                    catalog
                        .insert(descriptor)
                        .map_err(|e| de::Error::custom(e.to_string()))?;
                }
                Ok(catalog)
            }
        }

        deserializer.deserialize_map(CatalogVisitor)
    }
}

/// Parse DDXPlus evidence metadata. Unknown fields are ignored; duplicate
/// codes and kind/value inconsistencies are integrity errors.
pub fn load_evidence_catalog(source: impl Read) -> Result<EvidenceCatalog, DatasetError> {
    let mut de = serde_json::Deserializer::from_reader(source);
    let catalog = EvidenceCatalogSeed
        .deserialize(&mut de)
        .map_err(|e| json_error(&e))?;
    de.end().map_err(|e| json_error(&e))?;
    Ok(catalog)
}

struct ConditionCatalogSeed;

impl<'de> DeserializeSeed<'de> for ConditionCatalogSeed {
    type Value = ConditionCatalog;

    fn deserialize<D>(self, deserializer: D) -> Result<Self::Value, D::Error>
    where
        D: Deserializer<'de>,
    {
        struct CatalogVisitor;

        impl<'de> Visitor<'de> for CatalogVisitor {
            type Value = ConditionCatalog;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of condition name to condition metadata")
            }

            fn visit_map<A>(self, mut map: A) -> Result<Self::Value, A::Error>
            where
                A: MapAccess<'de>,
            {
                let mut catalog = ConditionCatalog::new();
                while let Some(name) = map.next_key::<String>()? {
                    map.next_value::<IgnoredAny>()?;
                    catalog
                        .insert(&name)
                        .map_err(|e| de::Error::custom(e.to_string()))?;
                }
                Ok(catalog)
            }
        }

        deserializer.deserialize_map(CatalogVisitor)
    }
}

/// Parse DDXPlus condition metadata. The map key is the canonical condition
/// name; colliding normalized names are integrity errors because they would
/// make diagnosis matching ambiguous.
pub fn load_condition_catalog(source: impl Read) -> Result<ConditionCatalog, DatasetError> {
    let mut de = serde_json::Deserializer::from_reader(source);
    let catalog = ConditionCatalogSeed
        .deserialize(&mut de)
        .map_err(|e| json_error(&e))?;
    de.end().map_err(|e| json_error(&e))?;
    Ok(catalog)
}

/// One rejected patient row: the 1-based data row number and the reason.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RowIssue {
    pub row: usize,
    pub reason: String,
}

impl fmt::Display for RowIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}: {}", self.row, self.reason)
    }
}

/// Outcome of a patient-table load: valid records plus the quarantined rows.
#[derive(Debug, Default)]
pub struct LoadReport {
    pub records: Vec<PatientRecord>,
    pub issues: Vec<RowIssue>,
}

impl LoadReport {
    /// Validation report lines, one per quarantined row.
    pub fn report_lines(&self) -> Vec<String> {
        self.issues.iter().map(|i| i.to_string()).collect()
    }
}

/// Parse the bracketed, quoted, comma-separated EVIDENCES cell,
/// e.g. `['toux', 'douleurxx_endroitducorps_@_flanc_droit']`.
fn parse_evidence_list(raw: &str) -> Result<Vec<String>, String> {
    let trimmed = raw.trim();
    let inner = trimmed
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| format!("EVIDENCES cell is not a bracketed list: {trimmed:?}"))?;
    let mut items = Vec::new();
    let mut chars = inner.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\'' | '"' => {
                let quote = c;
                let mut item = String::new();
                loop {
                    match chars.next() {
                        Some(ch) if ch == quote => break,
                        Some(ch) => item.push(ch),
                        None => return Err("unterminated quote in EVIDENCES cell".to_string()),
                    }
                }
                items.push(item);
            }
            ',' | ' ' | '\t' => {}
            other => return Err(format!("unexpected character {other:?} in EVIDENCES cell")),
        }
    }
    Ok(items)
}

fn field<'a>(
    headers: &csv::StringRecord,
    row: &'a csv::StringRecord,
    name: &str,
) -> Result<&'a str, String> {
    let idx = headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| format!("missing column {name:?}"))?;
    row.get(idx)
        .ok_or_else(|| format!("row is missing a value for {name:?}"))
}

/// Load and validate patient rows. Rows violating record invariants are
/// quarantined into the report instead of aborting the ingest; only an
/// unreadable stream is a hard error.
pub fn load_patients(source: impl Read, catalogs: &Catalogs) -> Result<LoadReport, DatasetError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader.headers().map_err(csv_error)?.clone();
    // Prefer an explicit id column; the public release only has the unnamed
    // pandas index, and some exports have neither.
    let id_column = headers
        .iter()
        .position(|h| h == "PATIENT_ID" || h == "ID")
        .or_else(|| headers.iter().position(|h| h.is_empty()));

    let mut report = LoadReport::default();
    for (i, row) in reader.records().enumerate() {
        let row_number = i + 1;
        let row = match row {
            Ok(row) => row,
            Err(err) => {
                report.issues.push(RowIssue {
                    row: row_number,
                    reason: format!("unparseable row: {err}"),
                });
                continue;
            }
        };
        match parse_patient_row(&headers, &row, row_number, id_column, catalogs) {
            Ok(record) => report.records.push(record),
            Err(reason) => report.issues.push(RowIssue {
                row: row_number,
                reason,
            }),
        }
    }
    Ok(report)
}

fn parse_patient_row(
    headers: &csv::StringRecord,
    row: &csv::StringRecord,
    row_number: usize,
    id_column: Option<usize>,
    catalogs: &Catalogs,
) -> Result<PatientRecord, String> {
    let age: i64 = field(headers, row, "AGE")?
        .trim()
        .parse()
        .map_err(|_| "AGE is not an integer".to_string())?;
    if age < 0 {
        return Err(format!("AGE {age} is negative"));
    }
    let sex_raw = field(headers, row, "SEX")?;
    let sex = Sex::parse(sex_raw).ok_or_else(|| format!("unknown SEX value {sex_raw:?}"))?;
    let pathology = field(headers, row, "PATHOLOGY")?.trim().to_string();
    let initial_evidence = field(headers, row, "INITIAL_EVIDENCE")?.trim().to_string();
    let evidences_raw = field(headers, row, "EVIDENCES")?;
    let mut evidences = Vec::new();
    for item in parse_evidence_list(evidences_raw)? {
        let assertion = EvidenceAssertion::parse(&item).map_err(|e| e.to_string())?;
        evidences.push(assertion);
    }
    let id = id_column
        .and_then(|idx| row.get(idx))
        .filter(|v| !v.trim().is_empty())
        .map(|v| v.trim().to_string())
        .unwrap_or_else(|| format!("{row_number:07}"));

    let mut record = PatientRecord {
        id,
        age: age as u32,
        sex,
        initial_evidence,
        evidences,
        pathology,
    };
    record.validate(catalogs).map_err(|e| e.to_string())?;
    Ok(record)
}

fn csv_error(err: csv::Error) -> DatasetError {
    DatasetError::Parse {
        line: 0,
        column: 0,
        message: err.to_string(),
    }
}
