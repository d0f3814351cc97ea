//! Rule-based rendering of patient profiles and the dialogue-opening
//! utterance. The sentence templates are a frozen text asset so rendered
//! prompts stay byte-stable across releases.

use super::{Catalogs, DatasetError, EvidenceAssertion, EvidenceKind, PatientRecord};

/// Sentence templates with `{age}`, `{sex}`, `{question}`, `{value}`
/// placeholders, parsed from a `key = value` asset file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileTemplate {
    pub background: String,
    pub binary: String,
    pub valued: String,
    pub kickstart_binary: String,
    pub kickstart_valued: String,
}

impl ProfileTemplate {
    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let mut background = None;
        let mut binary = None;
        let mut valued = None;
        let mut kickstart_binary = None;
        let mut kickstart_valued = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                DatasetError::BadTemplate(format!("not a key = value line: {line:?}"))
            })?;
            let value = value.trim().to_string();
            match key.trim() {
                "background" => background = Some(value),
                "binary" => binary = Some(value),
                "valued" => valued = Some(value),
                "kickstart_binary" => kickstart_binary = Some(value),
                "kickstart_valued" => kickstart_valued = Some(value),
                other => {
                    return Err(DatasetError::BadTemplate(format!(
                        "unknown template key {other:?}"
                    )))
                }
            }
        }
        let need = |name: &str, v: Option<String>| {
            v.ok_or_else(|| DatasetError::BadTemplate(format!("missing template key {name:?}")))
        };
        Ok(Self {
            background: need("background", background)?,
            binary: need("binary", binary)?,
            valued: need("valued", valued)?,
            kickstart_binary: need("kickstart_binary", kickstart_binary)?,
            kickstart_valued: need("kickstart_valued", kickstart_valued)?,
        })
    }

    fn fill(template: &str, record: &PatientRecord, question: &str, value: &str) -> String {
        template
            .replace("{age}", &record.age.to_string())
            .replace("{sex}", &record.sex.to_string())
            .replace("{question}", question)
            .replace("{value}", value)
    }

    fn evidence_sentence(
        &self,
        record: &PatientRecord,
        catalogs: &Catalogs,
        assertion: &EvidenceAssertion,
    ) -> Result<String, DatasetError> {
        let descriptor = catalogs
            .evidences
            .get(&assertion.code)
            .ok_or_else(|| DatasetError::UnknownEvidence(assertion.code.clone()))?;
        Ok(match (&descriptor.kind, &assertion.value) {
            (EvidenceKind::Binary, _) | (_, None) => {
                Self::fill(&self.binary, record, &descriptor.question_text, "")
            }
            (_, Some(value)) => Self::fill(
                &self.valued,
                record,
                &descriptor.question_text,
                descriptor.value_text(value),
            ),
        })
    }
}

/// Render the profile text `P`: one background sentence followed by one
/// sentence per evidence assertion, in record order. The pathology never
/// enters the profile. Identical records render to identical bytes.
pub fn build_patient_profile(
    record: &PatientRecord,
    catalogs: &Catalogs,
    template: &ProfileTemplate,
) -> Result<String, DatasetError> {
    let mut sentences = vec![ProfileTemplate::fill(&template.background, record, "", "")];
    for assertion in &record.evidences {
        sentences.push(template.evidence_sentence(record, catalogs, assertion)?);
    }
    Ok(sentences.join(" "))
}

/// Render the opening patient utterance, disclosing exactly the age, sex,
/// and initial evidence. This becomes `a_0` and the head of the dialogue
/// history.
pub fn kickstart_facts(
    record: &PatientRecord,
    catalogs: &Catalogs,
    template: &ProfileTemplate,
) -> Result<String, DatasetError> {
    let descriptor = catalogs
        .evidences
        .get(&record.initial_evidence)
        .ok_or_else(|| DatasetError::UnknownEvidence(record.initial_evidence.clone()))?;
    let assertion = record.initial_assertion();
    let value = assertion.and_then(|a| a.value.as_deref());
    Ok(match (&descriptor.kind, value) {
        (EvidenceKind::Binary, _) | (_, None) => ProfileTemplate::fill(
            &template.kickstart_binary,
            record,
            &descriptor.question_text,
            "",
        ),
        (_, Some(value)) => ProfileTemplate::fill(
            &template.kickstart_valued,
            record,
            &descriptor.question_text,
            descriptor.value_text(value),
        ),
    })
}
