//! A small synthetic dataset in the same shape as the real release: a
//! handful of evidences and conditions plus seeded patient generation.
//! Used by the verification suites and by demo runs when the real dataset
//! is not on disk. Condition names are invented so they can never collide
//! with question wording.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{
    Catalogs, ConditionCatalog, EvidenceAssertion, EvidenceCatalog, EvidenceDescriptor,
    EvidenceKind, PatientRecord, Sex,
};

/// Initial-evidence codes for the three synthetic pools.
pub const SYN_IE_CODES: [&str; 3] = ["cough", "short_breath", "runny_nose"];

fn binary(code: &str, question: &str) -> EvidenceDescriptor {
    EvidenceDescriptor {
        code: code.into(),
        question_text: question.into(),
        kind: EvidenceKind::Binary,
        possible_values: vec![],
        value_texts: BTreeMap::new(),
        default_value: None,
    }
}

/// The synthetic catalogs: ten evidences (eight binary, one categorical,
/// one multi-choice) and six conditions, two of which nest so the
/// longest-match rule is exercised.
pub fn mini_catalogs() -> Catalogs {
    let mut evidences = EvidenceCatalog::new();
    for (code, question) in [
        ("cough", "Do you have a cough?"),
        ("short_breath", "Are you experiencing shortness of breath?"),
        ("runny_nose", "Do you have a runny nose?"),
        ("fever", "Do you have a fever?"),
        ("sore_throat", "Do you have a sore throat?"),
        ("smoker", "Do you smoke cigarettes?"),
        ("chills", "Do you have chills or shivers?"),
        ("fatigue", "Do you feel more tired than usual?"),
    ] {
        evidences.insert(binary(code, question)).unwrap();
    }
    evidences
        .insert(EvidenceDescriptor {
            code: "pain_location".into(),
            question_text: "Where do you feel pain?".into(),
            kind: EvidenceKind::Categorical,
            possible_values: vec!["left_side".into(), "right_side".into(), "center".into()],
            value_texts: BTreeMap::from([
                ("left_side".into(), "on the left side".into()),
                ("right_side".into(), "on the right side".into()),
                ("center".into(), "in the center of the chest".into()),
            ]),
            default_value: Some("center".into()),
        })
        .unwrap();
    evidences
        .insert(EvidenceDescriptor {
            code: "trigger".into(),
            question_text: "What seems to trigger your symptoms?".into(),
            kind: EvidenceKind::MultiChoice,
            possible_values: vec!["exercise".into(), "cold_air".into(), "dust".into()],
            value_texts: BTreeMap::from([
                ("exercise".into(), "physical exercise".into()),
                ("cold_air".into(), "cold air".into()),
                ("dust".into(), "dusty rooms".into()),
            ]),
            default_value: Some("dust".into()),
        })
        .unwrap();

    let mut conditions = ConditionCatalog::new();
    for name in [
        "Amberitis",
        "Viral amberitis",
        "Coralline fever",
        "Duskwood flu",
        "Silverpine chill",
        "Marrowpox",
    ] {
        conditions.insert(name).unwrap();
    }
    Catalogs {
        evidences,
        conditions,
    }
}

/// Generate `n` patients whose initial evidence is `ie_code`, seeded and
/// ordered deterministically. Ids embed the pool and index.
pub fn generate_patients(
    catalogs: &Catalogs,
    ie_code: &str,
    n: usize,
    seed: u64,
) -> Vec<PatientRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ie_hash(ie_code));
    let extra_codes: Vec<String> = catalogs
        .evidences
        .iter()
        .map(|d| d.code.clone())
        .filter(|c| c != ie_code)
        .collect();
    let condition_names: Vec<String> = catalogs.conditions.names().map(String::from).collect();
    (0..n)
        .map(|i| {
            let mut evidences = vec![EvidenceAssertion {
                code: ie_code.to_string(),
                value: None,
            }];
            let extra = rng.gen_range(2..=5.min(extra_codes.len()));
            let mut picked = extra_codes.clone();
            picked.shuffle(&mut rng);
            for code in picked.into_iter().take(extra) {
                let descriptor = catalogs.evidences.get(&code).expect("known code");
                let value = match descriptor.kind {
                    EvidenceKind::Binary => None,
                    _ => Some(
                        descriptor.possible_values
                            [rng.gen_range(0..descriptor.possible_values.len())]
                        .clone(),
                    ),
                };
                evidences.push(EvidenceAssertion { code, value });
            }
            let pathology = condition_names[rng.gen_range(0..condition_names.len())].clone();
            let mut record = PatientRecord {
                id: format!("syn-{ie_code}-{i:04}"),
                age: rng.gen_range(1..=90),
                sex: if rng.gen() { Sex::Male } else { Sex::Female },
                initial_evidence: ie_code.to_string(),
                evidences,
                pathology,
            };
            record
                .validate(catalogs)
                .expect("synthetic records are valid");
            record
        })
        .collect()
}

fn ie_hash(code: &str) -> u64 {
    code.bytes()
        .fold(0u64, |acc, b| acc.wrapping_mul(31).wrapping_add(b as u64))
}
