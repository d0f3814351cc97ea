//! Frozen text assets: instructions, sentence templates, and the bundled
//! exemplars. Defaults are embedded in the binary; every piece can be
//! overridden by a file of the same name in a configurable asset directory.
//!
//! The bundled exemplars are reconstructions written for this harness (the
//! differential lists are physician-style but not physician-authored).

use std::fs;
use std::path::Path;

use super::{Exemplar, PromptError};
use crate::dataset::ProfileTemplate;

const STANDARD_INSTRUCTION: &str = include_str!("../../assets/instruction_standard.txt");
const DRCOT_AUGMENTATION: &str = include_str!("../../assets/instruction_drcot_augmentation.txt");
const PATIENT_INSTRUCTION: &str = include_str!("../../assets/instruction_patient.txt");
const PROFILE_TEMPLATE: &str = include_str!("../../assets/profile_template.txt");
const DOCTOR_EXEMPLAR_1: &str = include_str!("../../assets/exemplar_doctor_1.json");
const DOCTOR_EXEMPLAR_2: &str = include_str!("../../assets/exemplar_doctor_2.json");
const PATIENT_EXEMPLAR: &str = include_str!("../../assets/exemplar_patient.json");

/// File names looked up inside an asset directory override.
pub const ASSET_FILES: &[&str] = &[
    "instruction_standard.txt",
    "instruction_drcot_augmentation.txt",
    "instruction_patient.txt",
    "profile_template.txt",
    "exemplar_doctor_1.json",
    "exemplar_doctor_2.json",
    "exemplar_patient.json",
];

/// The embedded profile/kickstart sentence templates.
pub fn default_profile_template() -> ProfileTemplate {
    ProfileTemplate::parse(PROFILE_TEMPLATE).expect("embedded profile template is valid")
}

/// Everything the prompt renderers need, loaded once per run.
#[derive(Debug, Clone)]
pub struct PromptAssets {
    pub standard_instruction: String,
    pub drcot_augmentation: String,
    pub patient_instruction: String,
    pub doctor_shots: Vec<Exemplar>,
    pub patient_shot: Exemplar,
    pub profile_template: ProfileTemplate,
}

impl PromptAssets {
    /// The shipped defaults.
    pub fn embedded() -> Self {
        let assets = Self {
            standard_instruction: STANDARD_INSTRUCTION.trim_end().to_string(),
            drcot_augmentation: DRCOT_AUGMENTATION.trim_end().to_string(),
            patient_instruction: PATIENT_INSTRUCTION.trim_end().to_string(),
            doctor_shots: vec![
                parse_exemplar("exemplar_doctor_1.json", DOCTOR_EXEMPLAR_1)
                    .expect("embedded exemplar 1 is valid"),
                parse_exemplar("exemplar_doctor_2.json", DOCTOR_EXEMPLAR_2)
                    .expect("embedded exemplar 2 is valid"),
            ],
            patient_shot: parse_exemplar("exemplar_patient.json", PATIENT_EXEMPLAR)
                .expect("embedded patient exemplar is valid"),
            profile_template: default_profile_template(),
        };
        assets.validate().expect("embedded assets are consistent");
        assets
    }

    /// Load assets from a directory, falling back to the embedded default
    /// for any file that is absent.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut assets = Self::embedded();
        let read = |name: &str| -> Result<Option<String>, PromptError> {
            let path = dir.join(name);
            if path.exists() {
                Ok(Some(fs::read_to_string(&path)?))
            } else {
                Ok(None)
            }
        };
        if let Some(text) = read("instruction_standard.txt")? {
            assets.standard_instruction = text.trim_end().to_string();
        }
        if let Some(text) = read("instruction_drcot_augmentation.txt")? {
            assets.drcot_augmentation = text.trim_end().to_string();
        }
        if let Some(text) = read("instruction_patient.txt")? {
            assets.patient_instruction = text.trim_end().to_string();
        }
        if let Some(text) = read("profile_template.txt")? {
            assets.profile_template =
                ProfileTemplate::parse(&text).map_err(|e| PromptError::AssetParse {
                    name: "profile_template.txt".into(),
                    reason: e.to_string(),
                })?;
        }
        if let Some(text) = read("exemplar_doctor_1.json")? {
            assets.doctor_shots[0] = parse_exemplar("exemplar_doctor_1.json", &text)?;
        }
        if let Some(text) = read("exemplar_doctor_2.json")? {
            assets.doctor_shots[1] = parse_exemplar("exemplar_doctor_2.json", &text)?;
        }
        if let Some(text) = read("exemplar_patient.json")? {
            assets.patient_shot = parse_exemplar("exemplar_patient.json", &text)?;
        }
        assets.validate()?;
        Ok(assets)
    }

    fn validate(&self) -> Result<(), PromptError> {
        if self.standard_instruction.trim().is_empty() {
            return Err(PromptError::EmptyInstruction);
        }
        for shot in &self.doctor_shots {
            shot.validate()?;
            if !shot.has_thoughts() {
                return Err(PromptError::MisalignedThoughts(
                    "doctor exemplars must carry thoughts for the reasoning mode".into(),
                ));
            }
        }
        self.patient_shot.validate()?;
        if self.patient_shot.profile.is_none() {
            return Err(PromptError::InvalidExemplar(
                "patient exemplar must carry its profile".into(),
            ));
        }
        Ok(())
    }
}

fn parse_exemplar(name: &str, text: &str) -> Result<Exemplar, PromptError> {
    let exemplar: Exemplar = serde_json::from_str(text).map_err(|e| PromptError::AssetParse {
        name: name.to_string(),
        reason: e.to_string(),
    })?;
    exemplar.validate()?;
    Ok(exemplar)
}
