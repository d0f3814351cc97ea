//! Shared helpers for the integration suites: synthetic data plus oracle
//! backends wired into a ready-to-run session context.

#![allow(dead_code)]

pub mod stub;

use std::sync::Arc;

use dxchat::backend::{OracleDoctor, OraclePatient, OraclePolicy};
use dxchat::dataset::{Catalogs, PatientRecord};
use dxchat::dialogue::{run_batch, BatchOutcome, SessionConfig};
use dxchat::prompting::PromptAssets;
use dxchat::synthetic::{generate_patients, mini_catalogs};

pub struct Bench {
    pub catalogs: Arc<Catalogs>,
    pub assets: PromptAssets,
    pub records: Vec<PatientRecord>,
    pub doctor: OracleDoctor,
    pub patient: OraclePatient,
}

impl Bench {
    pub fn new(ie: &str, n: usize, seed: u64, policy: OraclePolicy) -> Self {
        let catalogs = Arc::new(mini_catalogs());
        let records = generate_patients(&catalogs, ie, n, seed);
        let doctor = OracleDoctor::new(policy, catalogs.clone(), &records);
        let patient = OraclePatient::new(catalogs.clone(), &records);
        Self {
            catalogs,
            assets: PromptAssets::embedded(),
            records,
            doctor,
            patient,
        }
    }

    pub fn run(&self, config: &SessionConfig) -> BatchOutcome {
        run_batch(
            &self.records,
            &self.catalogs,
            &self.assets,
            &self.doctor,
            &self.patient,
            config,
            4,
        )
    }
}
