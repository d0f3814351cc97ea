//! Self-chat evaluation harness for LLM-based diagnostic dialogue agents.
//!
//! The harness drives doctor/patient conversations over DDXPlus-style
//! patients, renders standard and diagnostic-reasoning (DR-CoT) completion
//! prompts, and scores per-turn diagnostic accuracy. Completion backends are
//! pluggable: a live HTTP endpoint, a record/replay cassette, and rule-based
//! oracles that make every pipeline stage verifiable without a live model.

pub mod backend;
pub mod dataset;
pub mod dialogue;
pub mod evaluation;
pub mod prompting;
pub mod synthetic;
pub mod text;

pub use dataset::{Catalogs, ConditionCatalog, EvidenceCatalog, PatientRecord};
pub use dialogue::{PromptMode, SessionConfig, Transcript};
pub use prompting::PromptAssets;
