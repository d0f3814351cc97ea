//! Bounded-parallelism batch runner. One session stays strictly sequential;
//! many sessions share the (thread-safe) backends across a fixed number of
//! worker threads. Results come back in input order regardless of which
//! worker finished first.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::session::{run_session, SessionContext};
use super::{SessionConfig, SessionError, Transcript};
use crate::backend::CompletionBackend;
use crate::dataset::{Catalogs, PatientRecord};
use crate::prompting::PromptAssets;

/// Result of a batch run: transcripts in input order plus per-patient
/// failures (a failure does not abort the rest of the batch).
#[derive(Debug)]
pub struct BatchOutcome {
    pub transcripts: Vec<Transcript>,
    pub failures: Vec<(String, SessionError)>,
}

impl BatchOutcome {
    pub fn all_succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Run one session per record with at most `parallelism` sessions in flight.
pub fn run_batch(
    records: &[PatientRecord],
    catalogs: &Catalogs,
    assets: &PromptAssets,
    doctor: &dyn CompletionBackend,
    patient: &dyn CompletionBackend,
    config: &SessionConfig,
    parallelism: usize,
) -> BatchOutcome {
    let width = parallelism.clamp(1, records.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<Transcript, SessionError>>>> =
        Mutex::new((0..records.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..width {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                if index >= records.len() {
                    break;
                }
                let ctx = SessionContext {
                    record: &records[index],
                    catalogs,
                    assets,
                    doctor,
                    patient,
                };
                let result = run_session(ctx, config);
                slots.lock().expect("batch slots poisoned")[index] = Some(result);
            });
        }
    });

    let mut outcome = BatchOutcome {
        transcripts: Vec::with_capacity(records.len()),
        failures: Vec::new(),
    };
    for (record, slot) in records
        .iter()
        .zip(slots.into_inner().expect("batch slots poisoned"))
    {
        match slot.expect("every slot is filled") {
            Ok(transcript) => outcome.transcripts.push(transcript),
            Err(error) => outcome.failures.push((record.id.clone(), error)),
        }
    }
    outcome
}
