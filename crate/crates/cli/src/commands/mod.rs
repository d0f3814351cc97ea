pub mod chat;
pub mod human_eval;
pub mod ingest;
pub mod report;
pub mod run;
pub mod score;

use crate::EXIT_INTEGRITY;

/// Map an error chain onto the documented exit codes: dataset and input
/// integrity problems exit 2, everything else 1.
pub fn classify_exit(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause
            .downcast_ref::<dxchat::dataset::DatasetError>()
            .is_some()
        {
            return EXIT_INTEGRITY;
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            if io.kind() == std::io::ErrorKind::NotFound {
                return EXIT_INTEGRITY;
            }
        }
    }
    crate::EXIT_SESSIONS
}
