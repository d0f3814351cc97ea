//! Transcript persistence: one JSON record per session, line-delimited,
//! schema-versioned via the `schema_version` field on every record.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{SessionError, Transcript};

pub fn write_transcripts(path: &Path, transcripts: &[Transcript]) -> Result<(), SessionError> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    for transcript in transcripts {
        let line = serde_json::to_string(transcript)
            .map_err(|e| SessionError::Invariant(format!("transcript serialization: {e}")))?;
        writeln!(writer, "{line}")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_transcripts_from(reader: impl Read) -> Result<Vec<Transcript>, SessionError> {
    let mut transcripts = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let transcript: Transcript =
            serde_json::from_str(&line).map_err(|e| SessionError::Corrupt {
                line: i + 1,
                reason: e.to_string(),
            })?;
        transcripts.push(transcript);
    }
    Ok(transcripts)
}

pub fn read_transcripts(path: &Path) -> Result<Vec<Transcript>, SessionError> {
    read_transcripts_from(File::open(path)?)
}
