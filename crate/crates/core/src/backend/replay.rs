//! Record/replay cassettes: line-delimited records keyed by the request
//! hash. Recording wraps any backend; replaying is a pure lookup, which
//! makes full runs byte-reproducible.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{request_hash, BackendError, CompletionBackend, CompletionRequest, CompletionResponse};

/// One recorded exchange.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub request_hash: String,
    pub request: CompletionRequest,
    pub response: CompletionResponse,
}

/// An in-memory cassette, keyed by request hash.
#[derive(Debug, Default, Clone)]
pub struct Cassette {
    entries: BTreeMap<String, CassetteEntry>,
}

impl Cassette {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entry: CassetteEntry) {
        self.entries.insert(entry.request_hash.clone(), entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, hash: &str) -> Option<&CassetteEntry> {
        self.entries.get(hash)
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, BackendError> {
        let mut cassette = Self::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CassetteEntry = serde_json::from_str(&line)
                .map_err(|e| BackendError::BadResponse(format!("cassette line {}: {e}", i + 1)))?;
            cassette.insert(entry);
        }
        Ok(cassette)
    }

    pub fn from_path(path: &Path) -> Result<Self, BackendError> {
        Self::from_reader(File::open(path)?)
    }

    /// The recorded entry whose prompt shares the longest common prefix with
    /// the given prompt; used to make replay misses debuggable.
    fn nearest_key(&self, prompt: &str) -> Option<String> {
        self.entries
            .values()
            .max_by_key(|entry| common_prefix_len(&entry.request.prompt, prompt))
            .map(|entry| entry.request_hash.clone())
    }
}

fn common_prefix_len(a: &str, b: &str) -> usize {
    a.bytes().zip(b.bytes()).take_while(|(x, y)| x == y).count()
}

/// Serves completions from a cassette; any unknown request is an error.
pub struct ReplayBackend {
    cassette: Cassette,
}

impl ReplayBackend {
    pub fn new(cassette: Cassette) -> Self {
        Self { cassette }
    }

    pub fn from_path(path: &Path) -> Result<Self, BackendError> {
        Ok(Self::new(Cassette::from_path(path)?))
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        if request.prompt.is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        let hash = request_hash(request);
        match self.cassette.get(&hash) {
            Some(entry) => Ok(entry.response.clone()),
            None => Err(BackendError::ReplayMiss {
                nearest: self.cassette.nearest_key(&request.prompt),
                hash,
            }),
        }
    }

    fn name(&self) -> &'static str {
        "replay"
    }
}

/// Wraps a backend and appends every successful exchange to a cassette
/// writer. Safe to share across sessions; writes are serialized.
pub struct RecordingBackend<B> {
    inner: B,
    writer: Mutex<Box<dyn Write + Send>>,
}

impl<B: CompletionBackend> RecordingBackend<B> {
    pub fn new(inner: B, writer: impl Write + Send + 'static) -> Self {
        Self {
            inner,
            writer: Mutex::new(Box::new(writer)),
        }
    }

    pub fn to_path(inner: B, path: &Path) -> Result<Self, BackendError> {
        let file = File::create(path)?;
        Ok(Self::new(inner, BufWriter::new(file)))
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let response = self.inner.complete(request)?;
        let entry = CassetteEntry {
            request_hash: request_hash(request),
            request: request.clone(),
            response: response.clone(),
        };
        let line = serde_json::to_string(&entry)
            .map_err(|e| BackendError::BadResponse(format!("cassette serialization: {e}")))?;
        let mut writer = self.writer.lock().expect("cassette writer poisoned");
        writeln!(writer, "{line}")?;
        writer.flush()?;
        Ok(response)
    }

    fn name(&self) -> &'static str {
        "recording"
    }
}
