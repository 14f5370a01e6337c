//! Record/replay wrapper: a JSONL log of digest-keyed responses.
//!
//! Record mode forwards misses to the wrapped provider and appends each fresh
//! response to the log; hits are served from memory, so a resumed run never
//! re-pays for a call it already made. Strict mode serves only from the log
//! and errors on any miss, which makes reruns byte-reproducible and offline.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use panel_core::chat::{ChatRequest, ChatResponse};
use serde::{Deserialize, Serialize};

use super::{ChatProvider, ProviderError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayMode {
    Record,
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub digest: String,
    pub tag: String,
    pub response: ChatResponse,
}

pub struct ReplayProvider {
    inner: Option<Arc<dyn ChatProvider>>,
    mode: ReplayMode,
    path: PathBuf,
    state: Mutex<State>,
    label: String,
}

struct State {
    map: HashMap<String, ChatResponse>,
    writer: Option<BufWriter<File>>,
}

fn log_error(path: &Path, e: impl std::fmt::Display) -> ProviderError {
    ProviderError::ReplayLog(format!("{}: {e}", path.display()))
}

/// Reads a replay log; tolerates a missing file by returning no entries.
pub fn load_log(path: &Path) -> Result<Vec<ReplayEntry>, ProviderError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(|e| log_error(path, e))?;
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| log_error(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ReplayEntry = serde_json::from_str(&line)
            .map_err(|e| log_error(path, format!("line {}: {e}", i + 1)))?;
        entries.push(entry);
    }
    Ok(entries)
}

impl ReplayProvider {
    /// Record mode: cache-or-call-and-append around `inner`. An existing log
    /// at `path` is loaded first, so interrupted runs resume for free.
    pub fn record(inner: Arc<dyn ChatProvider>, path: impl Into<PathBuf>) -> Result<ReplayProvider, ProviderError> {
        let path = path.into();
        let map: HashMap<String, ChatResponse> =
            load_log(&path)?.into_iter().map(|e| (e.digest, e.response)).collect();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| log_error(&path, e))?;
        let label = inner.descriptor();
        Ok(ReplayProvider {
            inner: Some(inner),
            mode: ReplayMode::Record,
            state: Mutex::new(State { map, writer: Some(BufWriter::new(file)) }),
            path,
            label,
        })
    }

    /// Strict mode: serve from the log only.
    pub fn strict(path: impl Into<PathBuf>) -> Result<ReplayProvider, ProviderError> {
        let path = path.into();
        if !path.exists() {
            return Err(log_error(&path, "replay log not found"));
        }
        let map: HashMap<String, ChatResponse> =
            load_log(&path)?.into_iter().map(|e| (e.digest, e.response)).collect();
        let label = "replay-strict".to_string();
        Ok(ReplayProvider {
            inner: None,
            mode: ReplayMode::Strict,
            state: Mutex::new(State { map, writer: None }),
            path,
            label,
        })
    }

    /// Strict mode over a log, but reporting the original provider's
    /// descriptor so replayed runs snapshot identically to recorded ones.
    pub fn strict_as(path: impl Into<PathBuf>, descriptor: &str) -> Result<ReplayProvider, ProviderError> {
        let mut provider = ReplayProvider::strict(path)?;
        provider.label = descriptor.to_string();
        Ok(provider)
    }

    pub fn mode(&self) -> ReplayMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.state.lock().unwrap().map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ChatProvider for ReplayProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let digest = request.digest();
        {
            let state = self.state.lock().unwrap();
            if let Some(hit) = state.map.get(&digest) {
                return Ok(hit.clone());
            }
        }
        let Some(inner) = &self.inner else {
            return Err(ProviderError::ReplayMiss { digest, tag: request.tag.clone() });
        };
        let response = inner.complete(request)?;
        let mut state = self.state.lock().unwrap();
        if let Some(prior) = state.map.get(&digest) {
            return Ok(prior.clone());
        }
        state.map.insert(digest.clone(), response.clone());
        if let Some(writer) = &mut state.writer {
            let entry = ReplayEntry { digest, tag: request.tag.clone(), response: response.clone() };
            let line = serde_json::to_string(&entry).expect("replay entries serialize");
            writer
                .write_all(line.as_bytes())
                .and_then(|_| writer.write_all(b"\n"))
                .and_then(|_| writer.flush())
                .map_err(|e| log_error(&self.path, e))?;
        }
        Ok(response)
    }

    fn descriptor(&self) -> String {
        self.label.clone()
    }
}
