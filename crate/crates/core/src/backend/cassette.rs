use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{BackendError, CompletionRequest, GenerationSettings, LlmBackend};

/// One recorded backend call. Exactly one of `response` / `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub node_id: String,
    pub prompt_sha256: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<BackendError>,
    pub settings: GenerationSettings,
}

impl CassetteEntry {
    fn new(request: &CompletionRequest<'_>, result: &Result<String, BackendError>) -> Self {
        CassetteEntry {
            node_id: request.node_id.to_owned(),
            prompt_sha256: prompt_digest(request.prompt),
            prompt: request.prompt.to_owned(),
            response: result.as_ref().ok().cloned(),
            error: result.as_ref().err().cloned(),
            settings: request.settings.clone(),
        }
    }

    fn to_line(&self) -> String {
        serde_json::to_string(self).expect("cassette entries always serialize")
    }
}

pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Error)]
pub enum CassetteError {
    #[error("cassette I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cassette line {line}: {message}")]
    Format { line: usize, message: String },
}

/// JSON-lines log of backend calls.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Cassette {
    pub entries: Vec<CassetteEntry>,
}

impl Cassette {
    pub fn from_jsonl(text: &str) -> Result<Self, CassetteError> {
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, line)| {
                let entry: CassetteEntry = serde_json::from_str(line).map_err(|e| CassetteError::Format {
                    line: i + 1,
                    message: e.to_string(),
                })?;
                if entry.response.is_some() == entry.error.is_some() {
                    return Err(CassetteError::Format {
                        line: i + 1,
                        message: "entry needs exactly one of 'response' or 'error'".into(),
                    });
                }
                Ok(entry)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Cassette { entries })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&entry.to_line());
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self, CassetteError> {
        let text = fs::read_to_string(path).map_err(|source| CassetteError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_jsonl(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), CassetteError> {
        fs::write(path, self.to_jsonl()).map_err(|source| CassetteError::Io {
            path: path.to_owned(),
            source,
        })
    }
}

/// Passes calls through to `inner` and appends each one, success or
/// failure, to a cassette file.
pub struct RecordingBackend<B> {
    inner: B,
    path: PathBuf,
    sink: Mutex<BufWriter<File>>,
}

/// Wrap `inner` so that every call is recorded to a fresh cassette at `path`.
pub fn record_and_wrap<B: LlmBackend>(inner: B, path: &Path) -> Result<RecordingBackend<B>, CassetteError> {
    let file = File::create(path).map_err(|source| CassetteError::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(RecordingBackend {
        inner,
        path: path.to_owned(),
        sink: Mutex::new(BufWriter::new(file)),
    })
}

impl<B> RecordingBackend<B> {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: LlmBackend> LlmBackend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let result = self.inner.complete(request);
        let line = CassetteEntry::new(request, &result).to_line();
        let mut sink = self.sink.lock().unwrap_or_else(|e| e.into_inner());
        writeln!(sink, "{line}")
            .and_then(|_| sink.flush())
            .map_err(|e| BackendError::Unavailable {
                message: format!("failed to record to {}: {e}", self.path.display()),
            })?;
        result
    }
}

/// Answers from a cassette, keyed by node id and prompt digest. A prompt
/// that was never recorded is an error, so edited templates fail loudly.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    answers: HashMap<(String, String), Result<String, BackendError>>,
}

impl ReplayBackend {
    pub fn new(cassette: &Cassette) -> Self {
        let mut answers = HashMap::new();
        for entry in &cassette.entries {
            let answer = match (&entry.response, &entry.error) {
                (Some(r), _) => Ok(r.clone()),
                (None, Some(e)) => Err(e.clone()),
                (None, None) => continue,
            };
            answers
                .entry((entry.node_id.clone(), entry.prompt_sha256.clone()))
                .or_insert(answer);
        }
        ReplayBackend { answers }
    }

    pub fn from_file(path: &Path) -> Result<Self, CassetteError> {
        Ok(Self::new(&Cassette::load(path)?))
    }
}

impl LlmBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let digest = prompt_digest(request.prompt);
        self.answers
            .get(&(request.node_id.to_owned(), digest.clone()))
            .cloned()
            .unwrap_or_else(|| {
                Err(BackendError::NoRuleMatched {
                    message: format!(
                        "no recorded response for node '{}' with prompt sha256 {digest}",
                        request.node_id
                    ),
                })
            })
    }
}
