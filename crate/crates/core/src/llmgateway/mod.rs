//! Completion providers with record and replay.
//!
//! Every call is keyed by [`prompt_digest`], a SHA-256 over the prompt and
//! the generation parameters. Replay serves stored responses by digest, so
//! tests never touch the network.

mod http;
mod tokens;
mod transcript;

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::{HttpProvider, ProviderConfig, ProvidersFile};
pub use tokens::{count_prompt_tokens, TOKENIZERS};
pub use transcript::{Transcript, TranscriptEntry};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("no recorded response for prompt digest {digest}")]
    ReplayMiss { digest: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned status {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("transcript: {0}")]
    Transcript(String),
    #[error("unknown tokenizer {0:?}")]
    UnknownTokenizer(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn default_max_tokens() -> u32 {
    4096
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    /// Greedy decoding by default.
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub stop_sequences: Vec<String>,
    #[serde(default)]
    pub model_id: String,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            stop_sequences: Vec::new(),
            model_id: String::new(),
        }
    }
}

impl GenerationParams {
    pub fn for_model(model_id: impl Into<String>) -> Self {
        GenerationParams {
            model_id: model_id.into(),
            ..Default::default()
        }
    }
}

/// Hex SHA-256 of the prompt and parameters.
pub fn prompt_digest(prompt: &str, params: &GenerationParams) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        prompt: &'a str,
        params: &'a GenerationParams,
    }
    let bytes = serde_json::to_vec(&Key { prompt, params }).expect("params serialize");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub prompt_digest: String,
    /// RFC 3339.
    pub timestamp: String,
}

pub trait CompletionProvider: Send + Sync {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<Completion, GatewayError>;

    /// Short label for logs and provenance.
    fn name(&self) -> String;
}

impl<P: CompletionProvider + ?Sized> CompletionProvider for Arc<P> {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<Completion, GatewayError> {
        (**self).complete(prompt, params)
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

pub(crate) fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Serves responses from a fixed transcript.
#[derive(Debug, Clone)]
pub struct ReplayProvider {
    transcript: Transcript,
    label: String,
}

impl ReplayProvider {
    pub fn new(transcript: Transcript) -> Self {
        ReplayProvider {
            transcript,
            label: "replay".into(),
        }
    }

    /// Loads a transcript file or a directory of `*.json` transcripts.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        Ok(Self::new(Transcript::load(path.as_ref())?))
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }
}

impl CompletionProvider for ReplayProvider {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<Completion, GatewayError> {
        let digest = prompt_digest(prompt, params);
        let e = self
            .transcript
            .get(&digest)
            .ok_or(GatewayError::ReplayMiss { digest })?;
        Ok(Completion {
            text: e.response_text.clone(),
            prompt_digest: e.prompt_digest.clone(),
            timestamp: e.timestamp.clone(),
        })
    }

    fn name(&self) -> String {
        self.label.clone()
    }
}

/// Wraps a provider, answering from the transcript when possible and
/// appending new exchanges otherwise. Appends go through one lock and are
/// flushed to `path` after each call.
pub struct RecordingProvider<P> {
    inner: P,
    transcript: Mutex<Transcript>,
    path: Option<PathBuf>,
}

impl<P: CompletionProvider> RecordingProvider<P> {
    pub fn in_memory(inner: P) -> Self {
        RecordingProvider {
            inner,
            transcript: Mutex::new(Transcript::default()),
            path: None,
        }
    }

    /// Records to `path`, continuing any transcript already there.
    pub fn to_file(inner: P, path: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let path = path.into();
        let transcript = if path.exists() { Transcript::load(&path)? } else { Transcript::default() };
        Ok(RecordingProvider {
            inner,
            transcript: Mutex::new(transcript),
            path: Some(path),
        })
    }

    pub fn transcript(&self) -> Transcript {
        self.transcript.lock().unwrap().clone()
    }
}

impl<P: CompletionProvider> CompletionProvider for RecordingProvider<P> {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<Completion, GatewayError> {
        let digest = prompt_digest(prompt, params);
        if let Some(e) = self.transcript.lock().unwrap().get(&digest) {
            return Ok(Completion {
                text: e.response_text.clone(),
                prompt_digest: digest,
                timestamp: e.timestamp.clone(),
            });
        }
        let c = self.inner.complete(prompt, params)?;
        let mut t = self.transcript.lock().unwrap();
        if t.get(&digest).is_none() {
            t.push(TranscriptEntry {
                prompt_digest: digest.clone(),
                prompt_text: prompt.to_string(),
                response_text: c.text.clone(),
                params: params.clone(),
                timestamp: c.timestamp.clone(),
            });
            if let Some(path) = &self.path {
                t.save(path)?;
            }
        }
        Ok(Completion { prompt_digest: digest, ..c })
    }

    fn name(&self) -> String {
        format!("record:{}", self.inner.name())
    }
}

type ResponderFn = dyn Fn(&str, &GenerationParams) -> Result<String, GatewayError> + Send + Sync;

/// Provider backed by a closure. Useful for scripted runs and tests.
pub struct FnProvider {
    f: Box<ResponderFn>,
    timestamp: Option<String>,
    label: String,
}

impl FnProvider {
    pub fn new(f: impl Fn(&str, &GenerationParams) -> Result<String, GatewayError> + Send + Sync + 'static) -> Self {
        FnProvider {
            f: Box::new(f),
            timestamp: None,
            label: "fn".into(),
        }
    }

    /// Stamps every completion with `ts` instead of the current time.
    pub fn with_fixed_timestamp(mut self, ts: impl Into<String>) -> Self {
        self.timestamp = Some(ts.into());
        self
    }

    pub fn named(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

impl CompletionProvider for FnProvider {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<Completion, GatewayError> {
        let text = (self.f)(prompt, params)?;
        Ok(Completion {
            text,
            prompt_digest: prompt_digest(prompt, params),
            timestamp: self.timestamp.clone().unwrap_or_else(now_rfc3339),
        })
    }

    fn name(&self) -> String {
        self.label.clone()
    }
}

/// Opens a provider from a spec string:
///
/// - `replay:<path>`: transcript file or directory
/// - `live:<name>`: provider `name` from `config`
/// - `record:<name>:<path>`: live provider recording to `path`
pub fn open_provider(spec: &str, config: Option<&ProvidersFile>) -> Result<Arc<dyn CompletionProvider>, GatewayError> {
    let live = |name: &str| -> Result<HttpProvider, GatewayError> {
        let cfg = config.ok_or_else(|| GatewayError::Config("live providers need a providers file".into()))?;
        HttpProvider::from_config(cfg.get(name)?.clone())
    };
    match spec.split_once(':') {
        Some(("replay", path)) => Ok(Arc::new(ReplayProvider::open(path)?)),
        Some(("live", name)) => Ok(Arc::new(live(name)?)),
        Some(("record", rest)) => {
            let (name, path) = rest
                .split_once(':')
                .ok_or_else(|| GatewayError::Config(format!("expected record:<name>:<path>, got {spec:?}")))?;
            Ok(Arc::new(RecordingProvider::to_file(live(name)?, path)?))
        }
        _ => Err(GatewayError::Config(format!(
            "provider {spec:?} is not replay:<path>, live:<name> or record:<name>:<path>"
        ))),
    }
}
