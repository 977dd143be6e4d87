use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{prompt_digest, GatewayError, GenerationParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub prompt_digest: String,
    pub prompt_text: String,
    pub response_text: String,
    pub params: GenerationParams,
    pub timestamp: String,
}

impl TranscriptEntry {
    pub fn new(prompt: &str, response: &str, params: &GenerationParams, timestamp: &str) -> Self {
        TranscriptEntry {
            prompt_digest: prompt_digest(prompt, params),
            prompt_text: prompt.to_string(),
            response_text: response.to_string(),
            params: params.clone(),
            timestamp: timestamp.to_string(),
        }
    }
}

/// Ordered exchanges, stored on disk as a JSON array.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<TranscriptEntry>", into = "Vec<TranscriptEntry>")]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
    index: HashMap<String, usize>,
}

impl From<Vec<TranscriptEntry>> for Transcript {
    fn from(list: Vec<TranscriptEntry>) -> Self {
        let mut t = Transcript::default();
        for e in list {
            t.push(e);
        }
        t
    }
}

impl From<Transcript> for Vec<TranscriptEntry> {
    fn from(t: Transcript) -> Self {
        t.entries
    }
}

impl Transcript {
    pub fn push(&mut self, e: TranscriptEntry) {
        self.index.entry(e.prompt_digest.clone()).or_insert(self.entries.len());
        self.entries.push(e);
    }

    /// First entry recorded for `digest`.
    pub fn get(&self, digest: &str) -> Option<&TranscriptEntry> {
        self.index.get(digest).map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self, GatewayError> {
        let list: Vec<TranscriptEntry> =
            serde_json::from_str(text).map_err(|e| GatewayError::Transcript(e.to_string()))?;
        for (i, e) in list.iter().enumerate() {
            if prompt_digest(&e.prompt_text, &e.params) != e.prompt_digest {
                return Err(GatewayError::Transcript(format!(
                    "entry {i}: stored digest does not match prompt and params"
                )));
            }
        }
        Ok(list.into())
    }

    /// Reads one transcript file, or every `*.json` file of a directory in
    /// name order.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        if !path.is_dir() {
            return Self::from_json(&std::fs::read_to_string(path)?);
        }
        let mut files: Vec<_> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        let mut all = Transcript::default();
        for f in files {
            for e in Self::from_json(&std::fs::read_to_string(&f)?)?.entries {
                all.push(e);
            }
        }
        Ok(all)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.entries).expect("transcript serializes");
        s.push('\n');
        s
    }

    /// Writes via a temporary file so a crash never leaves half a document.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GatewayError> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}
