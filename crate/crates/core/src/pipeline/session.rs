use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{GenerationRun, Generator};
use super::template::assemble_refine_prompt;
use super::PipelineError;
use crate::devicespec::{to_document, DeviceSpec};
use crate::llmgateway::Transcript;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnKind {
    Generate,
    Refine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub kind: TurnKind,
    pub user_text: String,
    pub run: GenerationRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub created_at: String,
    pub turns: Vec<Turn>,
    /// Spec of the last turn.
    pub current: Option<DeviceSpec>,
}

impl Session {
    pub fn new() -> Self {
        Self::with_id(uuid::Uuid::new_v4().to_string())
    }

    pub fn with_id(id: impl Into<String>) -> Self {
        Session {
            id: id.into(),
            created_at: crate::llmgateway::now_rfc3339(),
            turns: Vec::new(),
            current: None,
        }
    }

    fn push(&mut self, kind: TurnKind, user_text: &str, run: GenerationRun) -> &Turn {
        self.current = Some(run.spec.clone());
        self.turns.push(Turn {
            kind,
            user_text: user_text.to_string(),
            run,
        });
        self.turns.last().expect("just pushed")
    }

    /// Generates a fresh device from `description`, replacing the current one.
    pub fn generate(&mut self, description: &str, gen: &Generator) -> Result<&Turn, PipelineError> {
        let run = gen.generate(description)?;
        Ok(self.push(TurnKind::Generate, description, run))
    }

    /// Revises the current device with a clarification.
    pub fn refine(&mut self, user_text: &str, gen: &Generator) -> Result<&Turn, PipelineError> {
        let current = self.current.as_ref().ok_or(PipelineError::NoBaseSpec)?;
        let prompt = assemble_refine_prompt(gen.template, current, user_text);
        let mut run = gen.run(&current.description, &prompt, Some(current))?;
        run.description = user_text.to_string();
        Ok(self.push(TurnKind::Refine, user_text, run))
    }
}

impl Default for Session {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    id: String,
    created_at: String,
    turns: usize,
}

/// On-disk layout, one directory per session:
///
/// ```text
/// <root>/<id>/meta.json
/// <root>/<id>/turns.jsonl             one Turn per line, append-only
/// <root>/<id>/turn-<k>/transcript.json
/// <root>/<id>/turn-<k>/round-<r>.device.json
/// <root>/<id>/turn-<k>/round-<r>.erc.json
/// <root>/<id>/final.device.json
/// ```
#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
}

impl SessionStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        SessionStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    /// Ids that look safe to use as a directory name.
    pub fn valid_id(id: &str) -> bool {
        !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
    }

    pub fn create(&self) -> Result<Session, PipelineError> {
        let s = Session::new();
        fs::create_dir_all(self.dir(&s.id))?;
        self.write_meta(&s)?;
        Ok(s)
    }

    fn write_meta(&self, s: &Session) -> Result<(), PipelineError> {
        let meta = Meta {
            id: s.id.clone(),
            created_at: s.created_at.clone(),
            turns: s.turns.len(),
        };
        fs::write(self.dir(&s.id).join("meta.json"), serde_json::to_string_pretty(&meta).expect("meta") + "\n")?;
        Ok(())
    }

    /// Writes the artifacts of the session's last turn.
    pub fn record_last_turn(&self, s: &Session) -> Result<(), PipelineError> {
        let Some(turn) = s.turns.last() else { return Ok(()) };
        let dir = self.dir(&s.id);
        let k = s.turns.len() - 1;
        let tdir = dir.join(format!("turn-{k}"));
        fs::create_dir_all(&tdir)?;
        let transcript: Transcript = turn.run.exchanges.clone().into();
        transcript.save(tdir.join("transcript.json"))?;
        for (r, (spec, erc)) in turn.run.round_specs.iter().zip(&turn.run.erc_history).enumerate() {
            fs::write(tdir.join(format!("round-{r}.device.json")), to_document(spec))?;
            fs::write(
                tdir.join(format!("round-{r}.erc.json")),
                serde_json::to_string_pretty(erc).expect("report") + "\n",
            )?;
        }
        let mut line = serde_json::to_string(turn).expect("turn");
        line.push('\n');
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join("turns.jsonl"))?
            .write_all(line.as_bytes())?;
        if let Some(cur) = &s.current {
            fs::write(dir.join("final.device.json"), to_document(cur))?;
        }
        self.write_meta(s)
    }

    pub fn load(&self, id: &str) -> Result<Session, PipelineError> {
        if !Self::valid_id(id) {
            return Err(PipelineError::UnknownSession(id.to_string()));
        }
        let dir = self.dir(id);
        let meta = match fs::read_to_string(dir.join("meta.json")) {
            Ok(m) => m,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(PipelineError::UnknownSession(id.to_string()))
            }
            Err(e) => return Err(e.into()),
        };
        let meta: Meta = serde_json::from_str(&meta).map_err(|e| PipelineError::Artifact(e.to_string()))?;
        let mut s = Session::with_id(meta.id);
        s.created_at = meta.created_at;
        if let Ok(text) = fs::read_to_string(dir.join("turns.jsonl")) {
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let t: Turn = serde_json::from_str(line).map_err(|e| PipelineError::Artifact(e.to_string()))?;
                s.current = Some(t.run.spec.clone());
                s.turns.push(t);
            }
        }
        Ok(s)
    }

    /// Ids of all stored sessions, sorted.
    pub fn list(&self) -> Result<Vec<String>, PipelineError> {
        let mut ids = Vec::new();
        match fs::read_dir(&self.root) {
            Ok(rd) => {
                for e in rd.flatten() {
                    if e.path().join("meta.json").is_file() {
                        ids.push(e.file_name().to_string_lossy().into_owned());
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        ids.sort();
        Ok(ids)
    }
}
