use std::io::{Read, Write};
use std::path::Path;

use anyhow::Context;
use wirespec::devicespec::{from_document, DeviceSpec};
use wirespec::partsdb::KnowledgeBase;
use wirespec::pipeline::PromptTemplate;

/// An error with the exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CmdResult<T> = Result<T, Failure>;

/// Bad input data or a failed operation.
pub fn failed(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: e.into() }
}

/// Unreadable files, bad configuration and other usage problems.
pub fn config(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: e.into() }
}

/// Reads a file, or standard input for `-`.
pub fn read_input(path: &Path) -> CmdResult<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("reading standard input").map_err(config)?;
        return Ok(s);
    }
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(config)
}

/// Writes to a file, or standard output when `path` is `None` or `-`.
pub fn write_output(path: Option<&Path>, text: &str) -> CmdResult<()> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display())).map_err(config)
        }
        _ => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).context("writing standard output").map_err(failed)
        }
    }
}

pub fn read_spec(path: &Path) -> CmdResult<DeviceSpec> {
    let text = read_input(path)?;
    from_document(&text).with_context(|| format!("in {}", path.display())).map_err(failed)
}

pub fn read_kb(path: Option<&Path>) -> CmdResult<KnowledgeBase> {
    match path {
        None => Ok(KnowledgeBase::bundled()),
        Some(p) => KnowledgeBase::from_json(&read_input(p)?)
            .with_context(|| format!("in {}", p.display()))
            .map_err(config),
    }
}

pub fn read_template(path: Option<&Path>) -> CmdResult<PromptTemplate> {
    match path {
        None => Ok(PromptTemplate::bundled()),
        Some(p) => PromptTemplate::from_json(&read_input(p)?)
            .with_context(|| format!("in {}", p.display()))
            .map_err(config),
    }
}

pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}
