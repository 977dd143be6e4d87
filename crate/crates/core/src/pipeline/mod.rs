//! Device generation: prompt assembly, the generate, check and reflect loop,
//! and multi-turn refinement sessions.

mod run;
mod session;
mod template;

use thiserror::Error;

use crate::llmgateway::{CompletionProvider, GatewayError};
use crate::partsdb::KnowledgeBase;
use crate::specparser::ParseDiagnostic;

pub use run::{generate_device, GenerationRun, Generator, Limits, Termination, DEFAULT_MAX_REFLECTIONS};
pub use session::{Session, SessionStore, Turn, TurnKind};
pub use template::{
    assemble_generation_prompt, assemble_reflection_prompt, assemble_refine_prompt, assemble_repair_prompt,
    PromptTemplate, Snippet, SnippetKind, WorkedExample, DEFAULT_STOP_TOKEN, NEGATIVE_MARKER, POSITIVE_MARKER,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no round produced a parsable device spec")]
    ParseFailure { diagnostics: Vec<ParseDiagnostic> },
    #[error(transparent)]
    Provider(#[from] GatewayError),
    #[error("session has no device to refine")]
    NoBaseSpec,
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("prompt template: {0}")]
    Template(String),
    #[error("session artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Refines a session in one call.
pub fn refine(
    session: &mut Session,
    user_text: &str,
    provider: &dyn CompletionProvider,
    template: &PromptTemplate,
    kb: &KnowledgeBase,
) -> Result<(), PipelineError> {
    session.refine(user_text, &Generator::new(provider, template, kb)).map(|_| ())
}
