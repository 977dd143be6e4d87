use serde::{Deserialize, Serialize};

use super::template::{assemble_generation_prompt, assemble_reflection_prompt, assemble_repair_prompt, PromptTemplate};
use super::PipelineError;
use crate::devicespec::DeviceSpec;
use crate::erc::{check, ErcReport};
use crate::llmgateway::{prompt_digest, Completion, CompletionProvider, GenerationParams, TranscriptEntry};
use crate::partsdb::KnowledgeBase;
use crate::specparser::{missing_sections, parse_device_spec, ParseDiagnostic, ParseError};

pub const DEFAULT_MAX_REFLECTIONS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_reflections: u32,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_reflections: DEFAULT_MAX_REFLECTIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    StopToken,
    MaxIterations,
    ParseFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRun {
    pub description: String,
    pub spec: DeviceSpec,
    /// Completions requested, including the first.
    pub iterations: u32,
    pub termination: Termination,
    /// Prompt digest of every completion, in order.
    pub transcript_ref: Vec<String>,
    /// One report per round that produced a spec.
    pub erc_history: Vec<ErcReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Spec after each round that produced one; parallel to `erc_history`.
    #[serde(skip)]
    pub round_specs: Vec<DeviceSpec>,
    #[serde(skip)]
    pub exchanges: Vec<TranscriptEntry>,
}

impl GenerationRun {
    pub fn final_erc(&self) -> Option<&ErcReport> {
        self.erc_history.last()
    }
}

pub struct Generator<'a> {
    pub provider: &'a dyn CompletionProvider,
    pub template: &'a PromptTemplate,
    pub kb: &'a KnowledgeBase,
    pub params: GenerationParams,
    pub limits: Limits,
}

struct Loop<'g, 'a> {
    g: &'g Generator<'a>,
    description: String,
    iterations: u32,
    digests: Vec<String>,
    exchanges: Vec<TranscriptEntry>,
    last: Option<Completion>,
}

impl Loop<'_, '_> {
    fn ask(&mut self, prompt: &str) -> Result<String, PipelineError> {
        let c = self.g.provider.complete(prompt, &self.g.params)?;
        self.iterations += 1;
        self.digests.push(c.prompt_digest.clone());
        self.exchanges.push(TranscriptEntry {
            prompt_digest: prompt_digest(prompt, &self.g.params),
            prompt_text: prompt.to_string(),
            response_text: c.text.clone(),
            params: self.g.params.clone(),
            timestamp: c.timestamp.clone(),
        });
        let text = c.text.clone();
        self.last = Some(c);
        Ok(text)
    }
}

fn problems(diags: &[ParseDiagnostic]) -> Vec<String> {
    diags.iter().filter(|d| d.is_error()).map(|d| d.message.clone()).collect()
}

/// Fills sections absent from `new` with those of `prev`.
fn merge(mut new: DeviceSpec, prev: Option<&DeviceSpec>, diags: &[ParseDiagnostic]) -> DeviceSpec {
    if let Some(prev) = prev {
        for s in missing_sections(diags) {
            match s {
                "bill_of_materials" => new.bom = prev.bom.clone(),
                "pinouts" => new.pinouts = prev.pinouts.clone(),
                "schematic" => new.connections = prev.connections.clone(),
                _ => new.code = prev.code.clone(),
            }
        }
    }
    new
}

impl<'a> Generator<'a> {
    pub fn new(provider: &'a dyn CompletionProvider, template: &'a PromptTemplate, kb: &'a KnowledgeBase) -> Self {
        Generator {
            provider,
            template,
            kb,
            params: GenerationParams::default(),
            limits: Limits::default(),
        }
    }

    pub fn with_params(mut self, params: GenerationParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn generate(&self, description: &str) -> Result<GenerationRun, PipelineError> {
        let prompt = assemble_generation_prompt(self.template, description);
        self.run(description, &prompt, None)
    }

    /// Runs the generate, parse, check, reflect loop starting from `first_prompt`.
    /// `base` supplies sections the first response leaves out.
    pub(crate) fn run(
        &self,
        description: &str,
        first_prompt: &str,
        base: Option<&DeviceSpec>,
    ) -> Result<GenerationRun, PipelineError> {
        let stop = self.template.stop_token.as_str();
        let mut lp = Loop {
            g: self,
            description: description.to_string(),
            iterations: 0,
            digests: Vec::new(),
            exchanges: Vec::new(),
            last: None,
        };
        let mut spec: Option<DeviceSpec> = None;
        let mut erc_history = Vec::new();
        let mut round_specs = Vec::new();
        let mut warnings = Vec::new();
        let mut last_diags: Vec<ParseDiagnostic> = Vec::new();
        let mut last_parsed;
        let mut termination = Termination::MaxIterations;

        let mut accept = |s: DeviceSpec, erc_history: &mut Vec<ErcReport>| {
            let mut s = s;
            if s.description.trim().is_empty() {
                s.description = description.to_string();
            }
            erc_history.push(check(&s, self.kb));
            round_specs.push(s.clone());
            Some(s)
        };

        let text = lp.ask(first_prompt)?;
        match parse_device_spec(&text) {
            Ok((s, d)) => {
                spec = accept(merge(s, base, &d), &mut erc_history);
                last_parsed = true;
            }
            Err(e) => {
                last_diags = e.diagnostics().to_vec();
                warnings.push(format!("round 0: response could not be parsed ({} problems)", last_diags.len()));
                last_parsed = false;
            }
        }

        if text.contains(stop) {
            termination = Termination::StopToken;
        }

        for round in 1..=self.limits.max_reflections {
            if termination == Termination::StopToken {
                break;
            }
            let prompt = match &spec {
                Some(s) => assemble_reflection_prompt(self.template, s, erc_history.last().expect("spec has a report")),
                None => assemble_repair_prompt(self.template, &lp.description, &problems(&last_diags)),
            };
            let text = lp.ask(&prompt)?;
            let stopped = text.contains(stop);
            match parse_device_spec(&text) {
                Ok((s, d)) => {
                    let s = merge(s, spec.as_ref().or(base), &d);
                    spec = accept(s, &mut erc_history);
                    last_parsed = true;
                }
                Err(ParseError::NoParsableContent { .. }) if stopped => last_parsed = true,
                Err(e) => {
                    last_diags = e.diagnostics().to_vec();
                    warnings.push(format!(
                        "round {round}: response could not be parsed; keeping the previous spec"
                    ));
                    last_parsed = false;
                }
            }
            if stopped {
                termination = Termination::StopToken;
                break;
            }
        }
        if termination == Termination::MaxIterations && !last_parsed {
            termination = Termination::ParseFailure;
        }

        let Some(mut spec) = spec else {
            return Err(PipelineError::ParseFailure { diagnostics: last_diags });
        };
        spec.provenance.model_id = Some(if self.params.model_id.is_empty() {
            self.provider.name()
        } else {
            self.params.model_id.clone()
        });
        spec.provenance.prompt_digest = lp.digests.first().cloned();
        spec.provenance.reflection_iterations = lp.iterations - 1;
        spec.provenance.created_at = lp.last.as_ref().map(|c| c.timestamp.clone());
        if let Some(last) = round_specs.last_mut() {
            last.provenance = spec.provenance.clone();
        }
        Ok(GenerationRun {
            description: description.to_string(),
            spec,
            iterations: lp.iterations,
            termination,
            transcript_ref: lp.digests,
            erc_history,
            warnings,
            round_specs,
            exchanges: lp.exchanges,
        })
    }
}

/// One-call form of [`Generator::generate`].
pub fn generate_device(
    description: &str,
    provider: &dyn CompletionProvider,
    template: &PromptTemplate,
    kb: &KnowledgeBase,
    limits: Limits,
) -> Result<GenerationRun, PipelineError> {
    Generator::new(provider, template, kb).with_limits(limits).generate(description)
}
