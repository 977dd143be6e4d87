//! Microcontroller device benchmark: task corpus, per-task generation runs,
//! conservative automatic verdicts, expert verdict ingestion and reporting.

mod render;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devicespec::DeviceSpec;
use crate::erc::{ErcReport, W_CODE_PIN};
use crate::llmgateway::{CompletionProvider, GatewayError, GenerationParams};
use crate::partsdb::{normalize, ComponentRecord, KnowledgeBase};
use crate::pipeline::{Generator, Limits, PipelineError, PromptTemplate, Termination};

pub use render::render_report;

static BUNDLED: &str = include_str!("../../data/micro25.tasks.json");

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("task file does not match the schema: {0}")]
    Schema(String),
    #[error("duplicate task id {0:?}")]
    DuplicateId(String),
    #[error("no tasks to run")]
    EmptyInput,
    #[error("verdict names unknown task {0:?}")]
    UnknownTaskId(String),
    #[error("task {task}: {source}")]
    Provider { task: String, source: GatewayError },
    #[error("task {task}: {source}")]
    Pipeline { task: String, source: PipelineError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Input,
    Protocols,
    Output,
    Sensors,
    Logic,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Input,
        Category::Protocols,
        Category::Output,
        Category::Sensors,
        Category::Logic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Input => "input",
            Category::Protocols => "protocols",
            Category::Output => "output",
            Category::Sensors => "sensors",
            Category::Logic => "logic",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AutoCheck {
    ErcClean,
    /// A BOM part of this knowledge-base type.
    RequiresPart { name: String },
    /// Two pins sharing a net, each written `type.pin`; `*` matches any pin.
    RequiresNet { a: String, b: String },
    CodeContains { token: String },
}

impl AutoCheck {
    fn is_code(&self) -> bool {
        matches!(self, AutoCheck::CodeContains { .. })
    }
}

impl fmt::Display for AutoCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AutoCheck::ErcClean => f.write_str("erc_clean"),
            AutoCheck::RequiresPart { name } => write!(f, "requires_part({name})"),
            AutoCheck::RequiresNet { a, b } => write!(f, "requires_net({a}, {b})"),
            AutoCheck::CodeContains { token } => write!(f, "code_contains({token:?})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NeedsReview,
}

impl Verdict {
    fn decided(self) -> bool {
        self != Verdict::NeedsReview
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManualVerdict {
    pub schematic: Verdict,
    pub code: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchTask {
    pub id: String,
    pub category: Category,
    pub title: String,
    pub description: String,
    #[serde(default)]
    pub auto_checks: Vec<AutoCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manual_verdict: Option<ManualVerdict>,
}

pub fn parse_tasks(text: &str) -> Result<Vec<BenchTask>, BenchError> {
    let tasks: Vec<BenchTask> = serde_json::from_str(text).map_err(|e| BenchError::Schema(e.to_string()))?;
    let mut seen = HashSet::new();
    for t in &tasks {
        if !seen.insert(t.id.as_str()) {
            return Err(BenchError::DuplicateId(t.id.clone()));
        }
    }
    Ok(tasks)
}

pub fn load_tasks(path: impl AsRef<Path>) -> Result<Vec<BenchTask>, BenchError> {
    parse_tasks(&std::fs::read_to_string(path)?)
}

/// The 25-task corpus shipped with the crate.
pub fn bundled_tasks() -> Vec<BenchTask> {
    parse_tasks(BUNDLED).expect("bundled tasks are valid")
}

pub fn bundled_tasks_json() -> &'static str {
    BUNDLED
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Auto,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub category: Category,
    pub title: String,
    pub schematic: Verdict,
    pub code: Verdict,
    pub source: Source,
    #[serde(default)]
    pub checks: Vec<CheckOutcome>,
    #[serde(default)]
    pub erc_errors: usize,
    #[serde(default)]
    pub erc_warnings: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<Termination>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub pass: usize,
    pub fail: usize,
    pub needs_review: usize,
}

impl Tally {
    fn add(&mut self, v: Verdict) {
        match v {
            Verdict::Pass => self.pass += 1,
            Verdict::Fail => self.fail += 1,
            Verdict::NeedsReview => self.needs_review += 1,
        }
    }

    /// pass / (pass + fail); `None` when nothing is decided.
    pub fn rate(&self) -> Option<f64> {
        let n = self.pass + self.fail;
        (n > 0).then(|| self.pass as f64 / n as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryAggregate {
    pub tasks: usize,
    pub schematic: Tally,
    pub code: Tally,
    pub schematic_rate: Option<f64>,
    pub code_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub schematic: Tally,
    pub code: Tally,
    pub schematic_rate: Option<f64>,
    pub code_rate: Option<f64>,
    pub by_category: BTreeMap<Category, CategoryAggregate>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub per_task: IndexMap<String, TaskResult>,
    pub aggregates: Aggregates,
}

impl BenchReport {
    pub fn from_results(per_task: IndexMap<String, TaskResult>) -> Self {
        let mut r = BenchReport {
            per_task,
            aggregates: Aggregates::default(),
        };
        r.recompute();
        r
    }

    pub fn recompute(&mut self) {
        let mut a = Aggregates::default();
        for t in self.per_task.values() {
            a.schematic.add(t.schematic);
            a.code.add(t.code);
            let c = a.by_category.entry(t.category).or_default();
            c.tasks += 1;
            c.schematic.add(t.schematic);
            c.code.add(t.code);
        }
        a.schematic_rate = a.schematic.rate();
        a.code_rate = a.code.rate();
        for c in a.by_category.values_mut() {
            c.schematic_rate = c.schematic.rate();
            c.code_rate = c.code.rate();
        }
        self.aggregates = a;
    }

    pub fn category_counts(&self) -> BTreeMap<Category, usize> {
        self.aggregates.by_category.iter().map(|(k, v)| (*k, v.tasks)).collect()
    }

    /// True when any decided verdict is a failure.
    pub fn has_failures(&self) -> bool {
        self.aggregates.schematic.fail + self.aggregates.code.fail > 0
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::Schema(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn type_matches(kb: &KnowledgeBase, part_type: &str, name: &str) -> bool {
    match (kb.lookup(part_type), kb.lookup(name)) {
        (Some(a), Some(b)) => a.canonical_name == b.canonical_name,
        _ => normalize(part_type) == normalize(name),
    }
}

fn pin_matches(rec: Option<&ComponentRecord>, pin: &str, want: &str) -> bool {
    if want == "*" {
        return true;
    }
    match rec {
        Some(r) => match (r.normalize_pin(pin), r.normalize_pin(want)) {
            (Some(a), Some(b)) => a == b,
            _ => normalize(pin) == normalize(want),
        },
        None => normalize(pin) == normalize(want),
    }
}

fn net_has(spec: &DeviceSpec, kb: &KnowledgeBase, members: &[&crate::devicespec::PinRef], sel: &str) -> Vec<usize> {
    let Some((ty, pin)) = sel.rsplit_once('.') else { return Vec::new() };
    members
        .iter()
        .enumerate()
        .filter(|(_, m)| {
            spec.bom_item(&m.part).is_some_and(|b| {
                type_matches(kb, &b.part_type, ty) && pin_matches(kb.lookup(&b.part_type), &m.pin, pin)
            })
        })
        .map(|(i, _)| i)
        .collect()
}

/// Evaluates one check against a final spec and its ERC report.
pub fn evaluate_check(check: &AutoCheck, spec: &DeviceSpec, erc: &ErcReport, kb: &KnowledgeBase) -> bool {
    match check {
        AutoCheck::ErcClean => erc.clean,
        AutoCheck::RequiresPart { name } => spec.bom.iter().any(|b| type_matches(kb, &b.part_type, name)),
        AutoCheck::RequiresNet { a, b } => spec.nets().iter().any(|n| {
            let members: Vec<_> = n.members.iter().collect();
            let xs = net_has(spec, kb, &members, a);
            let ys = net_has(spec, kb, &members, b);
            xs.iter().any(|x| ys.iter().any(|y| x != y))
        }),
        AutoCheck::CodeContains { token } => spec.code.as_ref().is_some_and(|c| c.source.contains(token.as_str())),
    }
}

/// Automatic verdicts for a finished run.
///
/// Schematic: pass needs at least one task-specific structural check, all
/// checks passing and a clean ERC; any failing check is a fail; anything
/// else needs review. Code: pass needs code, at least one code check, all
/// passing and no code-pin warnings; a failing check or missing code is a
/// fail.
pub fn auto_verdicts(task: &BenchTask, spec: &DeviceSpec, erc: &ErcReport, kb: &KnowledgeBase) -> TaskResult {
    let mut checks = Vec::new();
    let (mut sch_fail, mut sch_specific, mut code_fail, mut code_checks) = (false, false, false, 0);
    for c in &task.auto_checks {
        let passed = evaluate_check(c, spec, erc, kb);
        checks.push(CheckOutcome {
            check: c.to_string(),
            passed,
        });
        if c.is_code() {
            code_checks += 1;
            code_fail |= !passed;
        } else {
            sch_fail |= !passed;
            sch_specific |= !matches!(c, AutoCheck::ErcClean);
        }
    }
    let schematic = if sch_fail {
        Verdict::Fail
    } else if sch_specific && erc.clean {
        Verdict::Pass
    } else {
        Verdict::NeedsReview
    };
    let code_warned = erc.by_rule(W_CODE_PIN).next().is_some();
    let code = if spec.code.is_none() || code_fail {
        Verdict::Fail
    } else if code_checks > 0 && !code_warned {
        Verdict::Pass
    } else {
        Verdict::NeedsReview
    };
    TaskResult {
        category: task.category,
        title: task.title.clone(),
        schematic,
        code,
        source: Source::Auto,
        checks,
        erc_errors: erc.errors().count(),
        erc_warnings: erc.warnings().count(),
        iterations: None,
        termination: None,
        notes: Vec::new(),
    }
}

fn apply_manual(id: &str, r: &mut TaskResult, m: &ManualVerdict) {
    for (what, auto, manual) in [("schematic", r.schematic, m.schematic), ("code", r.code, m.code)] {
        if auto.decided() && auto != manual {
            log::warn!("task {id}: manual {what} verdict {manual:?} overrides automatic {auto:?}");
            r.notes.push(format!("manual {what} verdict contradicts automatic {auto:?}"));
        }
    }
    r.schematic = m.schematic;
    r.code = m.code;
    r.source = Source::Manual;
    if let Some(n) = &m.notes {
        r.notes.push(n.clone());
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub limits: Limits,
    pub params: GenerationParams,
    /// Worker threads; 1 runs sequentially.
    pub jobs: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            limits: Limits::default(),
            params: GenerationParams::default(),
            jobs: 1,
        }
    }
}

fn run_one(
    task: &BenchTask,
    provider: &dyn CompletionProvider,
    template: &PromptTemplate,
    kb: &KnowledgeBase,
    opts: &BenchOptions,
) -> Result<TaskResult, BenchError> {
    let gen = Generator::new(provider, template, kb)
        .with_params(opts.params.clone())
        .with_limits(opts.limits);
    let mut result = match gen.generate(&task.description) {
        Ok(run) => {
            let erc = run.final_erc().cloned().expect("a run with a spec has a report");
            let mut r = auto_verdicts(task, &run.spec, &erc, kb);
            r.iterations = Some(run.iterations);
            r.termination = Some(run.termination);
            r.notes.extend(run.warnings);
            r
        }
        Err(PipelineError::ParseFailure { diagnostics }) => TaskResult {
            category: task.category,
            title: task.title.clone(),
            schematic: Verdict::Fail,
            code: Verdict::Fail,
            source: Source::Auto,
            checks: Vec::new(),
            erc_errors: 0,
            erc_warnings: 0,
            iterations: None,
            termination: Some(Termination::ParseFailure),
            notes: vec![format!("no parsable spec ({} diagnostics)", diagnostics.len())],
        },
        Err(PipelineError::Provider(source)) => {
            return Err(BenchError::Provider {
                task: task.id.clone(),
                source,
            })
        }
        Err(e) => {
            return Err(BenchError::Pipeline {
                task: task.id.clone(),
                source: e,
            })
        }
    };
    if let Some(m) = &task.manual_verdict {
        apply_manual(&task.id, &mut result, m);
    }
    Ok(result)
}

/// One greedy generation per task, then automatic verdicts.
pub fn run_benchmark(
    tasks: &[BenchTask],
    provider: &dyn CompletionProvider,
    template: &PromptTemplate,
    kb: &KnowledgeBase,
    opts: &BenchOptions,
) -> Result<BenchReport, BenchError> {
    if tasks.is_empty() {
        return Err(BenchError::EmptyInput);
    }
    let results: Vec<Result<TaskResult, BenchError>> = if opts.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| BenchError::Io(std::io::Error::other(e)))?;
        pool.install(|| tasks.par_iter().map(|t| run_one(t, provider, template, kb, opts)).collect())
    } else {
        tasks.iter().map(|t| run_one(t, provider, template, kb, opts)).collect()
    };
    let mut per_task = IndexMap::new();
    for (t, r) in tasks.iter().zip(results) {
        per_task.insert(t.id.clone(), r?);
    }
    Ok(BenchReport::from_results(per_task))
}

/// Expert verdicts keyed by task id.
pub type VerdictFile = IndexMap<String, ManualVerdict>;

pub fn parse_verdicts(text: &str) -> Result<VerdictFile, BenchError> {
    serde_json::from_str(text).map_err(|e| BenchError::Schema(e.to_string()))
}

/// Applies expert verdicts. Manual verdicts always win; contradictions with
/// decided automatic verdicts are logged and noted on the task.
pub fn ingest_manual_verdicts(mut report: BenchReport, verdicts: &VerdictFile) -> Result<BenchReport, BenchError> {
    if let Some(id) = verdicts.keys().find(|id| !report.per_task.contains_key(*id)) {
        return Err(BenchError::UnknownTaskId(id.clone()));
    }
    for (id, m) in verdicts {
        let r = report.per_task.get_mut(id).expect("checked above");
        apply_manual(id, r, m);
    }
    report.recompute();
    Ok(report)
}

#[cfg(test)]
mod tests;
