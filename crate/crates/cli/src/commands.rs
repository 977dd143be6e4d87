use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use indexmap::IndexMap;
use wirespec::bench::{
    bundled_tasks, ingest_manual_verdicts, parse_tasks, parse_verdicts, render_report, run_benchmark, BenchOptions,
    BenchReport,
};
use wirespec::devicespec::{to_document, validate};
use wirespec::erc::{run_erc, ErcError};
use wirespec::export::export;
use wirespec::llmgateway::{open_provider, CompletionProvider, ProvidersFile, Transcript};
use wirespec::pinscore::{score_all, ManualOverride};
use wirespec::pipeline::{Generator, Limits};
use wirespec_service::ServiceConfig;

use crate::io::{config, failed, read_input, read_kb, read_spec, read_template, to_json, write_output, CmdResult};
use crate::{BenchCommand, Command, ErcArgs, ExportArgs, GenerateArgs, PartsCommand, ProviderArgs, ScoreCommand, ServeArgs};

fn code(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

pub fn run(cmd: Command) -> CmdResult<ExitCode> {
    match cmd {
        Command::Generate(a) => generate(a),
        Command::Validate { spec } => validate_cmd(&spec),
        Command::Erc(a) => erc(a),
        Command::Score { what: ScoreCommand::Pinouts { kb, generated, overrides, report } } => {
            score(kb.as_deref(), &generated, overrides.as_deref(), report.as_deref())
        }
        Command::Bench { what } => bench(what),
        Command::Export(a) => export_cmd(a),
        Command::Parts { what: PartsCommand::Show { name, kb } } => parts_show(&name, kb.as_deref()),
        Command::Serve(a) => serve(a),
    }
}

fn load_providers(path: Option<&Path>) -> CmdResult<Option<ProvidersFile>> {
    path.map(|p| ProvidersFile::from_toml(&read_input(p)?).with_context(|| format!("in {}", p.display())).map_err(config))
        .transpose()
}

fn provider(a: &ProviderArgs) -> CmdResult<std::sync::Arc<dyn CompletionProvider>> {
    let file = load_providers(a.providers.as_deref())?;
    open_provider(&a.provider, file.as_ref()).map_err(config)
}

fn generate(a: GenerateArgs) -> CmdResult<ExitCode> {
    let description = read_input(&a.description_file)?;
    let template = read_template(a.template.as_deref())?;
    let kb = read_kb(a.kb.as_deref())?;
    let p = provider(&a.provider)?;
    let gen = Generator::new(p.as_ref(), &template, &kb).with_limits(Limits { max_reflections: a.max_reflections });
    let run = gen.generate(description.trim()).map_err(failed)?;

    let out = &a.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display())).map_err(config)?;
    let write = |name: &str, text: &str| write_output(Some(&out.join(name)), text);
    write("device.json", &to_document(&run.spec))?;
    write("run.json", &to_json(&run))?;
    Transcript::from(run.exchanges.clone()).save(out.join("transcript.json")).map_err(failed)?;
    for (r, (spec, erc)) in run.round_specs.iter().zip(&run.erc_history).enumerate() {
        write(&format!("round-{r}.device.json"), &to_document(spec))?;
        write(&format!("round-{r}.erc.json"), &to_json(erc))?;
    }
    let erc = run.final_erc();
    let clean = erc.is_none_or(|e| e.clean);
    let summary = serde_json::json!({
        "device": out.join("device.json"),
        "iterations": run.iterations,
        "termination": run.termination,
        "clean": clean,
        "findings": erc.map_or(0, |e| e.findings.len()),
        "warnings": run.warnings,
    });
    write_output(None, &to_json(&summary))?;
    Ok(code(clean))
}

fn validate_cmd(spec: &Path) -> CmdResult<ExitCode> {
    let spec = read_spec(spec)?;
    let report = validate(&spec);
    for f in &report.findings {
        eprintln!("{f}");
    }
    write_output(None, &to_json(&report))?;
    Ok(code(report.is_clean()))
}

fn erc(a: ErcArgs) -> CmdResult<ExitCode> {
    let spec = read_spec(&a.spec)?;
    let kb = read_kb(a.kb.as_deref())?;
    match run_erc(&spec, &kb, a.rules.as_deref()) {
        Ok(report) => {
            for f in &report.findings {
                eprintln!("{f}");
            }
            write_output(None, &to_json(&report))?;
            let warned = report.findings.iter().any(|f| !f.is_error());
            Ok(code(report.clean && !(a.deny_warnings && warned)))
        }
        Err(ErcError::PrereqFailed(findings)) => {
            for f in &findings {
                eprintln!("{f}");
            }
            write_output(None, &to_json(&serde_json::json!({"structural": findings, "clean": false})))?;
            eprintln!("error: spec is not structurally valid; rules were not run");
            Ok(ExitCode::from(1))
        }
        Err(e @ ErcError::UnknownRule(_)) => Err(config(e)),
    }
}

fn score(kb: Option<&Path>, generated: &Path, overrides: Option<&Path>, report: Option<&Path>) -> CmdResult<ExitCode> {
    let kb = read_kb(kb)?;
    let generated: IndexMap<String, Vec<String>> = serde_json::from_str(&read_input(generated)?)
        .with_context(|| format!("in {}", generated.display()))
        .map_err(failed)?;
    let overrides: Vec<ManualOverride> = match overrides {
        Some(p) => serde_json::from_str(&read_input(p)?).with_context(|| format!("in {}", p.display())).map_err(failed)?,
        None => Vec::new(),
    };
    let r = score_all(&kb, &generated, &overrides).map_err(failed)?;
    eprintln!(
        "{} component(s): strict {:.0}%, permissive {:.0}%",
        r.scores.len(),
        r.aggregate.strict_rate * 100.0,
        r.aggregate.permissive_rate * 100.0
    );
    write_output(report, &to_json(&r))?;
    Ok(ExitCode::SUCCESS)
}

fn read_report(path: &Path) -> CmdResult<BenchReport> {
    BenchReport::from_json(&read_input(path)?).with_context(|| format!("in {}", path.display())).map_err(failed)
}

fn bench(cmd: BenchCommand) -> CmdResult<ExitCode> {
    match cmd {
        BenchCommand::Run { tasks, provider: pa, template, kb, max_reflections, jobs, out } => {
            let tasks = match tasks {
                Some(p) => parse_tasks(&read_input(&p)?).with_context(|| format!("in {}", p.display())).map_err(config)?,
                None => bundled_tasks(),
            };
            let template = read_template(template.as_deref())?;
            let kb = read_kb(kb.as_deref())?;
            let p = provider(&pa)?;
            let opts = BenchOptions {
                limits: Limits { max_reflections },
                jobs: jobs.max(1),
                ..Default::default()
            };
            let report = run_benchmark(&tasks, p.as_ref(), &template, &kb, &opts).map_err(failed)?;
            eprint!("{}", render_report(&report));
            write_output(out.as_deref(), &report.to_json())?;
            Ok(code(!report.has_failures()))
        }
        BenchCommand::Verdicts { input, verdicts, out } => {
            let report = read_report(&input)?;
            let v = parse_verdicts(&read_input(&verdicts)?)
                .with_context(|| format!("in {}", verdicts.display()))
                .map_err(failed)?;
            let report = ingest_manual_verdicts(report, &v).map_err(failed)?;
            eprint!("{}", render_report(&report));
            write_output(out.as_deref(), &report.to_json())?;
            Ok(code(!report.has_failures()))
        }
        BenchCommand::Render { input } => {
            let report = read_report(&input)?;
            write_output(None, &render_report(&report))?;
            Ok(code(!report.has_failures()))
        }
    }
}

fn export_cmd(a: ExportArgs) -> CmdResult<ExitCode> {
    let spec = read_spec(&a.spec)?;
    let kb = read_kb(a.kb.as_deref())?;
    let text = export(&spec, a.format, Some(&kb)).map_err(failed)?;
    write_output(a.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn parts_show(name: &str, kb: Option<&Path>) -> CmdResult<ExitCode> {
    let kb = read_kb(kb)?;
    let rec = kb.lookup(name).ok_or_else(|| failed(anyhow!("no part named {name:?} in the knowledge base")))?;
    write_output(None, &to_json(rec))?;
    Ok(ExitCode::SUCCESS)
}

fn serve(a: ServeArgs) -> CmdResult<ExitCode> {
    let kb = read_kb(a.kb.as_deref())?;
    let mut cfg = ServiceConfig::new(&a.artifacts, kb);
    cfg.template = read_template(a.template.as_deref())?;
    cfg.providers = load_providers(a.providers.as_deref())?;
    cfg.limits = Limits { max_reflections: a.max_reflections };
    if let Some(ui) = &a.with_ui {
        if !ui.join("index.html").is_file() {
            return Err(config(anyhow!("{} has no index.html", ui.display())));
        }
        cfg.ui_dir = Some(ui.clone());
    }
    let rt = tokio::runtime::Runtime::new().map_err(failed)?;
    rt.block_on(wirespec_service::serve(cfg, (a.host, a.port).into()))
        .with_context(|| format!("serving on {}:{}", a.host, a.port))
        .map_err(failed)?;
    Ok(ExitCode::SUCCESS)
}
