//! Regenerates the replay transcripts and golden files under `fixtures/`
//! from the scripted responses in `fixtures/scripts/`.
//!
//! Run after any change to the prompt template, the knowledge base or the
//! rule messages, since those alter prompt digests:
//!
//! ```text
//! cargo run -p wirespec --example gen_fixtures
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use wirespec::bench::{bundled_tasks, run_benchmark, BenchOptions};
use wirespec::devicespec::to_document;
use wirespec::llmgateway::{FnProvider, GatewayError, RecordingProvider, ReplayProvider};
use wirespec::partsdb::KnowledgeBase;
use wirespec::pipeline::{Generator, PromptTemplate, Session};

const TIMESTAMP: &str = "2024-01-01T00:00:00Z";

#[derive(Deserialize)]
struct Refine {
    text: String,
    response: String,
}

#[derive(Deserialize)]
struct NoStop {
    description: String,
    response: String,
}

#[derive(Deserialize)]
struct ButtonLed {
    description: String,
    initial: String,
    fixed: String,
    refines: Vec<Refine>,
    no_stop: NoStop,
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn read_json<T: for<'de> Deserialize<'de>>(name: &str) -> T {
    let text = fs::read_to_string(root().join("scripts").join(name)).expect(name);
    serde_json::from_str(&text).expect(name)
}

fn task_description(prompt: &str) -> Option<&str> {
    let (_, rest) = prompt.rsplit_once("## Task\nDescription: ")?;
    Some(rest.lines().next().unwrap_or("").trim())
}

fn scripted(f: impl Fn(&str) -> Option<String> + Send + Sync + 'static) -> FnProvider {
    FnProvider::new(move |prompt, _| {
        f(prompt).ok_or_else(|| GatewayError::Transcript(format!("no scripted answer for prompt: {:.80}", prompt)))
    })
    .with_fixed_timestamp(TIMESTAMP)
    .named("scripted")
}

fn bench_corpus(dir: &str, responses: HashMap<String, String>, stop: String) {
    let tasks = bundled_tasks();
    let by_desc: HashMap<String, String> = tasks
        .iter()
        .map(|t| (t.description.trim().to_string(), responses[&t.id].clone()))
        .collect();
    let kb = KnowledgeBase::bundled();
    let template = PromptTemplate::bundled();
    let rec = RecordingProvider::in_memory(scripted(move |p| {
        if p.contains("## Checklist") {
            return Some(stop.clone());
        }
        by_desc.get(task_description(p)?).cloned()
    }));
    let report = run_benchmark(&tasks, &rec, &template, &kb, &BenchOptions::default()).expect("bench");
    let out = root().join("bench").join(dir);
    fs::create_dir_all(&out).unwrap();
    rec.transcript().save(out.join("micro25.json")).unwrap();
    println!(
        "bench/{dir}: {} entries, schematic {:?}, code {:?}",
        rec.transcript().len(),
        report.aggregates.schematic_rate,
        report.aggregates.code_rate
    );
}

fn button_led() {
    let script: ButtonLed = read_json("button_led.json");
    let kb = KnowledgeBase::bundled();
    let template = PromptTemplate::bundled();
    let stop = template.stop_token.clone();
    let (desc, initial, fixed) = (script.description.clone(), script.initial.clone(), script.fixed.clone());
    let refines: Vec<(String, String)> = script.refines.iter().map(|r| (r.text.clone(), r.response.clone())).collect();
    let stop2 = stop.clone();
    let rec = RecordingProvider::in_memory(scripted(move |p| {
        if p.contains("## Checklist") {
            return Some(if p.contains("[E-LED-RESISTOR]") { fixed.clone() } else { stop2.clone() });
        }
        if let Some((_, req)) = p.split_once("## Requested change\n") {
            return refines.iter().find(|(t, _)| req.starts_with(t.as_str())).map(|(_, r)| r.clone());
        }
        (task_description(p)? == desc).then(|| initial.clone())
    }));
    let gen = Generator::new(&rec, &template, &kb);
    let mut s = Session::with_id("fixture");
    s.generate(&script.description, &gen).expect("generate");
    for r in &script.refines {
        s.refine(&r.text, &gen).expect("refine");
    }
    let out = root().join("transcripts");
    fs::create_dir_all(&out).unwrap();
    let path = out.join("button_led.json");
    rec.transcript().save(&path).unwrap();

    // golden comes from replaying the saved transcript, exactly as consumers do
    let replay = ReplayProvider::open(&path).unwrap();
    let run = Generator::new(&replay, &template, &kb).generate(&script.description).unwrap();
    assert!(run.final_erc().unwrap().clean, "golden must be clean");
    fs::create_dir_all(root().join("golden")).unwrap();
    fs::write(root().join("golden/button_led.device.json"), to_document(&run.spec)).unwrap();
    println!(
        "button_led: {} entries, {} iterations, {:?}",
        rec.transcript().len(),
        run.iterations,
        run.termination
    );

    // a model that never signals completion
    let ns = script.no_stop;
    let d = ns.description.clone();
    let rec = RecordingProvider::in_memory(scripted(move |p| {
        if p.contains("## Checklist") || task_description(p)? == d {
            Some(ns.response.clone())
        } else {
            None
        }
    }));
    let run = Generator::new(&rec, &template, &kb).generate(&ns.description).unwrap();
    rec.transcript().save(out.join("no_stop.json")).unwrap();
    println!("no_stop: {} iterations, {:?}", run.iterations, run.termination);
}

fn main() {
    let stop = PromptTemplate::bundled().stop_token;
    let correct: HashMap<String, String> = read_json("bench_responses.json");
    let mut corrupt = correct.clone();
    corrupt.extend(read_json::<HashMap<String, String>>("bench_corrupt.json"));
    bench_corpus("correct", correct, stop.clone());
    bench_corpus("corrupt", corrupt, stop);
    button_led();
}
