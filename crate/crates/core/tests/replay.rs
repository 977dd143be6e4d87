use std::path::{Path, PathBuf};
use std::time::Instant;

use wirespec::bench::{bundled_tasks, ingest_manual_verdicts, parse_verdicts, render_report, run_benchmark, BenchOptions, Category, Verdict};
use wirespec::devicespec::{from_document, to_document};
use wirespec::llmgateway::ReplayProvider;
use wirespec::partsdb::KnowledgeBase;
use wirespec::pipeline::{generate_device, Generator, Limits, PromptTemplate, SessionStore, Termination, TurnKind};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn script() -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(fixtures().join("scripts/button_led.json")).unwrap()).unwrap()
}

fn replay(rel: &str) -> ReplayProvider {
    ReplayProvider::open(fixtures().join(rel)).unwrap()
}

#[test]
fn button_led_matches_golden() {
    let kb = KnowledgeBase::bundled();
    let tpl = PromptTemplate::bundled();
    let golden_text = std::fs::read_to_string(fixtures().join("golden/button_led.device.json")).unwrap();
    let golden = from_document(&golden_text).unwrap();
    let p = replay("transcripts/button_led.json");
    let run = generate_device(&golden.description, &p, &tpl, &kb, Limits::default()).unwrap();
    assert_eq!(run.spec, golden);
    assert_eq!(to_document(&run.spec), golden_text);
    assert!(run.final_erc().unwrap().clean);
    // the first answer omits the LED resistor and the rule check catches it
    assert!(!run.erc_history[0].clean);
    assert!(run.erc_history[0].by_rule("E-LED-RESISTOR").next().is_some());
    assert_eq!((run.iterations, run.termination), (3, Termination::StopToken));
    assert_eq!(run.spec.provenance.reflection_iterations, 2);
}

#[test]
fn replay_runs_are_byte_identical() {
    let kb = KnowledgeBase::bundled();
    let tpl = PromptTemplate::bundled();
    let desc = script()["description"].as_str().unwrap().to_string();
    let p = replay("transcripts/button_led.json");
    let runs: Vec<String> = (0..3)
        .map(|_| serde_json::to_string_pretty(&generate_device(&desc, &p, &tpl, &kb, Limits::default()).unwrap()).unwrap())
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[1], runs[2]);
}

#[test]
fn never_stopping_model_hits_the_limit() {
    let kb = KnowledgeBase::bundled();
    let tpl = PromptTemplate::bundled();
    let desc = script()["no_stop"]["description"].as_str().unwrap().to_string();
    let p = replay("transcripts/no_stop.json");
    let run = generate_device(&desc, &p, &tpl, &kb, Limits { max_reflections: 3 }).unwrap();
    assert_eq!((run.iterations, run.termination), (4, Termination::MaxIterations));
    let again = generate_device(&desc, &p, &tpl, &kb, Limits { max_reflections: 3 }).unwrap();
    assert_eq!(run, again);
    // a lower limit asks for prompts the transcript already holds
    let short = generate_device(&desc, &p, &tpl, &kb, Limits { max_reflections: 1 }).unwrap();
    assert_eq!((short.iterations, short.termination), (2, Termination::MaxIterations));
}

#[test]
fn refine_turns_replay_and_persist() {
    let kb = KnowledgeBase::bundled();
    let tpl = PromptTemplate::bundled();
    let s = script();
    let p = replay("transcripts/button_led.json");
    let gen = Generator::new(&p, &tpl, &kb);
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::new(dir.path());
    let mut session = store.create().unwrap();
    session.generate(s["description"].as_str().unwrap(), &gen).unwrap();
    store.record_last_turn(&session).unwrap();
    for r in s["refines"].as_array().unwrap() {
        let turn = session.refine(r["text"].as_str().unwrap(), &gen).unwrap();
        // stop token on the first reflection
        assert_eq!((turn.run.iterations, turn.run.termination), (2, Termination::StopToken));
        assert!(turn.run.final_erc().unwrap().clean);
        store.record_last_turn(&session).unwrap();
    }
    assert_eq!(session.turns.len(), 3);
    assert_eq!(session.turns[1].kind, TurnKind::Refine);
    let second = &session.turns[1].run.spec;
    assert!(second.bom.iter().any(|b| b.part.as_str() == "LED2"));
    // the last answer only revises the code; the rest carries over
    let third = &session.turns[2].run.spec;
    assert_eq!(third.bom, second.bom);
    assert_eq!(third.connections, second.connections);
    assert!(third.code.as_ref().unwrap().source.contains("millis"));

    let loaded = store.load(&session.id).unwrap();
    assert_eq!(serde_json::to_string(&loaded.turns).unwrap(), serde_json::to_string(&session.turns).unwrap());
    assert_eq!(loaded.current, session.current);
    let d = store.dir(&session.id);
    assert!(d.join("turn-0/round-0.device.json").is_file());
    assert!(d.join("turn-0/round-1.erc.json").is_file());
    assert!(d.join("final.device.json").is_file());
}

#[test]
fn bench_correct_corpus_scores_full_marks() {
    let kb = KnowledgeBase::bundled();
    let tpl = PromptTemplate::bundled();
    let tasks = bundled_tasks();
    let p = replay("bench/correct");
    let t0 = Instant::now();
    let report = run_benchmark(&tasks, &p, &tpl, &kb, &BenchOptions::default()).unwrap();
    assert!(t0.elapsed().as_secs() < 60);
    let a = &report.aggregates;
    assert_eq!((a.schematic.pass, a.code.pass), (25, 25));
    assert_eq!(a.schematic.needs_review + a.code.needs_review, 0);
    assert_eq!((a.schematic_rate, a.code_rate), (Some(1.0), Some(1.0)));
    let counts: Vec<usize> = Category::ALL.iter().map(|c| report.category_counts()[c]).collect();
    assert_eq!(counts, [3, 4, 11, 3, 4]);
    assert!(render_report(&report).trim_end().ends_with("100% / 100%"));

    let parallel = run_benchmark(&tasks, &p, &tpl, &kb, &BenchOptions { jobs: 4, ..Default::default() }).unwrap();
    assert_eq!(parallel.to_json(), report.to_json());
}

#[test]
fn bench_corrupt_corpus_loses_one_schematic() {
    let kb = KnowledgeBase::bundled();
    let tpl = PromptTemplate::bundled();
    let p = replay("bench/corrupt");
    let report = run_benchmark(&bundled_tasks(), &p, &tpl, &kb, &BenchOptions::default()).unwrap();
    let a = &report.aggregates;
    assert_eq!((a.schematic.pass, a.schematic.fail), (24, 1));
    assert_eq!(a.schematic_rate, Some(24.0 / 25.0));
    assert_eq!(a.code_rate, Some(1.0));
    let bad = &report.per_task["out-led-seq"];
    assert_eq!(bad.schematic, Verdict::Fail);
    // the parser drops the range line, leaving the LEDs unwired
    assert!(bad.checks.iter().any(|c| c.check.starts_with("requires_net") && !c.passed));
    let table = render_report(&report);
    let overall = table.lines().find(|l| l.starts_with("Overall performance")).unwrap();
    assert!(overall.ends_with("96% / 100%"), "{table}");

    let expert = std::fs::read_to_string(fixtures().join("bench/expert.json")).unwrap();
    let resolved = ingest_manual_verdicts(report, &parse_verdicts(&expert).unwrap()).unwrap();
    assert_eq!(resolved.per_task.len(), 25);
}

