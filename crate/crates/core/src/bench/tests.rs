use super::*;
use crate::llmgateway::FnProvider;

fn task(id: &str, category: Category) -> BenchTask {
    BenchTask {
        id: id.into(),
        category,
        title: format!("Title {id}"),
        description: format!("describe {id}"),
        auto_checks: vec![],
        manual_verdict: None,
    }
}

fn result(category: Category, schematic: Verdict, code: Verdict) -> TaskResult {
    TaskResult {
        category,
        title: "t".into(),
        schematic,
        code,
        source: Source::Auto,
        checks: vec![],
        erc_errors: 0,
        erc_warnings: 0,
        iterations: None,
        termination: None,
        notes: vec![],
    }
}

#[test]
fn bundled_corpus_shape() {
    let tasks = bundled_tasks();
    assert_eq!(tasks.len(), 25);
    let mut counts = BTreeMap::new();
    for t in &tasks {
        *counts.entry(t.category).or_insert(0) += 1;
        assert!(!t.auto_checks.is_empty(), "{} has no checks", t.id);
    }
    assert_eq!(
        counts.into_iter().collect::<Vec<_>>(),
        vec![
            (Category::Input, 3),
            (Category::Protocols, 4),
            (Category::Output, 11),
            (Category::Sensors, 3),
            (Category::Logic, 4)
        ]
    );
}

#[test]
fn bundled_checks_name_known_parts() {
    let kb = KnowledgeBase::bundled();
    for t in bundled_tasks() {
        for c in &t.auto_checks {
            let names: Vec<&str> = match c {
                AutoCheck::RequiresPart { name } => vec![name],
                AutoCheck::RequiresNet { a, b } => vec![a.rsplit_once('.').unwrap().0, b.rsplit_once('.').unwrap().0],
                _ => vec![],
            };
            for n in names {
                assert!(kb.lookup(n).is_some(), "{}: {n}", t.id);
            }
        }
    }
}

#[test]
fn empty_task_file_is_a_schema_error() {
    assert!(matches!(parse_tasks(""), Err(BenchError::Schema(_))));
    assert!(matches!(parse_tasks("{\"id\": 1}"), Err(BenchError::Schema(_))));
}

#[test]
fn duplicate_ids_rejected() {
    let t = task("a", Category::Input);
    let text = serde_json::to_string(&vec![t.clone(), t]).unwrap();
    assert!(matches!(parse_tasks(&text), Err(BenchError::DuplicateId(id)) if id == "a"));
}

#[test]
fn empty_task_list_is_empty_input() {
    let kb = KnowledgeBase::bundled();
    let tpl = PromptTemplate::bundled();
    let p = FnProvider::new(|_, _| Ok(String::new()));
    let r = run_benchmark(&[], &p, &tpl, &kb, &BenchOptions::default());
    assert!(matches!(r, Err(BenchError::EmptyInput)));
}

#[test]
fn unknown_verdict_id_rejected() {
    let mut per = IndexMap::new();
    per.insert("a".to_string(), result(Category::Input, Verdict::Pass, Verdict::Pass));
    let report = BenchReport::from_results(per);
    let v = parse_verdicts(r#"{"zzz": {"schematic": "pass", "code": "fail"}}"#).unwrap();
    assert!(matches!(ingest_manual_verdicts(report, &v), Err(BenchError::UnknownTaskId(id)) if id == "zzz"));
}

#[test]
fn manual_verdict_wins_and_contradiction_is_noted() {
    let mut per = IndexMap::new();
    per.insert("a".to_string(), result(Category::Input, Verdict::Pass, Verdict::NeedsReview));
    per.insert("b".to_string(), result(Category::Logic, Verdict::Pass, Verdict::Pass));
    let report = BenchReport::from_results(per);
    let v = parse_verdicts(r#"{"a": {"schematic": "fail", "code": "pass", "notes": "miswired"}}"#).unwrap();
    let out = ingest_manual_verdicts(report, &v).unwrap();
    let a = &out.per_task["a"];
    assert_eq!((a.schematic, a.code, a.source), (Verdict::Fail, Verdict::Pass, Source::Manual));
    // only the decided automatic verdict counts as a contradiction
    assert_eq!(a.notes.iter().filter(|n| n.contains("contradicts")).count(), 1);
    assert!(a.notes.iter().any(|n| n == "miswired"));
    assert_eq!(out.aggregates.schematic.fail, 1);
    assert_eq!(out.aggregates.code.pass, 2);
}

#[test]
fn aggregates_match_a_direct_count() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let vs = [Verdict::Pass, Verdict::Fail, Verdict::NeedsReview];
    for _ in 0..50 {
        let n = rng.random_range(1..40);
        let mut per = IndexMap::new();
        let mut rows = Vec::new();
        for i in 0..n {
            let c = Category::ALL[rng.random_range(0..5)];
            let s = vs[rng.random_range(0..3)];
            let k = vs[rng.random_range(0..3)];
            rows.push((c, s, k));
            per.insert(format!("t{i}"), result(c, s, k));
        }
        let report = BenchReport::from_results(per);
        let count = |f: &dyn Fn(&(Category, Verdict, Verdict)) -> bool| rows.iter().filter(|r| f(r)).count();
        let sp = count(&|r| r.1 == Verdict::Pass);
        let sf = count(&|r| r.1 == Verdict::Fail);
        let a = &report.aggregates;
        assert_eq!((a.schematic.pass, a.schematic.fail), (sp, sf));
        assert_eq!(a.schematic.needs_review, n - sp - sf);
        let expect = (sp + sf > 0).then(|| sp as f64 / (sp + sf) as f64);
        assert_eq!(a.schematic_rate, expect);
        for cat in Category::ALL {
            let tasks = count(&|r| r.0 == cat);
            let got = report.category_counts().get(&cat).copied().unwrap_or(0);
            assert_eq!(got, tasks);
            if tasks > 0 {
                let cp = count(&|r| r.0 == cat && r.2 == Verdict::Pass);
                assert_eq!(a.by_category[&cat].code.pass, cp);
            }
        }
    }
}

#[test]
fn render_all_pass_and_partial() {
    let mut per = IndexMap::new();
    for i in 0..25 {
        per.insert(format!("t{i}"), result(Category::ALL[i % 5], Verdict::Pass, Verdict::Pass));
    }
    let mut report = BenchReport::from_results(per);
    let text = render_report(&report);
    assert!(text.starts_with("Task"));
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("Overall performance"));
    assert!(last.ends_with("100% / 100%"), "{last}");
    assert_eq!(text.matches('\u{2713}').count(), 50);

    report.per_task["t3"].schematic = Verdict::Fail;
    report.recompute();
    let text = render_report(&report);
    assert!(text.lines().last().unwrap().ends_with("96% / 100%"));
    assert_eq!(text.matches('\u{2717}').count(), 1);
}

#[test]
fn render_empty_is_header_only() {
    let text = render_report(&BenchReport::default());
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("Task"));
}

#[test]
fn report_json_round_trips() {
    let mut per = IndexMap::new();
    per.insert("x".to_string(), result(Category::Sensors, Verdict::Fail, Verdict::NeedsReview));
    let r = BenchReport::from_results(per);
    assert_eq!(BenchReport::from_json(&r.to_json()).unwrap(), r);
}

#[test]
fn verdicts_without_specific_checks_need_review() {
    let kb = KnowledgeBase::bundled();
    let spec: DeviceSpec = crate::devicespec::from_document(include_str!("../../../../fixtures/erc/clean.device.json")).unwrap();
    let erc = crate::erc::check(&spec, &kb);
    let mut t = task("x", Category::Input);
    t.auto_checks = vec![AutoCheck::ErcClean];
    let r = auto_verdicts(&t, &spec, &erc, &kb);
    assert_eq!((r.schematic, r.code), (Verdict::NeedsReview, Verdict::NeedsReview));

    t.auto_checks = vec![
        AutoCheck::ErcClean,
        AutoCheck::RequiresNet {
            a: "arduino uno.2".into(),
            b: "pushbutton.*".into(),
        },
        AutoCheck::CodeContains { token: "buttonPin".into() },
    ];
    let r = auto_verdicts(&t, &spec, &erc, &kb);
    assert_eq!((r.schematic, r.code), (Verdict::Pass, Verdict::Pass));

    t.auto_checks.push(AutoCheck::RequiresPart { name: "servo".into() });
    let r = auto_verdicts(&t, &spec, &erc, &kb);
    assert_eq!(r.schematic, Verdict::Fail);
}
