#![allow(dead_code)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fx(rel: &str) -> String {
    fixtures().join(rel).display().to_string()
}

pub fn wirespec(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_wirespec"))
        .args(args)
        .stdin(if stdin.is_some() { Stdio::piped() } else { Stdio::null() })
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn wirespec");
    if let Some(text) = stdin {
        child.stdin.take().unwrap().write_all(text.as_bytes()).unwrap();
    }
    child.wait_with_output().unwrap()
}

pub struct Case {
    pub name: String,
    pub args: Vec<String>,
    pub stdin: Option<String>,
    pub expect: i32,
}

fn case(name: impl Into<String>, args: &[&str], expect: i32) -> Case {
    Case {
        name: name.into(),
        args: args.iter().map(|s| s.to_string()).collect(),
        stdin: None,
        expect,
    }
}

/// Every fixture paired with the exit code the command contract demands.
/// Cases run in order; later bench cases read reports written by earlier ones.
pub fn corpus(tmp: &Path) -> Vec<Case> {
    let t = |name: &str| tmp.join(name).display().to_string();
    let mut cases = Vec::new();

    for entry in std::fs::read_dir(fixtures().join("erc")).unwrap() {
        let path = entry.unwrap().path();
        let file = path.file_name().unwrap().to_string_lossy().into_owned();
        let rule = file.trim_end_matches(".device.json");
        let p = path.display().to_string();
        cases.push(case(format!("validate {file}"), &["validate", "--spec", &p], 0));
        let expect = if rule.starts_with("E-") { 1 } else { 0 };
        cases.push(case(format!("erc {file}"), &["erc", "--spec", &p, "--kb", &fx("../crates/core/data/parts.kb.json")], expect));
        let deny = if rule == "clean" { 0 } else { 1 };
        cases.push(case(format!("erc --deny-warnings {file}"), &["erc", "--spec", &p, "--deny-warnings"], deny));
    }
    let clean = fx("erc/clean.device.json");
    let epower = fx("erc/E-POWER.device.json");
    let broken = fx("cli/undeclared_part.device.json");
    let golden = fx("golden/button_led.device.json");
    cases.extend([
        case("validate undeclared part", &["validate", "--spec", &broken], 1),
        case("erc undeclared part", &["erc", "--spec", &broken], 1),
        case("erc subset misses the fault", &["erc", "--spec", &epower, "--rules", "W-PULLUP,E-SHORT"], 0),
        case("erc subset hits the fault", &["erc", "--spec", &epower, "--rules", "E-POWER"], 1),
        case("erc unknown rule", &["erc", "--spec", &clean, "--rules", "E-NOPE"], 2),
        case("erc missing file", &["erc", "--spec", &fx("erc/missing.device.json")], 2),
        case("erc bad kb", &["erc", "--spec", &clean, "--kb", &golden], 2),
        case("erc unknown flag", &["erc", "--spec", &clean, "--bogus"], 2),
        case("erc no spec", &["erc"], 2),
        case("validate golden", &["validate", "--spec", &golden], 0),
        case("export flat", &["export", "--spec", &golden, "--format", "flat"], 0),
        case("export graph", &["export", "--spec", &golden, "--format", "graph", "--out", &t("g.dot")], 0),
        case("export bad format", &["export", "--spec", &golden, "--format", "pdf"], 2),
        case("export undeclared part", &["export", "--spec", &broken], 1),
        case("parts show led", &["parts", "show", "led"], 0),
        case("parts show alias", &["parts", "show", "SG90"], 0),
        case("parts show unknown", &["parts", "show", "flux capacitor"], 1),
        case(
            "score pinouts",
            &[
                "score", "pinouts", "--generated", &fx("pinscore/gen.json"),
                "--overrides", &fx("pinscore/overrides.json"), "--report", &t("score.json"),
            ],
            0,
        ),
        case("score unknown part", &["score", "pinouts", "--generated", &fx("cli/unknown_part.pinouts.json")], 1),
        case(
            "generate replay",
            &[
                "generate", "--description-file", &fx("cli/button_led.txt"),
                "--provider", &format!("replay:{}", fx("transcripts/button_led.json")), "--out", &t("gen"),
            ],
            0,
        ),
        case(
            "generate replay miss",
            &[
                "generate", "--description-file", &fx("erc/clean.device.json"),
                "--provider", &format!("replay:{}", fx("transcripts/button_led.json")), "--out", &t("miss"),
            ],
            1,
        ),
        case(
            "generate bad provider",
            &["generate", "--description-file", &fx("cli/button_led.txt"), "--provider", "carrier-pigeon", "--out", &t("x")],
            2,
        ),
        case(
            "generate live without providers file",
            &["generate", "--description-file", &fx("cli/button_led.txt"), "--provider", "live:openai-chat", "--out", &t("x")],
            2,
        ),
        case(
            "bench run correct",
            &["bench", "run", "--provider", &format!("replay:{}", fx("bench/correct")), "--jobs", "4", "--out", &t("correct.json")],
            0,
        ),
        case(
            "bench run corrupt",
            &["bench", "run", "--provider", &format!("replay:{}", fx("bench/corrupt")), "--out", &t("corrupt.json")],
            1,
        ),
        case("bench render correct", &["bench", "render", "--in", &t("correct.json")], 0),
        case("bench render corrupt", &["bench", "render", "--in", &t("corrupt.json")], 1),
        case(
            "bench verdicts",
            &["bench", "verdicts", "--in", &t("corrupt.json"), "--verdicts", &fx("bench/expert.json"), "--out", &t("reviewed.json")],
            1,
        ),
        case("bench verdicts unknown task", &["bench", "verdicts", "--in", &t("correct.json"), "--verdicts", &fx("pinscore/gen.json")], 1),
        case("bench render missing report", &["bench", "render", "--in", &t("nope.json")], 2),
        case("no subcommand", &[], 2),
        case("unknown subcommand", &["frobnicate"], 2),
        case("help", &["--help"], 0),
        case("subcommand help", &["bench", "run", "--help"], 0),
    ]);

    let text = std::fs::read_to_string(fixtures().join("erc/E-POWER.device.json")).unwrap();
    cases.push(Case { stdin: Some(text), ..case("erc from stdin", &["erc", "--spec", "-"], 1) });
    cases.push(Case { stdin: Some("not a device".into()), ..case("validate garbage from stdin", &["validate", "--spec", "-"], 1) });
    cases
}

/// Runs the corpus; returns one message per broken expectation.
pub fn check_corpus() -> Vec<String> {
    let tmp = tempfile::tempdir().unwrap();
    let mut broken = Vec::new();
    for c in corpus(tmp.path()) {
        let args: Vec<&str> = c.args.iter().map(String::as_str).collect();
        let out = wirespec(&args, c.stdin.as_deref());
        let got = out.status.code().unwrap_or(-1);
        if got != c.expect {
            broken.push(format!(
                "{}: exit {got}, expected {}\n{}",
                c.name,
                c.expect,
                String::from_utf8_lossy(&out.stderr)
            ));
        }
    }
    broken
}
