use std::fmt::Write as _;

use super::{BenchReport, Category, Verdict};

fn mark(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "\u{2713}",
        Verdict::Fail => "\u{2717}",
        Verdict::NeedsReview => "?",
    }
}

fn pct(rate: Option<f64>) -> String {
    match rate {
        Some(r) => format!("{:.0}%", r * 100.0),
        None => "n/a".into(),
    }
}

/// Plain-text table grouped by category, with an overall row.
pub fn render_report(report: &BenchReport) -> String {
    let title_w = report
        .per_task
        .values()
        .map(|t| t.title.chars().count())
        .chain(["Overall performance".len(), "Task".len()])
        .max()
        .unwrap_or(4);
    let mut out = String::new();
    let _ = writeln!(out, "{:<title_w$}  Schematic  Code", "Task");
    if report.per_task.is_empty() {
        return out;
    }
    for cat in Category::ALL {
        let rows: Vec<_> = report.per_task.values().filter(|t| t.category == cat).collect();
        if rows.is_empty() {
            continue;
        }
        let _ = writeln!(out, "[{cat}]");
        for t in rows {
            let _ = writeln!(
                out,
                "{:<title_w$}  {:<9}  {}",
                t.title,
                mark(t.schematic),
                mark(t.code)
            );
        }
    }
    let a = &report.aggregates;
    let _ = writeln!(
        out,
        "{:<title_w$}  {} / {}",
        "Overall performance",
        pct(a.schematic_rate),
        pct(a.code_rate)
    );
    let review = a.schematic.needs_review + a.code.needs_review;
    if review > 0 {
        let _ = writeln!(out, "({review} verdict(s) awaiting review, excluded from rates)");
    }
    out
}
