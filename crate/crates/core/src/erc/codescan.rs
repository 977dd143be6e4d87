//! Lexical scan of Arduino-style code for pin-configuration calls.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;

pub const PIN_CALLS: &[&str] = &["pinMode", "digitalWrite", "digitalRead", "analogWrite", "analogRead"];

static CALL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(pinMode|digitalWrite|digitalRead|analogWrite|analogRead)\s*\(\s*([A-Za-z_][A-Za-z0-9_]*|\d+)\s*(?:,\s*([A-Za-z_][A-Za-z0-9_]*))?")
        .unwrap()
});
static CONST_DECL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^\s*(?:static\s+)?(?:const\s+|constexpr\s+)(?:unsigned\s+)?(?:int|byte|uint8_t|short|long|char)\s+([A-Za-z_][A-Za-z0-9_]*)\s*=\s*([A-Za-z0-9_]+)\s*;",
    )
    .unwrap()
});
static DEFINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*#\s*define\s+([A-Za-z_][A-Za-z0-9_]*)\s+([A-Za-z0-9_]+)\s*$").unwrap());
static LITERAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?:\d+|[AD]\d+)$").unwrap());

/// Pin argument of a call, after constant substitution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PinArg {
    Digital(u32),
    /// `A<n>` literal.
    Analog(u32),
    /// `D<n>` literal.
    Named(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PinCall {
    /// 1-based line number.
    pub line: usize,
    pub function: String,
    pub arg: PinArg,
    /// Raw argument text as written.
    pub written: String,
    /// Mode argument of `pinMode`, if any.
    pub mode: Option<String>,
}

impl PinCall {
    /// Candidate microcontroller pin names the argument may refer to.
    pub fn candidate_pins(&self) -> Vec<String> {
        match self.arg {
            PinArg::Digital(n) if self.function == "analogRead" => vec![format!("A{n}"), format!("D{n}"), n.to_string()],
            PinArg::Digital(n) | PinArg::Named(n) => vec![format!("D{n}"), n.to_string()],
            PinArg::Analog(n) => vec![format!("A{n}")],
        }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find("//") {
        Some(i) => &line[..i],
        None => line,
    }
}

fn literal(tok: &str) -> Option<PinArg> {
    if !LITERAL.is_match(tok) {
        return None;
    }
    let n = |s: &str| s.parse::<u32>().ok();
    match tok.as_bytes()[0] {
        b'A' => n(&tok[1..]).map(PinArg::Analog),
        b'D' => n(&tok[1..]).map(PinArg::Named),
        _ => n(tok).map(PinArg::Digital),
    }
}

/// Every pin-configuration call whose pin argument is a literal or a simple
/// constant. Calls with computed arguments are skipped.
pub fn scan_pin_calls(source: &str) -> Vec<PinCall> {
    let mut consts: HashMap<String, String> = HashMap::new();
    for line in source.lines() {
        let line = strip_comment(line);
        if let Some(c) = CONST_DECL.captures(line).or_else(|| DEFINE.captures(line)) {
            consts.insert(c[1].to_string(), c[2].to_string());
        }
    }
    let resolve = |tok: &str| -> Option<PinArg> {
        let mut t = tok.to_string();
        // bounded to avoid cycles in #define chains
        for _ in 0..8 {
            if let Some(a) = literal(&t) {
                return Some(a);
            }
            t = consts.get(&t)?.clone();
        }
        None
    };
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        for c in CALL.captures_iter(strip_comment(line)) {
            if let Some(arg) = resolve(&c[2]) {
                out.push(PinCall {
                    line: i + 1,
                    function: c[1].to_string(),
                    arg,
                    written: c[2].to_string(),
                    mode: c.get(3).map(|m| m.as_str().to_string()),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_and_constants() {
        let src = "const int ledPin = 13;\n#define BTN 2\nvoid setup() {\n  pinMode(ledPin, OUTPUT);\n  pinMode(BTN, INPUT_PULLUP); // button\n  x = analogRead(A0);\n}\n// pinMode(7, OUTPUT);\n";
        let calls = scan_pin_calls(src);
        assert_eq!(calls.len(), 3);
        assert_eq!((calls[0].line, &calls[0].arg), (4, &PinArg::Digital(13)));
        assert_eq!(calls[1].mode.as_deref(), Some("INPUT_PULLUP"));
        assert_eq!(calls[2].arg, PinArg::Analog(0));
    }

    #[test]
    fn computed_arguments_skipped() {
        assert!(scan_pin_calls("for (int i = 2; i < 6; i++) pinMode(i, OUTPUT);").is_empty());
        assert!(scan_pin_calls("pinMode(pins[0], OUTPUT);").is_empty());
    }

    #[test]
    fn candidates() {
        let c = &scan_pin_calls("digitalWrite(D7, HIGH);")[0];
        assert_eq!(c.candidate_pins(), ["D7", "7"]);
    }
}
