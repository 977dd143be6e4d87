use super::*;
use crate::devicespec::from_document;

fn spec(schematic: &str, code: &str) -> DeviceSpec {
    let doc = format!(
        r#"{{
  "description": "t",
  "bill_of_materials": [
    {{"ref": "UNO", "part_type": "arduino uno"}},
    {{"ref": "R1", "part_type": "resistor"}},
    {{"ref": "LED1", "part_type": "led"}}
  ],
  "pinouts": {{
    "UNO": [{{"pin": "D2"}}, {{"pin": "5V"}}, {{"pin": "GND"}}],
    "R1": [{{"pin": "1"}}, {{"pin": "2"}}],
    "LED1": [{{"pin": "anode"}}, {{"pin": "cathode"}}]
  }},
  "schematic": [{schematic}],
  "code": {{"source": {code:?}}}
}}"#
    );
    from_document(&doc).unwrap()
}

const WIRED: &str = r#"{"from": "UNO.D2", "to": "R1.1"}, {"from": "R1.2", "to": "LED1.anode"}, {"from": "LED1.cathode", "to": "UNO.GND"}"#;

#[test]
fn code_pin_connected_and_not() {
    let kb = KnowledgeBase::bundled();
    let s = spec(WIRED, "void setup() { pinMode(2, OUTPUT); }");
    let rep = run_erc(&s, &kb, None).unwrap();
    assert_eq!(rep.by_rule(W_CODE_PIN).count(), 0);
    assert!(rep.clean, "{:?}", rep.findings);

    let s = spec(r#"{"from": "R1.2", "to": "LED1.anode"}"#, "void setup() { pinMode(2, OUTPUT); }");
    let rep = run_erc(&s, &kb, Some(&[W_CODE_PIN.to_string()])).unwrap();
    assert_eq!(rep.findings.len(), 1);
    assert_eq!(rep.findings[0].locus, Locus::CodeLine(1));
}

#[test]
fn led_across_supply() {
    let kb = KnowledgeBase::bundled();
    let s = spec(
        r#"{"from": "UNO.5V", "to": "LED1.anode"}, {"from": "LED1.cathode", "to": "UNO.GND"}"#,
        "",
    );
    let rep = run_erc(&s, &kb, None).unwrap();
    let f: Vec<_> = rep.by_rule(E_LED_RESISTOR).collect();
    assert_eq!(f.len(), 1);
    assert_eq!(f[0].locus, Locus::Pin(PinRef::parse("LED1.anode").unwrap()));
    assert!(!rep.clean);
}

#[test]
fn resistor_on_cathode_side_is_fine() {
    let kb = KnowledgeBase::bundled();
    let s = spec(
        r#"{"from": "UNO.D2", "to": "LED1.anode"}, {"from": "LED1.cathode", "to": "R1.1"}, {"from": "R1.2", "to": "UNO.GND"}"#,
        "",
    );
    assert_eq!(run_erc(&s, &kb, None).unwrap().by_rule(E_LED_RESISTOR).count(), 0);
}

#[test]
fn prereq_and_unknown_rule() {
    let kb = KnowledgeBase::bundled();
    let s = spec(r#"{"from": "UNO.D7", "to": "R1.1"}"#, "");
    assert!(matches!(run_erc(&s, &kb, None), Err(ErcError::PrereqFailed(f)) if f.len() == 1));
    let total = check(&s, &kb);
    assert_eq!(total.by_rule(E_DANGLE).count(), 1);
    let ok = spec(WIRED, "");
    assert!(matches!(
        run_erc(&ok, &kb, Some(&["E-BOGUS".to_string()])),
        Err(ErcError::UnknownRule(r)) if r == "E-BOGUS"
    ));
}

#[test]
fn subset_reports_rules_run_in_registry_order() {
    let kb = KnowledgeBase::bundled();
    let rep = run_erc(&spec(WIRED, ""), &kb, Some(&[W_PULLUP.into(), E_POWER.into()])).unwrap();
    assert_eq!(rep.rules_run, [E_POWER, W_PULLUP]);
}

#[test]
fn unresolved_parts_listed() {
    let kb = KnowledgeBase::bundled();
    let mut s = spec(WIRED, "");
    s.bom.push(crate::devicespec::BomItem::new(PartRef::new("FC1").unwrap(), "flux capacitor"));
    let rep = run_erc(&s, &kb, None).unwrap();
    assert_eq!(rep.unresolved_parts, [PartRef::new("FC1").unwrap()]);
}

#[test]
fn explain_every_rule() {
    for r in RULES {
        let f = Finding::new(r, Locus::Spec, "something is off");
        let text = explain(&f).unwrap();
        assert!(text.starts_with("something is off."));
        assert_eq!(text, explain(&f).unwrap());
    }
    let mut f = Finding::new(E_POWER, Locus::Part(PartRef::new("SERVO1").unwrap()), "x");
    assert!(explain(&f).unwrap().contains("SERVO1"));
    assert!(explain(&f).unwrap().contains("5V"));
    f.rule_id = "E-BOGUS".into();
    assert!(matches!(explain(&f), Err(ErcError::UnknownRule(_))));
}

#[test]
fn severity_follows_prefix() {
    assert!(Finding::new(E_SHORT, Locus::Spec, "").is_error());
    assert!(!Finding::new(W_PULLUP, Locus::Spec, "").is_error());
}

#[test]
fn report_serializes() {
    let kb = KnowledgeBase::bundled();
    let s = spec(r#"{"from": "R1.2", "to": "LED1.anode"}"#, "pinMode(2, OUTPUT);");
    let rep = run_erc(&s, &kb, Some(&[W_CODE_PIN.to_string()])).unwrap();
    let v = serde_json::to_value(&rep).unwrap();
    assert_eq!(v["findings"][0]["rule_id"], "W-CODE-PIN");
    assert_eq!(v["findings"][0]["severity"], "warning");
    assert_eq!(v["findings"][0]["locus"]["code_line"], 1);
    assert_eq!(v["clean"], true);
}
