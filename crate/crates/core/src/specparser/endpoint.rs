use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::devicespec::{PartRef, PinRef};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EndpointError {
    #[error("malformed endpoint {0:?}: expected PART.PIN")]
    MalformedEndpoint(String),
    #[error("endpoint {0:?} is a range shortcut; each connection must be listed individually")]
    RangeShortcut(String),
}

impl EndpointError {
    pub fn code(&self) -> &'static str {
        match self {
            EndpointError::MalformedEndpoint(_) => "MalformedEndpoint",
            EndpointError::RangeShortcut(_) => "RangeShortcut",
        }
    }
}

// `D2-D9`, `2 - 9`, `Q1–Q4`: numbered token, dash, numbered token.
static DASH_RANGE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^[A-Za-z_]*\d+\s*[-\u{2013}\u{2014}]\s*[A-Za-z_]*\d+$").unwrap()
});
static WORD_RANGE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^[A-Za-z_]*\d+\s+(to|through|thru)\s+[A-Za-z_]*\d+$").unwrap());
// Datasheet names such as `1,2EN` on an L293D: one pin, not a list.
static SHARED_NAME: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d+(,\d+)+[A-Za-z]+\d*$").unwrap());
static BUS_RANGE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[\s*\d+\s*:\s*\d+\s*\]").unwrap());

/// True when a part or pin token stands for several pins at once.
pub fn is_range_token(token: &str) -> bool {
    let t = token.trim();
    DASH_RANGE.is_match(t) || WORD_RANGE.is_match(t) || BUS_RANGE.is_match(t)
}

/// True when a whole endpoint string uses any range or wildcard notation.
pub fn is_range_endpoint(s: &str) -> bool {
    let s = s.trim();
    if s.contains("..") || s.contains('\u{2026}') || s.contains('*') {
        return true;
    }
    if s.contains('{') || s.contains('}') {
        return true;
    }
    let listed = |t: &str| t.contains(',') && !SHARED_NAME.is_match(t.trim());
    match s.split_once('.') {
        Some((part, pin)) => listed(part) || listed(pin) || is_range_token(part) || is_range_token(pin),
        None => listed(s) || is_range_token(s),
    }
}

/// Parses a model-written endpoint such as `LED1.anode`.
pub fn parse_pin_endpoint(s: &str) -> Result<PinRef, EndpointError> {
    let t = s.trim();
    if is_range_endpoint(t) {
        return Err(EndpointError::RangeShortcut(t.to_string()));
    }
    let (part, pin) = t
        .split_once('.')
        .ok_or_else(|| EndpointError::MalformedEndpoint(t.to_string()))?;
    let part = PartRef::new(part.trim()).map_err(|_| EndpointError::MalformedEndpoint(t.to_string()))?;
    PinRef::new(part, pin).map_err(|_| EndpointError::MalformedEndpoint(t.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_endpoints() {
        let p = parse_pin_endpoint("LED1.anode").unwrap();
        assert_eq!((p.part.as_str(), p.pin.as_str()), ("LED1", "anode"));
        let p = parse_pin_endpoint("  UNO.A0 ").unwrap();
        assert_eq!((p.part.as_str(), p.pin.as_str()), ("UNO", "A0"));
        let p = parse_pin_endpoint("UNO.3.3V").unwrap();
        assert_eq!(p.pin, "3.3V");
    }

    #[test]
    fn ranges_rejected() {
        for s in ["UNO.D2-D9", "LED1..LED4", "UNO.D*", "UNO.2 to 5", "U1.Q[0:3]", "LED1-LED4.anode"] {
            assert!(matches!(parse_pin_endpoint(s), Err(EndpointError::RangeShortcut(_))), "{s}");
        }
    }

    #[test]
    fn malformed() {
        assert!(matches!(parse_pin_endpoint("UNO"), Err(EndpointError::MalformedEndpoint(_))));
        assert!(matches!(parse_pin_endpoint(".D2"), Err(EndpointError::MalformedEndpoint(_))));
        assert!(matches!(parse_pin_endpoint("UNO."), Err(EndpointError::MalformedEndpoint(_))));
        assert!(matches!(parse_pin_endpoint("MY UNO.D2"), Err(EndpointError::MalformedEndpoint(_))));
    }

    #[test]
    fn signed_pin_names_are_not_ranges() {
        for s in ["U1.1,2EN", "U1.IN-", "U1.V-", "U1.IN+", "BAT.-", "U1.OUT1", "K1.COM"] {
            assert!(parse_pin_endpoint(s).is_ok(), "{s}");
        }
    }
}
