//! Lenient pre-pass for model-written JSON: blanks out `//` line comments and
//! trailing commas. Removed bytes become spaces, so byte offsets into the
//! repaired text are offsets into the original.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairKind {
    LineComment,
    TrailingComma,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repair {
    pub kind: RepairKind,
    pub start: usize,
    pub end: usize,
}

pub fn repair_json(text: &str) -> (String, Vec<Repair>) {
    let bytes = text.as_bytes();
    let mut out = bytes.to_vec();
    let mut repairs = Vec::new();
    let mut i = 0;
    let mut in_str = false;
    let mut esc = false;
    while i < bytes.len() {
        let b = bytes[i];
        if in_str {
            if esc {
                esc = false;
            } else if b == b'\\' {
                esc = true;
            } else if b == b'"' {
                in_str = false;
            }
            i += 1;
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                let end = line_end(bytes, i);
                out[i..end].fill(b' ');
                repairs.push(Repair {
                    kind: RepairKind::LineComment,
                    start: i,
                    end,
                });
                i = end;
                continue;
            }
            b',' => {
                let next = skip_blank(bytes, i + 1);
                if matches!(bytes.get(next), Some(b'}') | Some(b']')) {
                    out[i] = b' ';
                    repairs.push(Repair {
                        kind: RepairKind::TrailingComma,
                        start: i,
                        end: i + 1,
                    });
                }
            }
            _ => {}
        }
        i += 1;
    }
    // Only ASCII bytes outside strings were replaced, and comment bodies are
    // replaced whole up to a newline, so the result is still UTF-8.
    (String::from_utf8(out).expect("repair keeps utf-8"), repairs)
}

fn line_end(bytes: &[u8], from: usize) -> usize {
    bytes[from..]
        .iter()
        .position(|&b| b == b'\n')
        .map_or(bytes.len(), |p| from + p)
}

/// Skips whitespace and `//` comments.
fn skip_blank(bytes: &[u8], mut i: usize) -> usize {
    loop {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if bytes.get(i) == Some(&b'/') && bytes.get(i + 1) == Some(&b'/') {
            i = line_end(bytes, i);
        } else {
            return i;
        }
    }
}
