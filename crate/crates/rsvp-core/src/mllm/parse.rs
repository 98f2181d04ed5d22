//! Extract a structured region proposal from free-form model output.
//!
//! Models wrap their answer in chain-of-thought prose; the machine-readable
//! part is a JSON object, ideally in a fenced block. The parser accepts a
//! fenced block anywhere in the text, or failing that the first balanced
//! top-level `{...}` that parses as an object with the expected keys. ID
//! values are coerced to integers and clamped into the grid with warnings;
//! empty ID lists mean the model judged the object absent.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::GridSpec;

use super::RegionProposal;

/// A proposal plus non-fatal recovery notes (clamped IDs, coercions, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedProposal {
    pub proposal: RegionProposal,
    pub warnings: Vec<String>,
}

/// Parse a raw completion into a region proposal. Total on arbitrary input:
/// any text either yields a proposal or a `ParseFailure`.
pub fn parse_proposal(raw: &str, grid: &GridSpec) -> Result<ParsedProposal> {
    let candidates = candidate_objects(raw);
    if candidates.is_empty() {
        return Err(Error::ParseFailure(
            "no JSON object found in response".into(),
        ));
    }
    let mut last_err = None;
    for value in candidates {
        match interpret(&value, grid) {
            Ok(parsed) => return Ok(parsed),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::ParseFailure("unusable JSON object".into())))
}

/// Canonical serialization: the fenced block the prompt asks for. Parsing it
/// back reproduces the proposal exactly.
pub fn serialize_proposal(p: &RegionProposal) -> String {
    let body = serde_json::json!({
        "object": p.object_name,
        "attributes": p.attributes,
        "ids_v": p.ids_v,
        "ids_h": p.ids_h,
        "rationale": p.rationale,
    });
    format!("```json\n{body}\n```")
}

/// Collect candidate JSON objects: fenced blocks first, then bare balanced
/// brace spans in order of appearance.
fn candidate_objects(raw: &str) -> Vec<Value> {
    let mut found = Vec::new();
    for block in fenced_blocks(raw) {
        if let Ok(v @ Value::Object(_)) = serde_json::from_str::<Value>(block.trim()) {
            found.push(v);
        }
    }
    let mut search_from = 0;
    while let Some(off) = raw[search_from..].find('{') {
        let start = search_from + off;
        match balanced_object(&raw[start..]) {
            Some(len) => {
                if let Ok(v @ Value::Object(_)) = serde_json::from_str::<Value>(&raw[start..start + len]) {
                    found.push(v);
                    search_from = start + len;
                } else {
                    search_from = start + 1;
                }
            }
            None => break,
        }
    }
    found
}

fn fenced_blocks(raw: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut rest = raw;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        // Skip the info string (e.g. "json") up to the first newline.
        let body_start = match after.find('\n') {
            Some(i) => i + 1,
            None => break,
        };
        let body = &after[body_start..];
        match body.find("```") {
            Some(close) => {
                blocks.push(&body[..close]);
                rest = &body[close + 3..];
            }
            None => break,
        }
    }
    blocks
}

/// Length of the balanced `{...}` starting at byte 0, respecting strings.
fn balanced_object(s: &str) -> Option<usize> {
    let bytes = s.as_bytes();
    debug_assert_eq!(bytes.first(), Some(&b'{'));
    let mut depth = 0i32;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

fn interpret(value: &Value, grid: &GridSpec) -> Result<ParsedProposal> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::ParseFailure("not a JSON object".into()))?;

    let mut warnings = Vec::new();

    let ids_v_raw = obj
        .get("ids_v")
        .ok_or_else(|| Error::ParseFailure("missing key ids_v".into()))?;
    let ids_h_raw = obj
        .get("ids_h")
        .ok_or_else(|| Error::ParseFailure("missing key ids_h".into()))?;
    let ids_v = coerce_ids(ids_v_raw, "ids_v", grid.rows, &mut warnings)?;
    let ids_h = coerce_ids(ids_h_raw, "ids_h", grid.cols, &mut warnings)?;
    let absent = ids_v.is_empty() && ids_h.is_empty();
    if ids_v.is_empty() != ids_h.is_empty() {
        warnings.push("exactly one of ids_v/ids_h is empty; treated as absent downstream".into());
    }

    let object_name = obj
        .get("object")
        .or_else(|| obj.get("object_name"))
        .and_then(Value::as_str)
        .map(str::to_owned);
    let object_name = match object_name {
        Some(s) => s,
        None if absent => String::new(),
        None => return Err(Error::ParseFailure("missing key object".into())),
    };

    let rationale = obj
        .get("rationale")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    if absent && rationale.trim().is_empty() {
        return Err(Error::ParseFailure(
            "absence answer must carry a rationale".into(),
        ));
    }
    if rationale.is_empty() {
        warnings.push("missing rationale".into());
    }

    let attributes = match obj.get("attributes") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .filter_map(|v| match v {
                Value::String(s) => Some(s.clone()),
                other => {
                    warnings.push(format!("non-string attribute {other} stringified"));
                    Some(other.to_string())
                }
            })
            .collect(),
        Some(other) => {
            warnings.push(format!("attributes is not a list: {other}"));
            Vec::new()
        }
    };

    Ok(ParsedProposal {
        proposal: RegionProposal {
            object_name,
            attributes,
            rationale,
            ids_v,
            ids_h,
            absent,
        },
        warnings,
    })
}

fn coerce_ids(value: &Value, key: &str, parts: u32, warnings: &mut Vec<String>) -> Result<Vec<i64>> {
    let items = value
        .as_array()
        .ok_or_else(|| Error::ParseFailure(format!("{key} is not a list")))?;
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        let id = match item {
            Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Some(i)
                } else if let Some(f) = n.as_f64() {
                    if f.fract() == 0.0 && f.abs() < i64::MAX as f64 {
                        warnings.push(format!("{key}: coerced float {f} to integer"));
                        Some(f as i64)
                    } else {
                        None
                    }
                } else {
                    None
                }
            }
            Value::String(s) => match s.trim().parse::<i64>() {
                Ok(i) => {
                    warnings.push(format!("{key}: coerced string {s:?} to integer"));
                    Some(i)
                }
                Err(_) => None,
            },
            _ => None,
        };
        match id {
            Some(i) => {
                let clamped = i.clamp(1, parts as i64);
                if clamped != i {
                    warnings.push(format!("{key}: id {i} clamped to {clamped} (grid has {parts})"));
                }
                out.push(clamped);
            }
            None => warnings.push(format!("{key}: dropped non-integer element {item}")),
        }
    }
    Ok(out)
}
