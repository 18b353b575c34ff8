//! Minimal canonical JSON writer: sorted keys, two-space indent and reals
//! printed with six fractional digits (round-half-even on the exact binary
//! value). Used wherever output must be byte-stable.

use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub enum JsonNode {
    Null,
    Bool(bool),
    Int(i64),
    /// Printed with six fractional digits; non-finite values become `null`.
    Fixed(f64),
    Str(String),
    Array(Vec<JsonNode>),
    Object(BTreeMap<String, JsonNode>),
}

/// `{:.6}` formatting with negative zero folded to zero.
pub fn fixed6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

impl JsonNode {
    pub fn object<K: Into<String>>(entries: impl IntoIterator<Item = (K, JsonNode)>) -> Self {
        JsonNode::Object(entries.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn opt_fixed(v: Option<f64>) -> Self {
        v.map_or(JsonNode::Null, JsonNode::Fixed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }

    fn write(&self, out: &mut String, depth: usize) {
        match self {
            JsonNode::Null => out.push_str("null"),
            JsonNode::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            JsonNode::Int(i) => out.push_str(&i.to_string()),
            JsonNode::Fixed(v) if v.is_finite() => out.push_str(&fixed6(*v)),
            JsonNode::Fixed(_) => out.push_str("null"),
            JsonNode::Str(s) => {
                out.push_str(&serde_json::to_string(s).expect("strings always serialize"))
            }
            JsonNode::Array(items) if items.is_empty() => out.push_str("[]"),
            JsonNode::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    newline(out, depth + 1);
                    item.write(out, depth + 1);
                }
                newline(out, depth);
                out.push(']');
            }
            JsonNode::Object(map) if map.is_empty() => out.push_str("{}"),
            JsonNode::Object(map) => {
                out.push('{');
                for (i, (k, v)) in map.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    newline(out, depth + 1);
                    out.push_str(&serde_json::to_string(k).expect("strings always serialize"));
                    out.push_str(": ");
                    v.write(out, depth + 1);
                }
                newline(out, depth);
                out.push('}');
            }
        }
    }
}

fn newline(out: &mut String, depth: usize) {
    out.push('\n');
    for _ in 0..depth {
        out.push_str("  ");
    }
}
