//! Turns a label generator's free-text reply into an ordered label list.
//!
//! The reply is split on newlines, commas and semicolons. Each piece loses
//! list markers (`-`, `*`, `+`, `•`, `1.`, `2)`), wrapping quotes and trailing
//! periods, then is normalized. The first occurrence of a label wins.

use owdet_core::normalize_label;

/// Parsed labels plus warnings about the reply.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedReply {
    pub labels: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn parse_label_reply(reply: &str) -> ParsedReply {
    let mut labels: Vec<String> = Vec::new();
    for piece in reply.split(['\n', ',', ';']) {
        let Ok(label) = normalize_label(&clean(piece)) else {
            continue;
        };
        if !labels.contains(&label) {
            labels.push(label);
        }
    }
    let mut warnings = Vec::new();
    if reply.chars().all(|c| c.is_whitespace() || matches!(c, ',' | ';')) {
        warnings.push("empty reply from label generator".to_string());
    } else if labels.is_empty() {
        warnings.push("label generator reply contained no labels".to_string());
    }
    ParsedReply { labels, warnings }
}

fn clean(piece: &str) -> String {
    let mut s = piece.trim().to_string();
    loop {
        let next = strip_once(&s);
        if next == s {
            return s;
        }
        s = next;
    }
}

fn strip_once(s: &str) -> String {
    let s = strip_marker(s.trim());
    let s = s.trim_end_matches('.').trim();
    let s = s.trim_matches(|c| matches!(c, '"' | '\'' | '`'));
    s.trim().to_string()
}

/// Removes one leading bullet or enumeration marker followed by whitespace
/// (or ending the piece).
fn strip_marker(s: &str) -> &str {
    let followed_by_space = |rest: &str| rest.is_empty() || rest.starts_with(char::is_whitespace);
    for bullet in ['-', '*', '+', '•'] {
        if let Some(rest) = s.strip_prefix(bullet) {
            if followed_by_space(rest) {
                return rest;
            }
        }
    }
    let digits = s.len() - s.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits > 0 {
        let rest = &s[digits..];
        for close in ['.', ')'] {
            if let Some(after) = rest.strip_prefix(close) {
                if followed_by_space(after) {
                    return after;
                }
            }
        }
    }
    s
}
