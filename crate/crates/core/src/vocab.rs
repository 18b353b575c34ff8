//! Merging user-defined class names with generated ones.
//!
//! A generated label joins the vocabulary only if its highest cosine
//! similarity to any user label is strictly below `tau`.

use crate::error::{Error, Result};
use crate::matching::cosine_similarity;
use crate::model::{normalize_label, EmbeddingStore};

pub const DEFAULT_MERGE_TAU: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct KeptLabel {
    pub label: String,
    /// `None` when there are no user labels to compare against.
    pub max_similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedLabel {
    pub label: String,
    pub nearest_user: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MergeResult {
    /// User labels first, then kept generated labels; no duplicates.
    pub merged: Vec<String>,
    pub kept: Vec<KeptLabel>,
    pub dropped: Vec<DroppedLabel>,
}

fn normalized_unique<S: AsRef<str>>(labels: &[S]) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::with_capacity(labels.len());
    for l in labels {
        let n = normalize_label(l.as_ref())?;
        if !out.contains(&n) {
            out.push(n);
        }
    }
    Ok(out)
}

/// `tau` above 1 keeps every generated label.
pub fn merge_vocab<S: AsRef<str>, T: AsRef<str>>(
    user: &[S],
    generated: &[T],
    store: &EmbeddingStore,
    tau: f64,
) -> Result<MergeResult> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::Config(format!("merge threshold {tau} must be >= 0")));
    }
    let user = normalized_unique(user)?;
    let generated = normalized_unique(generated)?;
    let missing = store.missing(user.iter().chain(&generated).map(String::as_str));
    if !missing.is_empty() {
        return Err(Error::MissingEmbedding { labels: missing });
    }

    let mut result = MergeResult {
        merged: user.clone(),
        ..Default::default()
    };
    for g in generated {
        let gv = store.get(&g).expect("checked above");
        let mut nearest: Option<(&str, f64)> = None;
        for u in &user {
            let s = cosine_similarity(gv, store.get(u).expect("checked above"))?;
            if nearest.map_or(true, |(_, best)| s > best) {
                nearest = Some((u, s));
            }
        }
        match nearest {
            Some((u, s)) if s >= tau => result.dropped.push(DroppedLabel {
                label: g,
                nearest_user: u.to_string(),
                similarity: s,
            }),
            _ => {
                if !result.merged.contains(&g) {
                    result.merged.push(g.clone());
                }
                result.kept.push(KeptLabel {
                    label: g,
                    max_similarity: nearest.map(|(_, s)| s),
                });
            }
        }
    }
    Ok(result)
}
