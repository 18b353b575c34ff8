use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, write_atomic};
use crate::error::{Error, Result};
use crate::model::{normalize_label, EmbeddingStore};

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedEmbeddings {
    pub store: EmbeddingStore,
    pub warnings: Vec<String>,
}

#[derive(Deserialize)]
struct Line {
    label: String,
    vector: Vec<f64>,
}

#[derive(Serialize)]
struct OutLine<'a> {
    label: &'a str,
    vector: &'a [f64],
}

pub fn load_embeddings(path: &Path) -> Result<LoadedEmbeddings> {
    parse_embeddings(&read_text(path)?, &path.display().to_string())
}

/// Parses JSON Lines of `{"label": ..., "vector": [...]}`. Blank lines are
/// skipped; a repeated label replaces the earlier vector with a warning.
pub fn parse_embeddings(text: &str, source: &str) -> Result<LoadedEmbeddings> {
    let mut store: Option<EmbeddingStore> = None;
    let mut warnings = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let line: Line = serde_json::from_str(raw).map_err(|e| Error::Parse {
            path: source.to_string(),
            line: line_no,
            column: e.column(),
            message: e.to_string(),
        })?;
        let label = normalize_label(&line.label).map_err(|_| {
            Error::validation(
                "embedding with blank label",
                vec![format!("{source} line {line_no}")],
            )
        })?;
        let store = match &mut store {
            Some(s) => s,
            None => store.insert(EmbeddingStore::new(line.vector.len()).map_err(|_| {
                Error::Embedding(format!("{source} line {line_no}: empty vector"))
            })?),
        };
        if line.vector.len() != store.dimension() {
            return Err(Error::Embedding(format!(
                "{source} line {line_no}: vector for {label:?} has dimension {}, expected {}",
                line.vector.len(),
                store.dimension()
            )));
        }
        let replaced = store
            .insert(&label, line.vector)
            .map_err(|e| Error::Embedding(format!("{source} line {line_no}: {e}")))?;
        if replaced.is_some() {
            warnings.push(format!(
                "line {line_no}: duplicate label {label:?} replaces earlier vector"
            ));
        }
    }
    let store = store.ok_or_else(|| Error::Embedding(format!("{source}: no embeddings")))?;
    Ok(LoadedEmbeddings { store, warnings })
}

/// One line per label, sorted by label.
pub fn write_embeddings(path: &Path, store: &EmbeddingStore) -> Result<()> {
    let mut out = String::new();
    for (label, vector) in store.iter() {
        out.push_str(
            &serde_json::to_string(&OutLine { label, vector }).expect("embeddings serialize"),
        );
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_lines_dim_four() {
        let text = "{\"label\": \"Car\", \"vector\": [1, 0, 0, 0]}\n\n{\"label\": \"dog\", \"vector\": [0, 1, 0, 0.5]}\n";
        let e = parse_embeddings(text, "e.jsonl").unwrap();
        assert_eq!(e.store.dimension(), 4);
        assert_eq!(e.store.len(), 2);
        assert!(e.store.contains("car"));
    }

    #[test]
    fn mixed_dimensions_name_line() {
        let text = "{\"label\": \"a\", \"vector\": [1, 0, 0, 0]}\n{\"label\": \"b\", \"vector\": [1, 0, 0, 0, 0]}\n";
        match parse_embeddings(text, "e.jsonl") {
            Err(Error::Embedding(msg)) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicates_last_wins() {
        let text = "{\"label\": \"a\", \"vector\": [1, 0]}\n{\"label\": \"A \", \"vector\": [0, 1]}\n";
        let e = parse_embeddings(text, "e.jsonl").unwrap();
        assert_eq!(e.store.len(), 1);
        assert_eq!(e.store.get("a").unwrap(), &[0.0, 1.0]);
        assert_eq!(e.warnings.len(), 1);
    }

    #[test]
    fn zero_norm_rejected() {
        let text = "{\"label\": \"a\", \"vector\": [0, 0]}\n";
        assert!(matches!(parse_embeddings(text, "e"), Err(Error::Embedding(_))));
    }

    #[test]
    fn bad_json_line_reported() {
        let text = "{\"label\": \"a\", \"vector\": [1]}\nnot json\n";
        match parse_embeddings(text, "e") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn write_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.jsonl");
        let mut s = EmbeddingStore::new(2).unwrap();
        s.insert("b", vec![0.1, 0.7]).unwrap();
        s.insert("a", vec![1.0 / 3.0, -2.0]).unwrap();
        write_embeddings(&p, &s).unwrap();
        let back = load_embeddings(&p).unwrap();
        assert_eq!(back.store, s);
    }
}
