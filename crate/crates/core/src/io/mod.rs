//! File formats: COCO ground truth, detection arrays, embedding tables,
//! label lists and metric reports.

mod coco;
mod detections;
mod embeddings;
pub mod json;
mod report;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{normalize_label, Detection, GroundTruthObject};

pub use coco::{load_coco_gt, parse_coco_gt, GtLoadOptions};
pub use detections::{
    detections_to_json, load_detections, parse_detections, write_detections, DetectionLoadOptions,
};
pub use embeddings::{load_embeddings, parse_embeddings, write_embeddings, LoadedEmbeddings};
pub use report::{load_report, parse_report, render_report, write_report, ReportFormat};

#[derive(Debug, Clone, PartialEq)]
pub struct ImageInfo {
    pub id: i64,
    pub width: Option<u32>,
    pub height: Option<u32>,
    pub file_name: Option<String>,
}

/// Ground truth for a whole dataset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetGT {
    pub images: Vec<ImageInfo>,
    pub objects: Vec<GroundTruthObject>,
    /// Category id → normalized name.
    pub categories: BTreeMap<i64, String>,
    pub warnings: Vec<String>,
}

impl DatasetGT {
    pub fn has_image(&self, id: i64) -> bool {
        self.images.iter().any(|i| i.id == id)
    }

    pub fn labeled_count(&self) -> usize {
        self.objects.iter().filter(|o| o.label.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionFile {
    pub detections: Vec<Detection>,
    pub warnings: Vec<String>,
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_error(source: &str, e: &serde_json::Error) -> Error {
    Error::Parse {
        path: source.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place,
/// so `path` never holds a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Reads one label per line, skipping blank lines. Labels are normalized.
pub fn read_label_list(path: &Path) -> Result<Vec<String>> {
    parse_label_list(&read_text(path)?)
}

pub fn parse_label_list(text: &str) -> Result<Vec<String>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(normalize_label)
        .collect()
}

pub fn write_label_list<S: AsRef<str>>(path: &Path, labels: &[S]) -> Result<()> {
    let mut out = String::new();
    for l in labels {
        out.push_str(l.as_ref());
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}
