use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{parse_error, read_text, write_atomic, DatasetGT, DetectionFile};
use crate::error::{Error, Result};
use crate::model::{BBox, Detection};

#[derive(Debug, Clone, Copy, Default)]
pub struct DetectionLoadOptions<'a> {
    /// Ground truth to resolve `category_id` and check `image_id` against.
    pub gt: Option<&'a DatasetGT>,
    /// Drop detections on unknown images with a warning instead of failing.
    pub lenient: bool,
}

#[derive(Deserialize)]
struct InputRecord {
    image_id: i64,
    bbox: Vec<f64>,
    label: Option<String>,
    category_id: Option<i64>,
    score: f64,
}

#[derive(Serialize)]
struct OutputRecord<'a> {
    image_id: i64,
    bbox: [f64; 4],
    label: &'a str,
    score: f64,
}

pub fn load_detections(path: &Path, opts: &DetectionLoadOptions<'_>) -> Result<DetectionFile> {
    parse_detections(&read_text(path)?, &path.display().to_string(), opts)
}

/// Parses a JSON array of detections. Indices are file positions.
pub fn parse_detections(
    text: &str,
    source: &str,
    opts: &DetectionLoadOptions<'_>,
) -> Result<DetectionFile> {
    let rows: Vec<InputRecord> = serde_json::from_str(text).map_err(|e| parse_error(source, &e))?;
    let mut detections = Vec::with_capacity(rows.len());
    let mut problems = Vec::new();
    let mut dropped = Vec::new();
    for (index, row) in rows.into_iter().enumerate() {
        if let Some(gt) = opts.gt {
            if !gt.has_image(row.image_id) {
                if opts.lenient {
                    dropped.push(index);
                } else {
                    problems.push(format!(
                        "detection {index}: unknown image_id {}",
                        row.image_id
                    ));
                }
                continue;
            }
        }
        let label = match (&row.label, row.category_id) {
            (Some(l), _) => Some(l.clone()),
            (None, Some(c)) => opts.gt.and_then(|gt| gt.categories.get(&c)).cloned(),
            (None, None) => None,
        };
        let Some(label) = label else {
            problems.push(format!(
                "detection {index}: no label and no resolvable category_id"
            ));
            continue;
        };
        if !(0.0..=1.0).contains(&row.score) {
            problems.push(format!(
                "detection {index}: score {} outside [0, 1]",
                row.score
            ));
            continue;
        }
        let bbox = match <[f64; 4]>::try_from(row.bbox.as_slice()) {
            Ok(xywh) => BBox::from_xywh(xywh),
            Err(_) => Err(Error::Input("bbox needs four numbers".into())),
        };
        let Ok(bbox) = bbox else {
            problems.push(format!("detection {index}: invalid bbox {:?}", row.bbox));
            continue;
        };
        match Detection::new(row.image_id, bbox, &label, row.score, index) {
            Ok(d) => detections.push(d),
            Err(_) => problems.push(format!("detection {index}: blank label")),
        }
    }
    if !problems.is_empty() {
        return Err(Error::validation("invalid detections", problems));
    }
    let mut warnings = Vec::new();
    if !dropped.is_empty() {
        warnings.push(format!(
            "dropped {} detection(s) on unknown images: indices {:?}",
            dropped.len(),
            dropped
        ));
    }
    Ok(DetectionFile {
        detections,
        warnings,
    })
}

/// Serializes detections in file order as the label-string array format.
pub fn detections_to_json(detections: &[Detection]) -> String {
    let rows: Vec<OutputRecord<'_>> = detections
        .iter()
        .map(|d| OutputRecord {
            image_id: d.image_id,
            bbox: d.bbox.to_xywh(),
            label: &d.label,
            score: d.score,
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&rows).expect("detections always serialize");
    text.push('\n');
    text
}

pub fn write_detections(path: &Path, detections: &[Detection]) -> Result<()> {
    write_atomic(path, detections_to_json(detections).as_bytes())
}
