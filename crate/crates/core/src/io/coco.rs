use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::Deserialize;

use super::{parse_error, read_text, DatasetGT, ImageInfo};
use crate::error::{Error, Result};
use crate::model::{normalize_label, BBox, GroundTruthObject};

#[derive(Debug, Clone, Default)]
pub struct GtLoadOptions {
    /// Category name whose annotations are ingested as unlabeled (unknown).
    pub unknown_category: Option<String>,
}

#[derive(Deserialize)]
struct CocoFile {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    #[serde(default)]
    categories: Vec<CocoCategory>,
}

#[derive(Deserialize)]
struct CocoImage {
    id: i64,
    width: Option<u32>,
    height: Option<u32>,
    file_name: Option<String>,
}

#[derive(Deserialize)]
struct CocoAnnotation {
    id: i64,
    image_id: i64,
    category_id: Option<i64>,
    bbox: Vec<f64>,
    #[serde(default)]
    iscrowd: serde_json::Value,
}

#[derive(Deserialize)]
struct CocoCategory {
    id: i64,
    name: String,
}

fn is_crowd(v: &serde_json::Value) -> bool {
    match v {
        serde_json::Value::Bool(b) => *b,
        serde_json::Value::Number(n) => n.as_f64().is_some_and(|x| x != 0.0),
        _ => false,
    }
}

pub fn load_coco_gt(path: &Path, opts: &GtLoadOptions) -> Result<DatasetGT> {
    parse_coco_gt(&read_text(path)?, &path.display().to_string(), opts)
}

/// Parses COCO-format ground truth. `source` names the input in errors.
pub fn parse_coco_gt(text: &str, source: &str, opts: &GtLoadOptions) -> Result<DatasetGT> {
    let file: CocoFile = serde_json::from_str(text).map_err(|e| parse_error(source, &e))?;
    let unknown = opts
        .unknown_category
        .as_deref()
        .map(normalize_label)
        .transpose()?;

    let mut categories = BTreeMap::new();
    let mut bad_categories = Vec::new();
    for c in &file.categories {
        match normalize_label(&c.name) {
            Ok(name) => {
                categories.insert(c.id, name);
            }
            Err(_) => bad_categories.push(format!("category {}", c.id)),
        }
    }
    if !bad_categories.is_empty() {
        return Err(Error::validation(
            "categories with blank names",
            bad_categories,
        ));
    }

    let mut image_ids = HashSet::new();
    let mut dup_images = Vec::new();
    for img in &file.images {
        if !image_ids.insert(img.id) {
            dup_images.push(format!("image {}", img.id));
        }
    }
    if !dup_images.is_empty() {
        return Err(Error::validation("duplicate image ids", dup_images));
    }

    let mut seen = HashSet::new();
    let mut duplicates = Vec::new();
    let mut dangling = Vec::new();
    let mut bad_boxes = Vec::new();
    let mut objects = Vec::with_capacity(file.annotations.len());
    let mut crowd = 0usize;
    for a in &file.annotations {
        if !seen.insert(a.id) {
            duplicates.push(format!("annotation {}", a.id));
        }
        if !image_ids.contains(&a.image_id) {
            dangling.push(format!("annotation {} (image_id {})", a.id, a.image_id));
        }
        let bbox = match <[f64; 4]>::try_from(a.bbox.as_slice()) {
            Ok(xywh) => BBox::from_xywh(xywh).ok(),
            Err(_) => None,
        };
        let Some(bbox) = bbox else {
            bad_boxes.push(format!("annotation {} (bbox {:?})", a.id, a.bbox));
            continue;
        };
        if is_crowd(&a.iscrowd) {
            crowd += 1;
        }
        let label = a
            .category_id
            .and_then(|c| categories.get(&c))
            .filter(|name| unknown.as_ref() != Some(*name))
            .cloned();
        objects.push(GroundTruthObject {
            image_id: a.image_id,
            bbox,
            label,
            annotation_id: a.id,
        });
    }
    if !duplicates.is_empty() {
        return Err(Error::validation("duplicate annotation ids", duplicates));
    }
    if !dangling.is_empty() {
        return Err(Error::validation(
            "annotations reference missing images",
            dangling,
        ));
    }
    if !bad_boxes.is_empty() {
        return Err(Error::validation(
            "annotations with invalid boxes (need [x, y, w, h] with w > 0 and h > 0)",
            bad_boxes,
        ));
    }

    let mut warnings = Vec::new();
    if crowd > 0 {
        warnings.push(format!(
            "{crowd} iscrowd annotation(s) treated as ordinary ground truth"
        ));
    }
    Ok(DatasetGT {
        images: file
            .images
            .into_iter()
            .map(|i| ImageInfo {
                id: i.id,
                width: i.width,
                height: i.height,
                file_name: i.file_name,
            })
            .collect(),
        objects,
        categories,
        warnings,
    })
}
