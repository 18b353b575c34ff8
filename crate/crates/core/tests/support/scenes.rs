//! Seeded random scenes, emitted both as engine inputs and as plain oracle rows.

#![allow(dead_code)]

use owdet_core::io::{DatasetGT, DetectionFile, ImageInfo};
use owdet_core::{BBox, Detection, EmbeddingStore, GroundTruthObject};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::oracle::{OBox, OPred, OTarget};

pub const VOCAB_SIZE: usize = 8;
const CLUSTERS: [usize; VOCAB_SIZE] = [0, 0, 0, 1, 1, 2, 2, 2];
// pairwise products stay at least 1e-3 away from 0.6, 0.7, 0.8 and 0.9
const WEIGHTS: [f64; VOCAB_SIZE] = [1.0, 0.97, 0.87, 1.0, 0.93, 0.77, 1.0, 0.93];

pub fn label_name(i: usize) -> String {
    format!("label{i}")
}

/// Prescribed similarity between vocabulary entries.
pub fn prescribed_sim(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else if CLUSTERS[i] == CLUSTERS[j] {
        WEIGHTS[i] * WEIGHTS[j]
    } else {
        0.0
    }
}

/// Vectors `w * e_cluster + sqrt(1 - w^2) * e_own`, realizing [`prescribed_sim`].
pub fn mock_store() -> EmbeddingStore {
    let dim = 3 + VOCAB_SIZE;
    let mut store = EmbeddingStore::new(dim).unwrap();
    for i in 0..VOCAB_SIZE {
        let mut v = vec![0.0; dim];
        v[CLUSTERS[i]] = WEIGHTS[i];
        v[3 + i] = (1.0 - WEIGHTS[i] * WEIGHTS[i]).sqrt();
        store.insert(&label_name(i), v).unwrap();
    }
    store
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub gt: DatasetGT,
    pub dets: DetectionFile,
    pub preds: Vec<OPred>,
    pub targets: Vec<OTarget>,
}

fn random_box(rng: &mut ChaCha8Rng) -> OBox {
    OBox {
        x: rng.gen_range(0.0..60.0),
        y: rng.gen_range(0.0..60.0),
        w: rng.gen_range(2.0..40.0),
        h: rng.gen_range(2.0..40.0),
    }
}

fn jitter(rng: &mut ChaCha8Rng, b: OBox) -> OBox {
    let s = rng.gen_range(0.0..0.35);
    OBox {
        x: b.x + rng.gen_range(-s..=s) * b.w,
        y: b.y + rng.gen_range(-s..=s) * b.h,
        w: b.w * rng.gen_range(1.0 - s..=1.0 + s),
        h: b.h * rng.gen_range(1.0 - s..=1.0 + s),
    }
}

impl Scene {
    /// Up to 4 images, 6 predictions and 5 targets per image. Scores have
    /// frequent ties; about half the predictions sit near a target.
    pub fn random(rng: &mut ChaCha8Rng) -> Scene {
        let n_images = rng.gen_range(1..=4);
        let mut images = Vec::new();
        let mut preds = Vec::new();
        let mut targets = Vec::new();
        let mut next_ann = 1i64;
        for img in 0..n_images {
            let image_id = 100 + img as i64 * 7;
            images.push(ImageInfo {
                id: image_id,
                width: Some(100),
                height: Some(100),
                file_name: Some(format!("img{img}.jpg")),
            });
            let n_gt = rng.gen_range(0..=5);
            let mut local = Vec::new();
            for _ in 0..n_gt {
                let t = OTarget {
                    image: image_id,
                    id: next_ann,
                    bbox: random_box(rng),
                    label: if rng.gen_bool(0.85) {
                        Some(rng.gen_range(0..VOCAB_SIZE))
                    } else {
                        None
                    },
                };
                next_ann += rng.gen_range(1..3);
                local.push(t);
            }
            let n_pred = rng.gen_range(0..=6);
            for _ in 0..n_pred {
                let near = !local.is_empty() && rng.gen_bool(0.6);
                let bbox = if near {
                    let k = rng.gen_range(0..local.len());
                    jitter(rng, local[k].bbox)
                } else {
                    random_box(rng)
                };
                let score = if rng.gen_bool(0.5) {
                    rng.gen_range(0..=10) as f64 / 10.0
                } else {
                    rng.gen_range(0.0..=1.0)
                };
                preds.push(OPred {
                    image: image_id,
                    index: 0,
                    score,
                    bbox,
                    label: rng.gen_range(0..VOCAB_SIZE),
                });
            }
            targets.extend(local);
        }
        // shuffle file order so indices are not image-major
        for i in (1..preds.len()).rev() {
            let j = rng.gen_range(0..=i);
            preds.swap(i, j);
        }
        for (i, p) in preds.iter_mut().enumerate() {
            p.index = i;
        }
        Scene::from_rows(images, preds, targets)
    }

    pub fn from_rows(images: Vec<ImageInfo>, preds: Vec<OPred>, targets: Vec<OTarget>) -> Scene {
        let to_bbox = |b: OBox| BBox::new(b.x, b.y, b.w, b.h).unwrap();
        let detections = preds
            .iter()
            .map(|p| {
                Detection::new(p.image, to_bbox(p.bbox), &label_name(p.label), p.score, p.index)
                    .unwrap()
            })
            .collect();
        let objects = targets
            .iter()
            .map(|t| GroundTruthObject {
                image_id: t.image,
                bbox: to_bbox(t.bbox),
                label: t.label.map(label_name),
                annotation_id: t.id,
            })
            .collect();
        Scene {
            gt: DatasetGT {
                images,
                objects,
                ..Default::default()
            },
            dets: DetectionFile {
                detections,
                warnings: vec![],
            },
            preds,
            targets,
        }
    }
}
