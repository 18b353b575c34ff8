//! Greedy, confidence-ordered one-to-one matching.
//!
//! Predictions are visited by descending score (ties by input index). Each
//! claims the best still-free target that clears the threshold, so a target
//! is only ever credited to its highest-confidence valid prediction. Spatial
//! matching ignores labels; label matching ignores boxes.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use crate::error::{Error, Result};
use crate::geometry;
use crate::model::{Detection, EmbeddingStore, GroundTruthObject};

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub index: usize,
    pub image_id: i64,
    pub score: f64,
    pub is_tp: bool,
    /// `annotation_id` of the claimed target.
    pub matched_target: Option<i64>,
}

/// Per-prediction TP/FP flags at one threshold, plus the number of targets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchLedger {
    entries: Vec<LedgerEntry>,
    total_gt: usize,
}

fn ledger_order(a: &LedgerEntry, b: &LedgerEntry) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.image_id.cmp(&b.image_id))
        .then(a.index.cmp(&b.index))
}

impl MatchLedger {
    /// Builds a ledger, sorting entries into (score desc, image asc, index asc).
    pub fn new(mut entries: Vec<LedgerEntry>, total_gt: usize) -> Self {
        entries.sort_by(ledger_order);
        MatchLedger { entries, total_gt }
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn total_gt(&self) -> usize {
        self.total_gt
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tp_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_tp).count()
    }

    /// Concatenates per-image ledgers into one dataset ledger.
    pub fn merge(parts: impl IntoIterator<Item = MatchLedger>) -> Self {
        let mut entries = Vec::new();
        let mut total_gt = 0;
        for part in parts {
            entries.extend(part.entries);
            total_gt += part.total_gt;
        }
        MatchLedger::new(entries, total_gt)
    }

    pub fn check_invariants(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if e.is_tp != e.matched_target.is_some() {
                return Err(Error::Invariant(format!(
                    "prediction {} has inconsistent TP flag",
                    e.index
                )));
            }
            if let Some(t) = e.matched_target {
                if !seen.insert((e.image_id, t)) {
                    return Err(Error::Invariant(format!("target {t} matched twice")));
                }
            }
        }
        if self
            .entries
            .windows(2)
            .any(|w| ledger_order(&w[0], &w[1]) == Ordering::Greater)
        {
            return Err(Error::Invariant("ledger entries out of order".into()));
        }
        if seen.len() > self.total_gt {
            return Err(Error::Invariant("more matches than targets".into()));
        }
        Ok(())
    }
}

fn prediction_order(a: &&Detection, b: &&Detection) -> Ordering {
    b.score.total_cmp(&a.score).then(a.index.cmp(&b.index))
}

fn single_image<'a>(
    predictions: impl IntoIterator<Item = &'a Detection>,
    targets: impl IntoIterator<Item = &'a GroundTruthObject>,
) -> Result<()> {
    let ids: HashSet<i64> = predictions
        .into_iter()
        .map(|p| p.image_id)
        .chain(targets.into_iter().map(|t| t.image_id))
        .collect();
    if ids.len() > 1 {
        let mut ids: Vec<i64> = ids.into_iter().collect();
        ids.sort_unstable();
        return Err(Error::Input(format!(
            "matching expects a single image, got image ids {ids:?}"
        )));
    }
    Ok(())
}

fn greedy_boxes(
    predictions: &[&Detection],
    targets: &[&GroundTruthObject],
    iou_threshold: f64,
) -> MatchLedger {
    let mut order: Vec<&Detection> = predictions.to_vec();
    order.sort_by(prediction_order);
    let mut taken = vec![false; targets.len()];
    let entries = order
        .into_iter()
        .map(|p| {
            let mut best: Option<(usize, f64)> = None;
            for (j, t) in targets.iter().enumerate() {
                if taken[j] {
                    continue;
                }
                let v = geometry::iou(&p.bbox, &t.bbox);
                if v < iou_threshold {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bj, bv)) => {
                        v > bv || (v == bv && t.annotation_id < targets[bj].annotation_id)
                    }
                };
                if better {
                    best = Some((j, v));
                }
            }
            let matched = best.map(|(j, _)| {
                taken[j] = true;
                targets[j].annotation_id
            });
            LedgerEntry {
                index: p.index,
                image_id: p.image_id,
                score: p.score,
                is_tp: matched.is_some(),
                matched_target: matched,
            }
        })
        .collect();
    MatchLedger::new(entries, targets.len())
}

/// Class-agnostic matching within one image.
pub fn match_boxes(
    predictions: &[Detection],
    targets: &[GroundTruthObject],
    iou_threshold: f64,
) -> Result<MatchLedger> {
    check_iou_threshold(iou_threshold)?;
    single_image(predictions, targets)?;
    let preds: Vec<&Detection> = predictions.iter().collect();
    let tgts: Vec<&GroundTruthObject> = targets.iter().collect();
    Ok(greedy_boxes(&preds, &tgts, iou_threshold))
}

fn check_iou_threshold(t: f64) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Config(format!("IoU threshold {t} outside (0, 1]")));
    }
    Ok(())
}

type ImageGroups<'a> = BTreeMap<i64, (Vec<&'a Detection>, Vec<&'a GroundTruthObject>)>;

fn group_by_image<'a>(
    predictions: &'a [Detection],
    targets: impl IntoIterator<Item = &'a GroundTruthObject>,
) -> ImageGroups<'a> {
    let mut groups: ImageGroups<'a> = BTreeMap::new();
    for p in predictions {
        groups.entry(p.image_id).or_default().0.push(p);
    }
    for t in targets {
        groups.entry(t.image_id).or_default().1.push(t);
    }
    groups
}

/// Per-image [`match_boxes`] merged into one dataset ledger.
pub fn match_dataset_boxes(
    predictions: &[Detection],
    targets: &[GroundTruthObject],
    iou_threshold: f64,
) -> Result<MatchLedger> {
    check_iou_threshold(iou_threshold)?;
    let groups = group_by_image(predictions, targets);
    Ok(MatchLedger::merge(
        groups
            .values()
            .map(|(p, t)| greedy_boxes(p, t, iou_threshold)),
    ))
}

/// `u·v / (|u| |v|)`, clamped to `[-1, 1]`. Identical vectors give exactly 1.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Embedding(format!(
            "dimension mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let nu: f64 = u.iter().map(|a| a * a).sum();
    let nv: f64 = v.iter().map(|a| a * a).sum();
    if nu <= 0.0 || nv <= 0.0 {
        return Err(Error::Embedding("zero-norm vector".into()));
    }
    if u == v {
        return Ok(1.0);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

fn check_embedded<'a>(
    store: &EmbeddingStore,
    predictions: impl IntoIterator<Item = &'a Detection>,
    targets: impl IntoIterator<Item = &'a GroundTruthObject>,
) -> Result<()> {
    let missing = store.missing(
        predictions
            .into_iter()
            .map(|p| p.label.as_str())
            .chain(targets.into_iter().filter_map(|t| t.label.as_deref())),
    );
    if !missing.is_empty() {
        return Err(Error::MissingEmbedding { labels: missing });
    }
    Ok(())
}

fn greedy_labels(
    predictions: &[&Detection],
    targets: &[&GroundTruthObject],
    store: &EmbeddingStore,
    sim_threshold: f64,
) -> Result<MatchLedger> {
    let labeled: Vec<(i64, &[f64])> = targets
        .iter()
        .filter_map(|t| {
            t.label
                .as_deref()
                .and_then(|l| store.get(l))
                .map(|v| (t.annotation_id, v))
        })
        .collect();
    let mut order: Vec<&Detection> = predictions.to_vec();
    order.sort_by(prediction_order);
    let mut taken = vec![false; labeled.len()];
    let mut entries = Vec::with_capacity(order.len());
    for p in order {
        let pv = store
            .get(&p.label)
            .ok_or_else(|| Error::MissingEmbedding {
                labels: vec![p.label.clone()],
            })?;
        let mut best: Option<(usize, f64)> = None;
        for (j, (_, tv)) in labeled.iter().enumerate() {
            if taken[j] {
                continue;
            }
            let s = cosine_similarity(pv, tv)?;
            if s >= sim_threshold && best.map_or(true, |(_, bs)| s > bs) {
                best = Some((j, s));
            }
        }
        let matched = best.map(|(j, _)| {
            taken[j] = true;
            labeled[j].0
        });
        entries.push(LedgerEntry {
            index: p.index,
            image_id: p.image_id,
            score: p.score,
            is_tp: matched.is_some(),
            matched_target: matched,
        });
    }
    Ok(MatchLedger::new(entries, labeled.len()))
}

/// Semantic matching within one image. Targets without labels are excluded,
/// both from matching and from the target count.
pub fn match_labels(
    predictions: &[Detection],
    targets: &[GroundTruthObject],
    store: &EmbeddingStore,
    sim_threshold: f64,
) -> Result<MatchLedger> {
    check_sim_threshold(sim_threshold)?;
    single_image(predictions, targets)?;
    check_embedded(store, predictions, targets)?;
    let preds: Vec<&Detection> = predictions.iter().collect();
    let tgts: Vec<&GroundTruthObject> = targets.iter().collect();
    greedy_labels(&preds, &tgts, store, sim_threshold)
}

fn check_sim_threshold(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Config(format!(
            "similarity threshold {t} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Per-image [`match_labels`] merged into one dataset ledger. Labels never
/// match across images.
pub fn match_dataset_labels(
    predictions: &[Detection],
    targets: &[GroundTruthObject],
    store: &EmbeddingStore,
    sim_threshold: f64,
) -> Result<MatchLedger> {
    check_sim_threshold(sim_threshold)?;
    check_embedded(store, predictions, targets)?;
    let groups = group_by_image(predictions, targets);
    let parts = groups
        .values()
        .map(|(p, t)| greedy_labels(p, t, store, sim_threshold))
        .collect::<Result<Vec<_>>>()?;
    Ok(MatchLedger::merge(parts))
}
