//! Shared domain types and configuration defaults.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Lowercases, trims and collapses internal whitespace runs to single spaces.
pub fn normalize_label(raw: &str) -> Result<String> {
    let normalized = raw
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ");
    if normalized.is_empty() {
        return Err(Error::Normalization {
            raw: raw.to_string(),
        });
    }
    Ok(normalized)
}

/// A label as it arrived, paired with its normalized form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Label {
    raw: String,
    normalized: String,
}

impl Label {
    pub fn new(raw: impl Into<String>) -> Result<Self> {
        let raw = raw.into();
        let normalized = normalize_label(&raw)?;
        Ok(Label { raw, normalized })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn normalized(&self) -> &str {
        &self.normalized
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.normalized)
    }
}

/// Axis-aligned box in pixel coordinates, `(x, y)` the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if ![x, y, w, h].iter().all(|v| v.is_finite()) {
            return Err(Error::validation(
                "box has non-finite coordinates",
                vec![format!("[{x}, {y}, {w}, {h}]")],
            ));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::validation(
                "box has non-positive extent",
                vec![format!("[{x}, {y}, {w}, {h}]")],
            ));
        }
        Ok(BBox { x, y, w, h })
    }

    pub fn from_xywh(xywh: [f64; 4]) -> Result<Self> {
        BBox::new(xywh[0], xywh[1], xywh[2], xywh[3])
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    /// Returns the box shifted by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self> {
        BBox::new(self.x + dx, self.y + dy, self.w, self.h)
    }
}

/// A scored, labeled prediction. `index` is the 0-based position in its file.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: i64,
    pub bbox: BBox,
    pub label: String,
    pub score: f64,
    pub index: usize,
}

impl Detection {
    /// Builds a detection, normalizing the label and rejecting scores outside `[0, 1]`.
    pub fn new(image_id: i64, bbox: BBox, label: &str, score: f64, index: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::validation(
                "detection score outside [0, 1]",
                vec![format!("detection {index} (score {score})")],
            ));
        }
        Ok(Detection {
            image_id,
            bbox,
            label: normalize_label(label)?,
            score,
            index,
        })
    }
}

/// An annotated target. `label` is `None` for unknown/unlabeled objects.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthObject {
    pub image_id: i64,
    pub bbox: BBox,
    pub label: Option<String>,
    pub annotation_id: i64,
}

/// Normalized label → vector table, all vectors of one dimension with positive norm.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dimension: usize,
    entries: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Embedding("dimension must be positive".into()));
        }
        Ok(EmbeddingStore {
            dimension,
            entries: BTreeMap::new(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts under the normalized form of `label`, returning the replaced vector if any.
    pub fn insert(&mut self, label: &str, vector: Vec<f64>) -> Result<Option<Vec<f64>>> {
        let key = normalize_label(label)?;
        if vector.len() != self.dimension {
            return Err(Error::Embedding(format!(
                "vector for {key:?} has dimension {}, store has {}",
                vector.len(),
                self.dimension
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Embedding(format!(
                "vector for {key:?} has non-finite components"
            )));
        }
        if vector.iter().map(|v| v * v).sum::<f64>() <= 0.0 {
            return Err(Error::Embedding(format!("vector for {key:?} has zero norm")));
        }
        Ok(self.entries.insert(key, vector))
    }

    /// Looks up an already-normalized label.
    pub fn get(&self, label: &str) -> Option<&[f64]> {
        self.entries.get(label).map(Vec::as_slice)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.entries.contains_key(label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Copies every entry of `other` into `self`; entries of `other` win on conflict.
    pub fn merge(&mut self, other: &EmbeddingStore) -> Result<()> {
        if other.dimension != self.dimension {
            return Err(Error::Embedding(format!(
                "cannot merge dimension-{} embeddings into a dimension-{} store",
                other.dimension, self.dimension
            )));
        }
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
        Ok(())
    }

    /// Sorted, deduplicated list of the labels that have no vector.
    pub fn missing<'a>(&self, labels: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        let mut missing: Vec<String> = labels
            .into_iter()
            .filter(|l| !self.contains(l))
            .map(str::to_string)
            .collect();
        missing.sort();
        missing.dedup();
        missing
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Interval {
    Lo,
    Mi,
    Hi,
}

impl Interval {
    pub const ALL: [Interval; 3] = [Interval::Lo, Interval::Mi, Interval::Hi];

    pub fn as_str(&self) -> &'static str {
        match self {
            Interval::Lo => "LO",
            Interval::Mi => "MI",
            Interval::Hi => "HI",
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Partition of a threshold list into LO/MI/HI groups.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalMap {
    pub lo: Vec<f64>,
    pub mi: Vec<f64>,
    pub hi: Vec<f64>,
}

impl IntervalMap {
    /// Assigns `t <= lo_max` to LO, `t <= mi_max` to MI and the rest to HI.
    pub fn by_bounds(thresholds: &[f64], lo_max: f64, mi_max: f64) -> Self {
        let mut map = IntervalMap::default();
        for &t in thresholds {
            if t <= lo_max {
                map.lo.push(t);
            } else if t <= mi_max {
                map.mi.push(t);
            } else {
                map.hi.push(t);
            }
        }
        map
    }

    pub fn members(&self, interval: Interval) -> &[f64] {
        match interval {
            Interval::Lo => &self.lo,
            Interval::Mi => &self.mi,
            Interval::Hi => &self.hi,
        }
    }

    pub fn interval_of(&self, threshold: f64) -> Option<Interval> {
        Interval::ALL
            .into_iter()
            .find(|&i| self.members(i).contains(&threshold))
    }

    /// Checks the groups are disjoint and cover exactly `thresholds`.
    pub fn validate(&self, thresholds: &[f64]) -> Result<()> {
        let mut all: Vec<f64> = Interval::ALL
            .iter()
            .flat_map(|&i| self.members(i).iter().copied())
            .collect();
        all.sort_by(f64::total_cmp);
        let before = all.len();
        all.dedup();
        if all.len() != before {
            return Err(Error::Config("interval groups overlap".into()));
        }
        let mut expected = thresholds.to_vec();
        expected.sort_by(f64::total_cmp);
        if all != expected {
            return Err(Error::Config(format!(
                "interval groups {all:?} do not cover thresholds {expected:?}"
            )));
        }
        Ok(())
    }
}

/// How a PR curve is reduced to one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApIntegration {
    /// Area under the monotone-interpolated PR curve.
    AucAllPoints,
    /// Mean precision over a grid of score thresholds.
    ThresholdMean,
}

impl ApIntegration {
    pub fn as_str(&self) -> &'static str {
        match self {
            ApIntegration::AucAllPoints => "auc_all_points",
            ApIntegration::ThresholdMean => "threshold_mean",
        }
    }
}

/// Score thresholds used by [`ApIntegration::ThresholdMean`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreGrid {
    DistinctScores,
    UniformGrid { step: f64 },
}

impl ScoreGrid {
    pub const DEFAULT_STEP: f64 = 0.01;

    pub fn describe(&self) -> String {
        match self {
            ScoreGrid::DistinctScores => "distinct_scores".to_string(),
            ScoreGrid::UniformGrid { step } => format!("uniform_grid({step})"),
        }
    }

    /// Grid points `0, step, 2*step, ... <= 1` for the uniform grid.
    pub fn uniform_points(step: f64) -> Vec<f64> {
        let inv = 1.0 / step;
        let n = (inv + 1e-9).floor() as usize;
        if (inv - inv.round()).abs() < 1e-9 {
            // k / n hits decimal grid points exactly (0.9, not 0.9000000000000001)
            let n = inv.round();
            return (0..=n as usize).map(|k| k as f64 / n).collect();
        }
        (0..=n).map(|k| k as f64 * step).collect()
    }
}

/// Where U-PRE / U-REC / U-F1 are read off the PR curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatingPoint {
    BestF1,
    FixedScore(f64),
}

impl OperatingPoint {
    pub fn describe(&self) -> String {
        match self {
            OperatingPoint::BestF1 => "best_f1".to_string(),
            OperatingPoint::FixedScore(t) => format!("fixed_score({t})"),
        }
    }
}

/// IoU thresholds up to this value fall into LO, up to [`CAAP_MI_MAX`] into MI.
pub const CAAP_LO_MAX: f64 = 0.625;
pub const CAAP_MI_MAX: f64 = 0.825;
pub const SNAP_LO_MAX: f64 = 0.65;
pub const SNAP_MI_MAX: f64 = 0.85;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
    pub sim_thresholds: Vec<f64>,
    pub iou_intervals: IntervalMap,
    pub sim_intervals: IntervalMap,
    pub ap_integration: ApIntegration,
    pub score_grid: ScoreGrid,
    pub unknown_iou: f64,
    pub unknown_operating_point: OperatingPoint,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let iou_thresholds: Vec<f64> = (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect();
        let sim_thresholds: Vec<f64> = (6..10).map(|i| i as f64 / 10.0).collect();
        EvalConfig {
            iou_intervals: IntervalMap::by_bounds(&iou_thresholds, CAAP_LO_MAX, CAAP_MI_MAX),
            sim_intervals: IntervalMap::by_bounds(&sim_thresholds, SNAP_LO_MAX, SNAP_MI_MAX),
            iou_thresholds,
            sim_thresholds,
            ap_integration: ApIntegration::AucAllPoints,
            score_grid: ScoreGrid::DistinctScores,
            unknown_iou: 0.5,
            unknown_operating_point: OperatingPoint::BestF1,
        }
    }
}

impl EvalConfig {
    /// Replaces the IoU threshold list and regroups it into LO/MI/HI.
    pub fn with_iou_thresholds(mut self, thresholds: Vec<f64>) -> Result<Self> {
        check_thresholds("IoU", &thresholds, |t| t > 0.0 && t <= 1.0)?;
        self.iou_intervals = IntervalMap::by_bounds(&thresholds, CAAP_LO_MAX, CAAP_MI_MAX);
        self.iou_thresholds = thresholds;
        Ok(self)
    }

    /// Replaces the similarity threshold list and regroups it into LO/MI/HI.
    pub fn with_sim_thresholds(mut self, thresholds: Vec<f64>) -> Result<Self> {
        check_thresholds("similarity", &thresholds, |t| (0.0..=1.0).contains(&t))?;
        self.sim_intervals = IntervalMap::by_bounds(&thresholds, SNAP_LO_MAX, SNAP_MI_MAX);
        self.sim_thresholds = thresholds;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_thresholds("IoU", &self.iou_thresholds, |t| t > 0.0 && t <= 1.0)?;
        check_thresholds("similarity", &self.sim_thresholds, |t| {
            (0.0..=1.0).contains(&t)
        })?;
        self.iou_intervals.validate(&self.iou_thresholds)?;
        self.sim_intervals.validate(&self.sim_thresholds)?;
        if !(self.unknown_iou > 0.0 && self.unknown_iou <= 1.0) {
            return Err(Error::Config(format!(
                "unknown IoU {} outside (0, 1]",
                self.unknown_iou
            )));
        }
        if let ScoreGrid::UniformGrid { step } = self.score_grid {
            if !(step > 0.0 && step <= 1.0) {
                return Err(Error::Config(format!("grid step {step} outside (0, 1]")));
            }
        }
        if let OperatingPoint::FixedScore(t) = self.unknown_operating_point {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("operating score {t} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

fn check_thresholds(kind: &str, thresholds: &[f64], in_range: impl Fn(f64) -> bool) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::Config(format!("{kind} threshold list is empty")));
    }
    if let Some(bad) = thresholds.iter().find(|&&t| !in_range(t)) {
        return Err(Error::Config(format!("{kind} threshold {bad} out of range")));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "{kind} thresholds must be strictly increasing and duplicate-free: {thresholds:?}"
        )));
    }
    Ok(())
}

/// IoU thresholds 0.50..=0.95 in steps of 0.05, grouped LO/MI/HI.
pub fn default_caap_config() -> EvalConfig {
    EvalConfig::default()
}

/// Similarity thresholds 0.6..=0.9 in steps of 0.1, grouped LO/MI/HI.
pub fn default_snap_config() -> EvalConfig {
    EvalConfig::default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_label("  Cardboard  Box ").unwrap(), "cardboard box");
        assert_eq!(normalize_label("car").unwrap(), "car");
        assert!(matches!(
            normalize_label("   "),
            Err(Error::Normalization { .. })
        ));
        assert_eq!(normalize_label("Fire\tHydrant\n").unwrap(), "fire hydrant");
    }

    #[test]
    fn label_keeps_raw_form() {
        let l = Label::new(" Teddy Bear").unwrap();
        assert_eq!(l.raw(), " Teddy Bear");
        assert_eq!(l.normalized(), "teddy bear");
    }

    #[test]
    fn bbox_rejects_degenerate_extents() {
        assert!(BBox::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BBox::new(0.0, 0.0, 1.0, -2.0).is_err());
        assert!(BBox::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
        assert!(BBox::new(-3.0, -4.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn detection_score_bounds() {
        let b = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(Detection::new(1, b, "car", 1.5, 0).is_err());
        assert!(Detection::new(1, b, "car", -0.1, 0).is_err());
        assert!(Detection::new(1, b, "car", f64::NAN, 0).is_err());
        assert_eq!(Detection::new(1, b, " Car ", 1.0, 0).unwrap().label, "car");
    }

    #[test]
    fn default_caap_intervals() {
        let cfg = default_caap_config();
        assert_eq!(cfg.iou_thresholds.len(), 10);
        assert_eq!(cfg.iou_intervals.lo, vec![0.50, 0.55, 0.60]);
        assert_eq!(cfg.iou_intervals.mi, vec![0.65, 0.70, 0.75, 0.80]);
        assert_eq!(cfg.iou_intervals.hi, vec![0.85, 0.90, 0.95]);
        assert_eq!(cfg.ap_integration, ApIntegration::AucAllPoints);
        cfg.iou_intervals.validate(&cfg.iou_thresholds).unwrap();
        cfg.validate().unwrap();
    }

    #[test]
    fn default_snap_intervals() {
        let cfg = default_snap_config();
        assert_eq!(cfg.sim_thresholds, vec![0.6, 0.7, 0.8, 0.9]);
        assert_eq!(cfg.sim_intervals.lo, vec![0.6]);
        assert_eq!(cfg.sim_intervals.mi, vec![0.7, 0.8]);
        assert_eq!(cfg.sim_intervals.hi, vec![0.9]);
        cfg.sim_intervals.validate(&cfg.sim_thresholds).unwrap();
    }

    #[test]
    fn threshold_lists_must_increase() {
        let cfg = EvalConfig::default();
        assert!(cfg.clone().with_iou_thresholds(vec![0.5, 0.5]).is_err());
        assert!(cfg.clone().with_iou_thresholds(vec![0.7, 0.5]).is_err());
        assert!(cfg.clone().with_iou_thresholds(vec![0.0]).is_err());
        assert!(cfg.clone().with_sim_thresholds(vec![]).is_err());
        let one = cfg.with_iou_thresholds(vec![0.5]).unwrap();
        assert_eq!(one.iou_intervals.lo, vec![0.5]);
        assert!(one.iou_intervals.mi.is_empty());
    }

    #[test]
    fn overlapping_intervals_rejected() {
        let map = IntervalMap {
            lo: vec![0.5],
            mi: vec![0.5],
            hi: vec![],
        };
        assert!(map.validate(&[0.5]).is_err());
        let gap = IntervalMap {
            lo: vec![0.5],
            mi: vec![],
            hi: vec![],
        };
        assert!(gap.validate(&[0.5, 0.6]).is_err());
    }

    #[test]
    fn embedding_store_invariants() {
        let mut store = EmbeddingStore::new(2).unwrap();
        assert!(store.insert("car", vec![1.0]).is_err());
        assert!(store.insert("car", vec![0.0, 0.0]).is_err());
        assert!(store.insert("Car", vec![1.0, 0.0]).unwrap().is_none());
        assert!(store.contains("car"));
        assert!(store.insert("car", vec![0.0, 1.0]).unwrap().is_some());
        let other = EmbeddingStore::new(3).unwrap();
        assert!(store.merge(&other).is_err());
        assert_eq!(store.missing(["car", "bus", "bus"]), vec!["bus".to_string()]);
    }

    #[test]
    fn uniform_grid_points() {
        let pts = ScoreGrid::uniform_points(0.25);
        assert_eq!(pts, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(ScoreGrid::uniform_points(0.01).len(), 101);
        assert_eq!(ScoreGrid::uniform_points(0.1)[9], 0.9);
        assert_eq!(ScoreGrid::uniform_points(0.3), vec![0.0, 0.3, 0.6, 0.8999999999999999]);
    }
}
