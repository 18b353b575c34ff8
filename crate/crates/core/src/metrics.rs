//! CAAP, SNAP and the unknown-object metric family.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{DatasetGT, DetectionFile};
use crate::matching::{self, MatchLedger};
use crate::model::{
    ApIntegration, EmbeddingStore, EvalConfig, Interval, IntervalMap, OperatingPoint, ScoreGrid,
};
use crate::pr::{self, PrCurve};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub n_images: usize,
    pub n_predictions: usize,
    pub n_gt: usize,
}

/// Echo of the configuration a report was computed with.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportConfig {
    /// `"iou"` or `"similarity"`.
    pub threshold_kind: String,
    pub ap_integration: ApIntegration,
    pub score_grid: ScoreGrid,
    pub intervals: IntervalMap,
    pub operating_point: Option<OperatingPoint>,
}

/// Precision, recall and F1 at the selected operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPointValues {
    pub score_threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub metric: String,
    /// `(threshold, value)` in configured threshold order.
    pub thresholds: Vec<(f64, f64)>,
    /// Mean of the member thresholds; `None` for an empty group.
    pub intervals: BTreeMap<Interval, Option<f64>>,
    pub mean: f64,
    pub counts: Counts,
    pub config: ReportConfig,
    pub warnings: Vec<String>,
    pub operating_point: Option<OperatingPointValues>,
}

impl MetricReport {
    pub fn method(&self) -> &'static str {
        self.config.ap_integration.as_str()
    }

    pub fn value_at(&self, threshold: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .find(|(t, _)| *t == threshold)
            .map(|(_, v)| *v)
    }

    pub fn interval(&self, interval: Interval) -> Option<f64> {
        self.intervals.get(&interval).copied().flatten()
    }

    fn assemble(
        metric: &str,
        thresholds: Vec<(f64, f64)>,
        counts: Counts,
        config: ReportConfig,
        warnings: Vec<String>,
    ) -> Self {
        let intervals = Interval::ALL
            .into_iter()
            .map(|i| {
                let members: Vec<f64> = thresholds
                    .iter()
                    .filter(|(t, _)| config.intervals.members(i).contains(t))
                    .map(|(_, v)| *v)
                    .collect();
                (i, mean(&members))
            })
            .collect();
        let values: Vec<f64> = thresholds.iter().map(|(_, v)| *v).collect();
        MetricReport {
            metric: metric.to_string(),
            mean: mean(&values).unwrap_or(0.0),
            thresholds,
            intervals,
            counts,
            config,
            warnings,
            operating_point: None,
        }
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn format_threshold(t: f64) -> String {
    format!("{t:.2}")
}

fn input_warnings(gt: &DatasetGT, dets: &DetectionFile) -> Vec<String> {
    gt.warnings
        .iter()
        .chain(dets.warnings.iter())
        .cloned()
        .collect()
}

fn evaluate_ledger(
    ledger: &MatchLedger,
    cfg: &EvalConfig,
    threshold: f64,
    warnings: &mut Vec<String>,
) -> Result<f64> {
    ledger.check_invariants()?;
    let curve = pr::pr_curve(ledger);
    let ap = pr::average_precision(&curve, cfg.ap_integration, cfg.score_grid);
    if ap.no_ground_truth {
        warnings.push(format!(
            "no ground truth at threshold {}: AP defined as 0",
            format_threshold(threshold)
        ));
    }
    Ok(ap.value)
}

fn per_threshold(
    thresholds: &[f64],
    cfg: &EvalConfig,
    ledger_at: impl Fn(f64) -> Result<MatchLedger> + Sync,
) -> Result<(Vec<(f64, f64)>, Vec<String>)> {
    let results: Vec<(f64, f64, Vec<String>)> = thresholds
        .par_iter()
        .map(|&t| {
            let mut warnings = Vec::new();
            let ledger = ledger_at(t)?;
            let v = evaluate_ledger(&ledger, cfg, t, &mut warnings)?;
            Ok((t, v, warnings))
        })
        .collect::<Result<_>>()?;
    let mut warnings = Vec::new();
    let values = results
        .into_iter()
        .map(|(t, v, w)| {
            warnings.extend(w);
            (t, v)
        })
        .collect();
    Ok((values, warnings))
}

/// Class-agnostic AP at every configured IoU threshold.
pub fn caap(gt: &DatasetGT, dets: &DetectionFile, cfg: &EvalConfig) -> Result<MetricReport> {
    cfg.validate()?;
    let (values, extra) = per_threshold(&cfg.iou_thresholds, cfg, |t| {
        matching::match_dataset_boxes(&dets.detections, &gt.objects, t)
    })?;
    let mut warnings = input_warnings(gt, dets);
    warnings.extend(extra);
    Ok(MetricReport::assemble(
        "CAAP",
        values,
        Counts {
            n_images: gt.images.len(),
            n_predictions: dets.detections.len(),
            n_gt: gt.objects.len(),
        },
        ReportConfig {
            threshold_kind: "iou".into(),
            ap_integration: cfg.ap_integration,
            score_grid: cfg.score_grid,
            intervals: cfg.iou_intervals.clone(),
            operating_point: None,
        },
        warnings,
    ))
}

/// Semantic naming AP at every configured similarity threshold.
///
/// Fails with [`Error::NoLabeledGroundTruth`] when no ground-truth object
/// carries a label, and with [`Error::MissingEmbedding`] listing every label
/// that has no vector.
pub fn snap(
    gt: &DatasetGT,
    dets: &DetectionFile,
    store: &EmbeddingStore,
    cfg: &EvalConfig,
) -> Result<MetricReport> {
    cfg.validate()?;
    let n_labeled = gt.objects.iter().filter(|o| o.label.is_some()).count();
    if n_labeled == 0 {
        return Err(Error::NoLabeledGroundTruth);
    }
    let missing = store.missing(
        dets.detections
            .iter()
            .map(|d| d.label.as_str())
            .chain(gt.objects.iter().filter_map(|o| o.label.as_deref())),
    );
    if !missing.is_empty() {
        return Err(Error::MissingEmbedding { labels: missing });
    }
    let (values, extra) = per_threshold(&cfg.sim_thresholds, cfg, |t| {
        matching::match_dataset_labels(&dets.detections, &gt.objects, store, t)
    })?;
    let mut warnings = input_warnings(gt, dets);
    warnings.extend(extra);
    let unlabeled = gt.objects.len() - n_labeled;
    if unlabeled > 0 {
        warnings.push(format!(
            "{unlabeled} unlabeled ground-truth object(s) excluded from SNAP"
        ));
    }
    Ok(MetricReport::assemble(
        "SNAP",
        values,
        Counts {
            n_images: gt.images.len(),
            n_predictions: dets.detections.len(),
            n_gt: n_labeled,
        },
        ReportConfig {
            threshold_kind: "similarity".into(),
            ap_integration: cfg.ap_integration,
            score_grid: cfg.score_grid,
            intervals: cfg.sim_intervals.clone(),
            operating_point: None,
        },
        warnings,
    ))
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Picks the operating point on `curve`. Best-F1 ties go to higher recall.
pub fn select_operating_point(
    curve: &PrCurve,
    mode: OperatingPoint,
) -> Option<OperatingPointValues> {
    let to_values = |p: &pr::PrPoint, threshold: f64| OperatingPointValues {
        score_threshold: threshold,
        precision: p.precision,
        recall: p.recall,
        f1: f1(p.precision, p.recall),
    };
    match mode {
        OperatingPoint::BestF1 => curve
            .operating_points()
            .map(|p| to_values(p, p.score))
            .fold(None, |best: Option<OperatingPointValues>, cand| match best {
                Some(b) if b.f1 > cand.f1 || (b.f1 == cand.f1 && b.recall >= cand.recall) => {
                    Some(b)
                }
                _ => Some(cand),
            }),
        OperatingPoint::FixedScore(t) => curve.at_threshold(t).map(|p| to_values(p, t)),
    }
}

/// U-AP, U-PRE, U-REC and U-F1, treating every ground-truth object as
/// unknown and every prediction as an unknown detection.
pub fn unknown_metrics(
    gt: &DatasetGT,
    dets: &DetectionFile,
    cfg: &EvalConfig,
) -> Result<MetricReport> {
    cfg.validate()?;
    let t = cfg.unknown_iou;
    let ledger = matching::match_dataset_boxes(&dets.detections, &gt.objects, t)?;
    let mut warnings = input_warnings(gt, dets);
    let auc_cfg = EvalConfig {
        ap_integration: ApIntegration::AucAllPoints,
        ..cfg.clone()
    };
    let u_ap = evaluate_ledger(&ledger, &auc_cfg, t, &mut warnings)?;
    let curve = pr::pr_curve(&ledger);
    let op = select_operating_point(&curve, cfg.unknown_operating_point).unwrap_or_else(|| {
        warnings.push("no prediction reaches the operating point: U-PRE/U-REC/U-F1 are 0".into());
        OperatingPointValues {
            score_threshold: match cfg.unknown_operating_point {
                OperatingPoint::FixedScore(s) => s,
                OperatingPoint::BestF1 => 1.0,
            },
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        }
    });
    let intervals =
        IntervalMap::by_bounds(&[t], crate::model::CAAP_LO_MAX, crate::model::CAAP_MI_MAX);
    let mut report = MetricReport::assemble(
        "U-AP",
        vec![(t, u_ap)],
        Counts {
            n_images: gt.images.len(),
            n_predictions: dets.detections.len(),
            n_gt: gt.objects.len(),
        },
        ReportConfig {
            threshold_kind: "iou".into(),
            ap_integration: ApIntegration::AucAllPoints,
            score_grid: cfg.score_grid,
            intervals,
            operating_point: Some(cfg.unknown_operating_point),
        },
        warnings,
    );
    report.operating_point = Some(op);
    Ok(report)
}
