//! Precision–recall curves and their reduction to average precision.
//!
//! A curve has one point per ledger entry. Entries that share a score are
//! only separable by tie-break order, so AP and operating points are read at
//! the last entry of each equal-score run: the state reached by thresholding
//! at `score >= s`.

use crate::matching::MatchLedger;
use crate::model::{ApIntegration, ScoreGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub score: f64,
    pub tp: usize,
    pub fp: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub n_gt: usize,
}

impl PrCurve {
    /// Points reachable by a score threshold, in descending score order.
    pub fn operating_points(&self) -> impl Iterator<Item = &PrPoint> + '_ {
        self.points
            .iter()
            .enumerate()
            .filter(|(i, p)| {
                self.points
                    .get(i + 1)
                    .map_or(true, |next| next.score != p.score)
            })
            .map(|(_, p)| p)
    }

    /// Counts at threshold `score >= threshold`, or `None` if nothing passes.
    pub fn at_threshold(&self, threshold: f64) -> Option<&PrPoint> {
        self.points.iter().take_while(|p| p.score >= threshold).last()
    }
}

pub fn pr_curve(ledger: &MatchLedger) -> PrCurve {
    let n_gt = ledger.total_gt();
    let mut tp = 0;
    let mut fp = 0;
    let points = ledger
        .entries()
        .iter()
        .map(|e| {
            if e.is_tp {
                tp += 1;
            } else {
                fp += 1;
            }
            PrPoint {
                score: e.score,
                tp,
                fp,
                precision: tp as f64 / (tp + fp) as f64,
                recall: if n_gt == 0 {
                    0.0
                } else {
                    tp as f64 / n_gt as f64
                },
            }
        })
        .collect();
    PrCurve { points, n_gt }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApResult {
    pub value: f64,
    /// Set when the curve had no targets; `value` is then 0.
    pub no_ground_truth: bool,
}

pub fn average_precision(curve: &PrCurve, method: ApIntegration, grid: ScoreGrid) -> ApResult {
    if curve.n_gt == 0 {
        return ApResult {
            value: 0.0,
            no_ground_truth: true,
        };
    }
    let value = match method {
        ApIntegration::AucAllPoints => auc_all_points(curve),
        ApIntegration::ThresholdMean => threshold_mean(curve, grid),
    };
    ApResult {
        value: value.clamp(0.0, 1.0),
        no_ground_truth: false,
    }
}

fn auc_all_points(curve: &PrCurve) -> f64 {
    let ops: Vec<&PrPoint> = curve.operating_points().collect();
    let mut interpolated: Vec<f64> = ops.iter().map(|p| p.precision).collect();
    for i in (0..interpolated.len().saturating_sub(1)).rev() {
        interpolated[i] = interpolated[i].max(interpolated[i + 1]);
    }
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for (p, ip) in ops.iter().zip(&interpolated) {
        if p.recall > prev_recall {
            ap += (p.recall - prev_recall) * ip;
            prev_recall = p.recall;
        }
    }
    ap
}

fn threshold_mean(curve: &PrCurve, grid: ScoreGrid) -> f64 {
    let precisions: Vec<f64> = match grid {
        ScoreGrid::DistinctScores => curve.operating_points().map(|p| p.precision).collect(),
        // grid points that no prediction reaches have no defined precision
        ScoreGrid::UniformGrid { step } => ScoreGrid::uniform_points(step)
            .into_iter()
            .filter_map(|t| curve.at_threshold(t).map(|p| p.precision))
            .collect(),
    };
    if precisions.is_empty() {
        return 0.0;
    }
    precisions.iter().sum::<f64>() / precisions.len() as f64
}
