//! Brute-force reference computations, written without the engine's
//! matching or PR code. Inputs are plain numbers.

#![allow(dead_code)]

use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy)]
pub struct OBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

pub fn oracle_iou(a: OBox, b: OBox) -> f64 {
    let ix = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let iy = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = ix * iy;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.w * a.h + b.w * b.h - inter)
}

#[derive(Debug, Clone)]
pub struct OPred {
    pub image: i64,
    pub index: usize,
    pub score: f64,
    pub bbox: OBox,
    pub label: usize,
}

#[derive(Debug, Clone)]
pub struct OTarget {
    pub image: i64,
    pub id: i64,
    pub bbox: OBox,
    pub label: Option<usize>,
}

/// Visits predictions of one image by (score desc, index asc); each takes
/// the free target maximizing `affinity` among those with affinity >= threshold,
/// breaking affinity ties by `tie_key` ascending. Returns (score, is_tp).
pub fn greedy_trace(
    preds: &[&OPred],
    targets: &[&OTarget],
    affinity: &dyn Fn(&OPred, &OTarget) -> Option<f64>,
    tie_key: &dyn Fn(usize, &OTarget) -> i64,
    threshold: f64,
) -> Vec<(f64, bool)> {
    let mut order: Vec<&OPred> = preds.to_vec();
    order.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.index.cmp(&b.index))
    });
    let mut used = vec![false; targets.len()];
    let mut out = Vec::new();
    for p in order {
        let candidates: Vec<(usize, f64)> = (0..targets.len())
            .filter(|&j| !used[j])
            .filter_map(|j| affinity(p, targets[j]).map(|a| (j, a)))
            .filter(|&(_, a)| a >= threshold)
            .collect();
        let best_aff = candidates
            .iter()
            .map(|c| c.1)
            .fold(f64::NEG_INFINITY, f64::max);
        let chosen = candidates
            .iter()
            .filter(|c| c.1 == best_aff)
            .min_by_key(|c| tie_key(c.0, targets[c.0]));
        match chosen {
            Some(&(j, _)) => {
                used[j] = true;
                out.push((p.score, true));
            }
            None => out.push((p.score, false)),
        }
    }
    out
}

/// (recall, precision) at every distinct score threshold.
pub fn threshold_sweep(flags: &[(f64, bool)], n_gt: usize) -> Vec<(f64, f64)> {
    let mut scores: Vec<f64> = flags.iter().map(|f| f.0).collect();
    scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
    scores.dedup();
    scores
        .into_iter()
        .map(|t| {
            let passing: Vec<bool> = flags.iter().filter(|f| f.0 >= t).map(|f| f.1).collect();
            let tp = passing.iter().filter(|&&x| x).count();
            (
                tp as f64 / n_gt as f64,
                tp as f64 / passing.len() as f64,
            )
        })
        .collect()
}

/// Integral over recall of the interpolated precision step function
/// p(r) = max{P : R >= r}.
pub fn oracle_auc(flags: &[(f64, bool)], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let sweep = threshold_sweep(flags, n_gt);
    let mut recalls: Vec<f64> = sweep.iter().map(|s| s.0).filter(|&r| r > 0.0).collect();
    recalls.sort_by(|a, b| a.partial_cmp(b).unwrap());
    recalls.dedup();
    let mut area = 0.0;
    let mut prev = 0.0;
    for r in recalls {
        let p = sweep
            .iter()
            .filter(|s| s.0 >= r)
            .map(|s| s.1)
            .fold(0.0, f64::max);
        area += (r - prev) * p;
        prev = r;
    }
    area
}

/// Mean precision over the distinct score thresholds.
pub fn oracle_threshold_mean(flags: &[(f64, bool)], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let sweep = threshold_sweep(flags, n_gt);
    if sweep.is_empty() {
        return 0.0;
    }
    sweep.iter().map(|s| s.1).sum::<f64>() / sweep.len() as f64
}

fn by_image<'a>(
    preds: &'a [OPred],
    targets: &'a [OTarget],
) -> BTreeMap<i64, (Vec<&'a OPred>, Vec<&'a OTarget>)> {
    let mut m: BTreeMap<i64, (Vec<&OPred>, Vec<&OTarget>)> = BTreeMap::new();
    for p in preds {
        m.entry(p.image).or_default().0.push(p);
    }
    for t in targets {
        m.entry(t.image).or_default().1.push(t);
    }
    m
}

/// Dataset-level TP/FP flags from spatial matching, plus the target count.
pub fn oracle_box_flags(
    preds: &[OPred],
    targets: &[OTarget],
    iou_threshold: f64,
) -> (Vec<(f64, bool)>, usize) {
    let mut flags = Vec::new();
    for (p, t) in by_image(preds, targets).values() {
        flags.extend(greedy_trace(
            p,
            t,
            &|a, b| Some(oracle_iou(a.bbox, b.bbox)),
            &|_, t| t.id,
            iou_threshold,
        ));
    }
    (flags, targets.len())
}

/// Dataset-level flags from label matching with a similarity table indexed
/// by label ids; unlabeled targets are ignored.
pub fn oracle_label_flags(
    preds: &[OPred],
    targets: &[OTarget],
    sim: &dyn Fn(usize, usize) -> f64,
    threshold: f64,
) -> (Vec<(f64, bool)>, usize) {
    let labeled: Vec<OTarget> = targets.iter().filter(|t| t.label.is_some()).cloned().collect();
    let mut flags = Vec::new();
    for (p, t) in by_image(preds, &labeled).values() {
        flags.extend(greedy_trace(
            p,
            t,
            &|a, b| Some(sim(a.label, b.label.unwrap())),
            &|pos, _| pos as i64,
            threshold,
        ));
    }
    (flags, labeled.len())
}
