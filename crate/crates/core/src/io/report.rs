use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde_json::Value;

use super::json::{fixed6, JsonNode};
use super::{parse_error, read_text, write_atomic};
use crate::error::{Error, Result};
use crate::metrics::{Counts, MetricReport, OperatingPointValues, ReportConfig};
use crate::model::{ApIntegration, Interval, IntervalMap, OperatingPoint, ScoreGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

/// Two decimals when that is exact, otherwise the shortest round-trip form.
fn threshold_key(t: f64) -> String {
    let short = format!("{t:.2}");
    if short.parse::<f64>().ok() == Some(t) {
        short
    } else {
        t.to_string()
    }
}

fn fixed_list(values: &[f64]) -> JsonNode {
    JsonNode::Array(values.iter().map(|&v| JsonNode::Fixed(v)).collect())
}

fn to_json(report: &MetricReport) -> JsonNode {
    let cfg = &report.config;
    let config = JsonNode::object([
        ("ap_integration", JsonNode::Str(cfg.ap_integration.as_str().into())),
        ("score_grid", JsonNode::Str(cfg.score_grid.describe())),
        ("threshold_kind", JsonNode::Str(cfg.threshold_kind.clone())),
        (
            "intervals",
            JsonNode::object(
                Interval::ALL.map(|i| (i.as_str(), fixed_list(cfg.intervals.members(i)))),
            ),
        ),
        (
            "operating_point",
            cfg.operating_point
                .map_or(JsonNode::Null, |op| JsonNode::Str(op.describe())),
        ),
    ]);
    let op = report.operating_point.map_or(JsonNode::Null, |op| {
        JsonNode::object([
            ("score_threshold", JsonNode::Fixed(op.score_threshold)),
            ("precision", JsonNode::Fixed(op.precision)),
            ("recall", JsonNode::Fixed(op.recall)),
            ("f1", JsonNode::Fixed(op.f1)),
        ])
    });
    JsonNode::object([
        ("metric", JsonNode::Str(report.metric.clone())),
        ("method", JsonNode::Str(report.method().into())),
        (
            "thresholds",
            JsonNode::object(
                report
                    .thresholds
                    .iter()
                    .map(|&(t, v)| (threshold_key(t), JsonNode::Fixed(v))),
            ),
        ),
        (
            "intervals",
            JsonNode::object(
                Interval::ALL.map(|i| (i.as_str(), JsonNode::opt_fixed(report.interval(i)))),
            ),
        ),
        ("mean", JsonNode::Fixed(report.mean)),
        (
            "counts",
            JsonNode::object([
                ("n_images", JsonNode::Int(report.counts.n_images as i64)),
                ("n_predictions", JsonNode::Int(report.counts.n_predictions as i64)),
                ("n_gt", JsonNode::Int(report.counts.n_gt as i64)),
            ]),
        ),
        (
            "warnings",
            JsonNode::Array(report.warnings.iter().cloned().map(JsonNode::Str).collect()),
        ),
        ("config", config),
        ("operating_point", op),
    ])
}

fn to_csv(report: &MetricReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Invariant(format!("csv encoding: {e}"));
    w.write_record(["metric", "kind", "key", "value"]).map_err(csv_err)?;
    let m = report.metric.as_str();
    for &(t, v) in &report.thresholds {
        w.write_record([m, "threshold", &threshold_key(t), &fixed6(v)])
            .map_err(csv_err)?;
    }
    for i in Interval::ALL {
        let v = report.interval(i).map(fixed6).unwrap_or_default();
        w.write_record([m, "interval", i.as_str(), &v]).map_err(csv_err)?;
    }
    w.write_record([m, "mean", "mean", &fixed6(report.mean)])
        .map_err(csv_err)?;
    if let Some(op) = report.operating_point {
        for (k, v) in [
            ("score_threshold", op.score_threshold),
            ("precision", op.precision),
            ("recall", op.recall),
            ("f1", op.f1),
        ] {
            w.write_record([m, "operating_point", k, &fixed6(v)])
                .map_err(csv_err)?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Invariant(format!("csv encoding: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Invariant(e.to_string()))
}

pub fn render_report(report: &MetricReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(to_json(report).render()),
        ReportFormat::Csv => to_csv(report),
    }
}

/// Writes atomically: the destination is either the full report or untouched.
pub fn write_report(report: &MetricReport, path: &Path, format: ReportFormat) -> Result<()> {
    write_atomic(path, render_report(report, format)?.as_bytes())
}

pub fn load_report(path: &Path) -> Result<MetricReport> {
    parse_report(&read_text(path)?, &path.display().to_string())
}

fn bad(field: &str) -> Error {
    Error::validation("malformed report", vec![field.to_string()])
}

fn num(v: &Value, field: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| bad(field))
}

fn text<'a>(v: &'a Value, field: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| bad(field))
}

fn nums(v: &Value, field: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| bad(field))?
        .iter()
        .map(|x| num(x, field))
        .collect()
}

fn parse_call(s: &str, name: &str) -> Option<f64> {
    s.strip_prefix(name)?
        .strip_prefix('(')?
        .strip_suffix(')')?
        .parse()
        .ok()
}

fn parse_ap(s: &str) -> Result<ApIntegration> {
    match s {
        "auc_all_points" => Ok(ApIntegration::AucAllPoints),
        "threshold_mean" => Ok(ApIntegration::ThresholdMean),
        _ => Err(bad("config.ap_integration")),
    }
}

fn parse_grid(s: &str) -> Result<ScoreGrid> {
    if s == "distinct_scores" {
        return Ok(ScoreGrid::DistinctScores);
    }
    parse_call(s, "uniform_grid")
        .map(|step| ScoreGrid::UniformGrid { step })
        .ok_or_else(|| bad("config.score_grid"))
}

fn parse_op(v: &Value) -> Result<Option<OperatingPoint>> {
    match v {
        Value::Null => Ok(None),
        Value::String(s) if s == "best_f1" => Ok(Some(OperatingPoint::BestF1)),
        Value::String(s) => parse_call(s, "fixed_score")
            .map(|t| Some(OperatingPoint::FixedScore(t)))
            .ok_or_else(|| bad("config.operating_point")),
        _ => Err(bad("config.operating_point")),
    }
}

/// Reads back a JSON report written by [`write_report`].
pub fn parse_report(input: &str, source: &str) -> Result<MetricReport> {
    let v: Value = serde_json::from_str(input).map_err(|e| parse_error(source, &e))?;
    let cfg = &v["config"];
    let mut thresholds: Vec<(f64, f64)> = v["thresholds"]
        .as_object()
        .ok_or_else(|| bad("thresholds"))?
        .iter()
        .map(|(k, val)| {
            let t: f64 = k.parse().map_err(|_| bad("thresholds"))?;
            Ok((t, num(val, "thresholds")?))
        })
        .collect::<Result<_>>()?;
    thresholds.sort_by(|a, b| a.0.total_cmp(&b.0));
    let intervals: BTreeMap<Interval, Option<f64>> = Interval::ALL
        .into_iter()
        .map(|i| {
            let x = &v["intervals"][i.as_str()];
            Ok((i, if x.is_null() { None } else { Some(num(x, "intervals")?) }))
        })
        .collect::<Result<_>>()?;
    let interval_cfg = &cfg["intervals"];
    let count = |k: &str| {
        v["counts"][k]
            .as_u64()
            .map(|n| n as usize)
            .ok_or_else(|| bad("counts"))
    };
    let operating_point = match &v["operating_point"] {
        Value::Null => None,
        op => Some(OperatingPointValues {
            score_threshold: num(&op["score_threshold"], "operating_point")?,
            precision: num(&op["precision"], "operating_point")?,
            recall: num(&op["recall"], "operating_point")?,
            f1: num(&op["f1"], "operating_point")?,
        }),
    };
    Ok(MetricReport {
        metric: text(&v["metric"], "metric")?.to_string(),
        thresholds,
        intervals,
        mean: num(&v["mean"], "mean")?,
        counts: Counts {
            n_images: count("n_images")?,
            n_predictions: count("n_predictions")?,
            n_gt: count("n_gt")?,
        },
        config: ReportConfig {
            threshold_kind: text(&cfg["threshold_kind"], "config.threshold_kind")?.to_string(),
            ap_integration: parse_ap(text(&cfg["ap_integration"], "config.ap_integration")?)?,
            score_grid: parse_grid(text(&cfg["score_grid"], "config.score_grid")?)?,
            intervals: IntervalMap {
                lo: nums(&interval_cfg["LO"], "config.intervals")?,
                mi: nums(&interval_cfg["MI"], "config.intervals")?,
                hi: nums(&interval_cfg["HI"], "config.intervals")?,
            },
            operating_point: parse_op(&cfg["operating_point"])?,
        },
        warnings: v["warnings"]
            .as_array()
            .ok_or_else(|| bad("warnings"))?
            .iter()
            .map(|w| text(w, "warnings").map(str::to_string))
            .collect::<Result<_>>()?,
        operating_point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EvalConfig;

    fn report() -> MetricReport {
        let cfg = EvalConfig::default();
        let thresholds: Vec<(f64, f64)> = cfg
            .iou_thresholds
            .iter()
            .map(|&t| (t, 1.0 - t / 2.0))
            .collect();
        let mut intervals = BTreeMap::new();
        for i in Interval::ALL {
            let m = cfg.iou_intervals.members(i);
            let s: f64 = m.iter().map(|t| 1.0 - t / 2.0).sum();
            intervals.insert(i, Some(s / m.len() as f64));
        }
        MetricReport {
            metric: "CAAP".into(),
            thresholds,
            intervals,
            mean: 0.6375,
            counts: Counts {
                n_images: 3,
                n_predictions: 7,
                n_gt: 5,
            },
            config: ReportConfig {
                threshold_kind: "iou".into(),
                ap_integration: ApIntegration::AucAllPoints,
                score_grid: ScoreGrid::UniformGrid { step: 0.01 },
                intervals: cfg.iou_intervals.clone(),
                operating_point: Some(OperatingPoint::FixedScore(0.3)),
            },
            warnings: vec!["w \"1\"".into()],
            operating_point: Some(OperatingPointValues {
                score_threshold: 0.3,
                precision: 2.0 / 3.0,
                recall: 0.5,
                f1: 4.0 / 7.0,
            }),
        }
    }

    fn round6(v: f64) -> f64 {
        fixed6(v).parse().unwrap()
    }

    #[test]
    fn json_is_byte_stable_and_round_trips() {
        let r = report();
        let a = render_report(&r, ReportFormat::Json).unwrap();
        assert_eq!(a, render_report(&r, ReportFormat::Json).unwrap());
        assert!(a.contains("\"0.55\": 0.725000"));
        let back = parse_report(&a, "r.json").unwrap();
        assert_eq!(back.metric, r.metric);
        assert_eq!(back.config, r.config);
        assert_eq!(back.counts, r.counts);
        assert_eq!(back.warnings, r.warnings);
        for ((t1, v1), (t2, v2)) in r.thresholds.iter().zip(&back.thresholds) {
            assert_eq!(*t1, *t2);
            assert_eq!(round6(*v1), *v2);
        }
        let op = back.operating_point.unwrap();
        assert_eq!(op.f1, round6(4.0 / 7.0));
        assert_eq!(back.interval(Interval::Hi), r.interval(Interval::Hi).map(round6));
    }

    #[test]
    fn csv_rows() {
        let text = render_report(&report(), ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "metric,kind,key,value");
        assert_eq!(lines[1], "CAAP,threshold,0.50,0.750000");
        assert!(lines.contains(&"CAAP,mean,mean,0.637500"));
        assert_eq!(lines.len(), 1 + 10 + 3 + 1 + 4);
    }

    #[test]
    fn odd_threshold_keys_keep_precision() {
        assert_eq!(threshold_key(0.5), "0.50");
        assert_eq!(threshold_key(0.525), "0.525");
    }
}
