//! The `owdet` command line. Exit codes: 0 success, 1 invalid input,
//! 2 provider failure, 3 internal invariant violation.

pub mod args;

use std::path::{Path, PathBuf};
use std::time::Duration;

use owdet_core::io::json::fixed6;
use owdet_core::io::{
    load_coco_gt, load_detections, load_embeddings, read_label_list, write_embeddings,
    write_label_list, write_report, DatasetGT, DetectionFile, DetectionLoadOptions, GtLoadOptions,
};
use owdet_core::{Interval, MetricReport};
use owdet_providers::{
    embed_labels, run_pipeline, Clock, Detector, Embedder, Flaky, FrozenClock, HttpDetector,
    HttpEmbedder, HttpLabelGenerator, LabelGenerator, MergeOptions, MockDetector, MockEmbedder,
    MockLabelGenerator, PipelineOptions, PromptTemplate, ProviderConfig, Providers, RetryPolicy,
    SystemClock,
};

use args::{
    ApArgs, CaapArgs, Cli, Command, EmbedArgs, InputArgs, MergeArgs, PipelineArgs, ProviderArgs,
    SnapArgs, UnknownArgs,
};

#[derive(Debug)]
pub enum CliError {
    Core(owdet_core::Error),
    Pipeline(owdet_providers::Error),
    Usage(String),
}

impl From<owdet_core::Error> for CliError {
    fn from(e: owdet_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<owdet_providers::Error> for CliError {
    fn from(e: owdet_providers::Error) -> Self {
        CliError::Pipeline(e)
    }
}

impl From<owdet_providers::ProviderError> for CliError {
    fn from(e: owdet_providers::ProviderError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => e.fmt(f),
            CliError::Pipeline(e) => e.fmt(f),
            CliError::Usage(m) => f.write_str(m),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) | CliError::Pipeline(owdet_providers::Error::Core(e)) => {
                if e.is_input_error() {
                    1
                } else {
                    3
                }
            }
            CliError::Usage(_) => 1,
            CliError::Pipeline(owdet_providers::Error::Provider(p))
                if p.kind == owdet_providers::ProviderErrorKind::Config =>
            {
                1
            }
            CliError::Pipeline(_) => 2,
        }
    }
}

/// Runs a parsed command, returning the lines for standard output.
pub fn run(cli: Cli) -> Result<Vec<String>, CliError> {
    match cli.command {
        Command::EvalCaap(a) => eval_caap(a),
        Command::EvalSnap(a) => eval_snap(a),
        Command::EvalUnknown(a) => eval_unknown(a),
        Command::MergeVocab(a) => merge_vocab(a),
        Command::PipelineRun(a) => pipeline_run(a),
        Command::EmbedFetch(a) => embed_fetch(a),
    }
}

fn load_inputs(input: &InputArgs) -> Result<(DatasetGT, DetectionFile), CliError> {
    let gt = load_coco_gt(
        &input.gt,
        &GtLoadOptions {
            unknown_category: input.unknown_category.clone(),
        },
    )?;
    let dets = load_detections(
        &input.dets,
        &DetectionLoadOptions {
            gt: Some(&gt),
            lenient: input.lenient,
        },
    )?;
    Ok((gt, dets))
}

fn apply_ap(cfg: &mut owdet_core::EvalConfig, ap: &ApArgs) {
    cfg.ap_integration = ap.method.into();
    cfg.score_grid = ap.score_grid;
}

fn interval_text(r: &MetricReport, i: Interval) -> String {
    r.interval(i).map_or_else(|| "n/a".to_string(), fixed6)
}

fn summary_line(r: &MetricReport) -> String {
    format!(
        "{} mean={} LO={} MI={} HI={}",
        r.metric,
        fixed6(r.mean),
        interval_text(r, Interval::Lo),
        interval_text(r, Interval::Mi),
        interval_text(r, Interval::Hi)
    )
}

fn finish(r: &MetricReport, out: &Path, format: args::Format) -> Result<Vec<String>, CliError> {
    write_report(r, out, format.into())?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    let mut lines = Vec::new();
    if r.operating_point.is_some() {
        lines.push(unknown_line(r));
    } else {
        lines.push(summary_line(r));
    }
    Ok(lines)
}

fn unknown_line(r: &MetricReport) -> String {
    let op = r.operating_point.as_ref().expect("unknown report has an operating point");
    format!(
        "U-AP={} U-PRE={} U-REC={} U-F1={} score={}",
        fixed6(r.mean),
        fixed6(op.precision),
        fixed6(op.recall),
        fixed6(op.f1),
        fixed6(op.score_threshold)
    )
}

fn eval_caap(a: CaapArgs) -> Result<Vec<String>, CliError> {
    let (gt, dets) = load_inputs(&a.input)?;
    let mut cfg = owdet_core::default_caap_config();
    if let Some(list) = a.iou_list {
        cfg = cfg.with_iou_thresholds(list.0)?;
    }
    apply_ap(&mut cfg, &a.ap);
    let report = owdet_core::caap(&gt, &dets, &cfg)?;
    finish(&report, &a.output.out, a.output.format)
}

fn eval_snap(a: SnapArgs) -> Result<Vec<String>, CliError> {
    let (gt, dets) = load_inputs(&a.input)?;
    let loaded = load_embeddings(&a.embeddings)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let mut cfg = owdet_core::default_snap_config();
    if let Some(list) = a.sim_list {
        cfg = cfg.with_sim_thresholds(list.0)?;
    }
    apply_ap(&mut cfg, &a.ap);
    let report = owdet_core::snap(&gt, &dets, &loaded.store, &cfg)?;
    finish(&report, &a.output.out, a.output.format)
}

fn eval_unknown(a: UnknownArgs) -> Result<Vec<String>, CliError> {
    let (mut gt, dets) = load_inputs(&a.input)?;
    if a.unknown_only {
        gt.objects.retain(|o| o.label.is_none());
    }
    let cfg = owdet_core::EvalConfig {
        unknown_iou: a.iou,
        unknown_operating_point: a.operating_point,
        ..owdet_core::EvalConfig::default()
    };
    let report = owdet_core::unknown_metrics(&gt, &dets, &cfg)?;
    finish(&report, &a.output.out, a.output.format)
}

fn merge_vocab(a: MergeArgs) -> Result<Vec<String>, CliError> {
    let user = read_label_list(&a.user)?;
    let generated = read_label_list(&a.generated)?;
    let store = load_embeddings(&a.embeddings)?.store;
    let result = owdet_core::merge_vocab(&user, &generated, &store, a.tau)?;
    write_label_list(&a.out, &result.merged)?;
    let mut lines = vec![format!(
        "MERGE merged={} kept={} dropped={}",
        result.merged.len(),
        result.kept.len(),
        result.dropped.len()
    )];
    for d in &result.dropped {
        lines.push(format!(
            "dropped {:?} (similarity {} to {:?})",
            d.label,
            fixed6(d.similarity),
            d.nearest_user
        ));
    }
    Ok(lines)
}

fn provider_config(endpoint: &str, p: &ProviderArgs, parallel: usize) -> Result<ProviderConfig, CliError> {
    if !(p.timeout.is_finite() && p.timeout > 0.0) {
        return Err(CliError::Usage(format!("--timeout must be positive, got {}", p.timeout)));
    }
    let mut c = ProviderConfig::new(endpoint);
    c.model = p.model.clone();
    c.timeout = Duration::from_secs_f64(p.timeout);
    c.max_retries = p.retries;
    c.max_parallel = parallel.max(1);
    c.auth_env = p.auth_env.clone();
    c.validate()?;
    Ok(c)
}

fn flaky<P>(inner: P, a: &PipelineArgs) -> Flaky<P> {
    let images = a.mock_fail_image.iter().cloned();
    match a.mock_fail_first {
        Some(n) => Flaky::first_n(inner, images, n),
        None => Flaky::always(inner, images),
    }
}

fn pipeline_run(a: PipelineArgs) -> Result<Vec<String>, CliError> {
    if a.parallel == 0 {
        return Err(CliError::Usage("--parallel must be at least 1".into()));
    }
    if !a.mock && !a.mock_fail_image.is_empty() {
        return Err(CliError::Usage("--mock-fail-image needs --mock".into()));
    }
    let prompt = match &a.prompt {
        Some(p) => PromptTemplate::new(p.clone())?,
        None => PromptTemplate::default(),
    };
    let merge = if a.merge {
        let user = a.user.as_ref().expect("clap enforces --user with --merge");
        Some(MergeOptions {
            user_labels: read_label_list(user)?,
            tau: a.tau,
        })
    } else {
        None
    };
    let embeddings = match (&a.embeddings, a.merge) {
        (Some(path), true) => Some(load_embeddings(path)?.store),
        _ => None,
    };

    let generator: Box<dyn LabelGenerator>;
    let detector: Box<dyn Detector>;
    let embedder: Option<Box<dyn Embedder>>;
    let clock: Box<dyn Clock>;
    let retry;
    if a.mock {
        generator = Box::new(flaky(MockLabelGenerator::new(), &a));
        detector = Box::new(MockDetector::default());
        embedder = Some(Box::new(MockEmbedder::default()));
        clock = Box::new(FrozenClock);
        retry = RetryPolicy::no_delay(a.provider.retries);
    } else {
        let llm = a.llm_endpoint.as_deref().expect("clap enforces endpoint without --mock");
        let det = a.detector_endpoint.as_deref().expect("clap enforces endpoint without --mock");
        let llm_cfg = provider_config(llm, &a.provider, a.parallel)?;
        retry = llm_cfg.retry_policy();
        generator = Box::new(HttpLabelGenerator::new(llm_cfg)?);
        detector = Box::new(HttpDetector::new(provider_config(det, &a.provider, a.parallel)?)?);
        embedder = match &a.embed_endpoint {
            Some(e) => Some(Box::new(HttpEmbedder::new(provider_config(e, &a.provider, a.parallel)?)?)),
            None => None,
        };
        clock = Box::new(SystemClock::default());
    }
    let providers = Providers {
        generator: generator.as_ref(),
        detector: detector.as_ref(),
        embedder: embedder.as_deref(),
        embeddings,
    };
    let options = PipelineOptions {
        prompt,
        parallelism: a.parallel,
        retry,
        strict: a.strict,
        merge,
    };
    let output = run_pipeline(&a.images, &options, &providers, clock.as_ref())?;
    let manifest = a.manifest.clone().unwrap_or_else(|| manifest_path(&a.out));
    output.write(&a.out, &manifest)?;
    let s = &output.manifest.summary;
    let mut lines = vec![format!(
        "PIPELINE images={} ok={} failed={} detections={}",
        s.images, s.succeeded, s.failed, s.detections
    )];
    for (name, rec) in &output.manifest.images {
        if let Some(e) = &rec.error {
            lines.push(format!("failed {name}: {e}"));
        }
    }
    Ok(lines)
}

/// `dets.json` → `dets.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn embed_fetch(a: EmbedArgs) -> Result<Vec<String>, CliError> {
    let labels = read_label_list(&a.labels)?;
    let embedder: Box<dyn Embedder> = if a.mock {
        Box::new(MockEmbedder {
            dimension: a.mock_dimension,
        })
    } else {
        let endpoint = a.endpoint.as_deref().expect("clap enforces --endpoint without --mock");
        Box::new(HttpEmbedder::new(provider_config(endpoint, &a.provider, 1)?)?)
    };
    let retry = if a.mock {
        RetryPolicy::no_delay(a.provider.retries)
    } else {
        RetryPolicy {
            max_retries: a.provider.retries,
            ..RetryPolicy::default()
        }
    };
    let fetched = embed_labels(&labels, embedder.as_ref(), &retry)?.value;
    let store = if a.append && a.out.exists() {
        let mut existing = load_embeddings(&a.out)?.store;
        existing.merge(&fetched)?;
        existing
    } else {
        fetched
    };
    write_embeddings(&a.out, &store)?;
    Ok(vec![format!(
        "EMBED labels={} dimension={}",
        store.len(),
        store.dimension()
    )])
}
