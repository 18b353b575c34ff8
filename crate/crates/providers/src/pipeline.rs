//! Per-image label generation followed by detection, over a directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use owdet_core::io::{detections_to_json, write_atomic};
use owdet_core::{merge_vocab, BBox, Detection, EmbeddingStore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{PromptTemplate, RetryPolicy};
use crate::error::{Error, Result};
use crate::provider::{
    detect, embed_missing, generate_labels, Detector, Embedder, ImageInput, LabelGenerator,
    RawDetection,
};

const IMAGE_EXTENSIONS: [&str; 8] = ["jpg", "jpeg", "png", "bmp", "gif", "webp", "tif", "tiff"];

pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
}

#[derive(Debug)]
pub struct SystemClock(Instant);

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock(Instant::now())
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.0.elapsed()
    }
}

/// Always reports the same time, so recorded durations are 0.
#[derive(Debug, Default, Clone, Copy)]
pub struct FrozenClock;

impl Clock for FrozenClock {
    fn now(&self) -> Duration {
        Duration::ZERO
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeOptions {
    pub user_labels: Vec<String>,
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub prompt: PromptTemplate,
    pub parallelism: usize,
    pub retry: RetryPolicy,
    pub strict: bool,
    pub merge: Option<MergeOptions>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            prompt: PromptTemplate::default(),
            parallelism: 1,
            retry: RetryPolicy::default(),
            strict: false,
            merge: None,
        }
    }
}

pub struct Providers<'a> {
    pub generator: &'a dyn LabelGenerator,
    pub detector: &'a dyn Detector,
    /// Needed when merging and a label has no precomputed vector.
    pub embedder: Option<&'a dyn Embedder>,
    pub embeddings: Option<EmbeddingStore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempts {
    pub labels: u32,
    pub embed: u32,
    pub detect: u32,
}

impl Attempts {
    /// Attempts beyond the first request of each call made.
    pub fn retries(&self) -> u32 {
        [self.labels, self.embed, self.detect]
            .iter()
            .map(|&a| a.saturating_sub(1))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: i64,
    pub status: ImageStatus,
    /// Labels proposed by the generator.
    pub labels: Vec<String>,
    /// Labels sent to the detector: the merged vocabulary when merging.
    pub queried_labels: Vec<String>,
    pub dropped_labels: Vec<String>,
    pub detections: usize,
    pub attempts: Attempts,
    pub retries: u32,
    pub duration_ms: u64,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeManifest {
    pub user_labels: Vec<String>,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub images: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub detections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub prompt: String,
    pub merge: Option<MergeManifest>,
    pub images: BTreeMap<String, ImageRecord>,
    pub summary: Summary,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest always serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub detections: Vec<Detection>,
    pub manifest: Manifest,
}

impl PipelineOutput {
    pub fn detections_json(&self) -> String {
        detections_to_json(&self.detections)
    }

    /// Writes both files atomically.
    pub fn write(&self, detections_path: &Path, manifest_path: &Path) -> Result<()> {
        write_atomic(detections_path, self.detections_json().as_bytes())?;
        write_atomic(manifest_path, self.manifest.to_json().as_bytes())?;
        Ok(())
    }
}

/// Image files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let io_err = |e| owdet_core::Error::Io {
        path: dir.to_path_buf(),
        source: e,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if path.is_file() && is_image {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(owdet_core::Error::Input(format!("no images in {}", dir.display())).into());
    }
    files.sort_by_key(|p| file_name(p));
    Ok(files)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

struct Processed {
    record: ImageRecord,
    raw: Vec<RawDetection>,
}

pub fn run_pipeline(
    dir: &Path,
    options: &PipelineOptions,
    providers: &Providers<'_>,
    clock: &dyn Clock,
) -> Result<PipelineOutput> {
    let files = list_images(dir)?;
    let base_store = prepare_merge_store(options, providers)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism.max(1))
        .build()
        .map_err(|e| owdet_core::Error::Invariant(format!("thread pool: {e}")))?;
    let processed: Vec<Processed> = pool.install(|| {
        files
            .par_iter()
            .enumerate()
            .map(|(pos, path)| {
                process_image(pos as i64 + 1, path, options, providers, base_store.as_ref(), clock)
            })
            .collect()
    });

    if options.strict {
        if let Some((name, p)) = files
            .iter()
            .zip(&processed)
            .find(|(_, p)| p.record.status == ImageStatus::Failed)
        {
            return Err(Error::ImageFailed {
                image: file_name(name),
                message: p.record.error.clone().unwrap_or_default(),
            });
        }
    }

    let mut detections = Vec::new();
    let mut images = BTreeMap::new();
    for (path, p) in files.iter().zip(processed) {
        for raw in p.raw {
            let bbox = BBox::from_xywh(raw.bbox)?;
            let index = detections.len();
            detections.push(Detection::new(p.record.image_id, bbox, &raw.label, raw.score, index)?);
        }
        images.insert(file_name(path), p.record);
    }
    let failed = images.values().filter(|r| r.status == ImageStatus::Failed).count();
    let manifest = Manifest {
        prompt: options.prompt.text().to_string(),
        merge: options.merge.as_ref().map(|m| MergeManifest {
            user_labels: m.user_labels.clone(),
            tau: m.tau,
        }),
        summary: Summary {
            images: images.len(),
            succeeded: images.len() - failed,
            failed,
            detections: detections.len(),
        },
        images,
    };
    Ok(PipelineOutput {
        detections,
        manifest,
    })
}

/// Store holding at least the user labels, when merging.
fn prepare_merge_store(
    options: &PipelineOptions,
    providers: &Providers<'_>,
) -> Result<Option<EmbeddingStore>> {
    let user = match &options.merge {
        Some(m) if !m.user_labels.is_empty() => &m.user_labels,
        _ => return Ok(None),
    };
    match (&providers.embeddings, providers.embedder) {
        (Some(store), None) => {
            let missing = store.missing(user.iter().map(String::as_str));
            if !missing.is_empty() {
                return Err(owdet_core::Error::MissingEmbedding { labels: missing }.into());
            }
            Ok(Some(store.clone()))
        }
        (Some(store), Some(embedder)) => {
            let mut store = store.clone();
            embed_missing(&mut store, user, embedder, &options.retry)?;
            Ok(Some(store))
        }
        (None, Some(embedder)) => {
            Ok(Some(crate::provider::embed_labels(user, embedder, &options.retry)?.value))
        }
        (None, None) => Err(owdet_core::Error::Config(
            "merging needs an embedding file or an embedder".into(),
        )
        .into()),
    }
}

fn process_image(
    image_id: i64,
    path: &Path,
    options: &PipelineOptions,
    providers: &Providers<'_>,
    base_store: Option<&EmbeddingStore>,
    clock: &dyn Clock,
) -> Processed {
    let start = clock.now();
    let mut record = ImageRecord {
        image_id,
        status: ImageStatus::Ok,
        labels: Vec::new(),
        queried_labels: Vec::new(),
        dropped_labels: Vec::new(),
        detections: 0,
        attempts: Attempts::default(),
        retries: 0,
        duration_ms: 0,
        warnings: Vec::new(),
        error: None,
    };
    let result = run_image(path, options, providers, base_store, &mut record);
    let raw = match result {
        Ok(raw) => raw,
        Err(e) => {
            record.status = ImageStatus::Failed;
            record.error = Some(e.to_string());
            Vec::new()
        }
    };
    record.detections = raw.len();
    record.retries = record.attempts.retries();
    record.duration_ms = (clock.now() - start).as_millis() as u64;
    Processed { record, raw }
}

fn run_image(
    path: &Path,
    options: &PipelineOptions,
    providers: &Providers<'_>,
    base_store: Option<&EmbeddingStore>,
    record: &mut ImageRecord,
) -> Result<Vec<RawDetection>> {
    let bytes = std::fs::read(path).map_err(|e| owdet_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let image = ImageInput::new(file_name(path), bytes);

    let generated = generate_labels(&image, &options.prompt, providers.generator, &options.retry)
        .inspect_err(|e| record.attempts.labels = failed_attempts(e))?;
    record.attempts.labels = generated.attempts;
    record.warnings.extend(generated.warnings);
    record.labels = generated.value;

    record.queried_labels = match (&options.merge, base_store) {
        (Some(merge), Some(base)) => {
            let mut store = base.clone();
            if let Some(embedder) = providers.embedder {
                record.attempts.embed =
                    embed_missing(&mut store, &record.labels, embedder, &options.retry)
                        .inspect_err(|e| record.attempts.embed = failed_attempts(e))?;
            }
            let merged = merge_vocab(&merge.user_labels, &record.labels, &store, merge.tau)?;
            record.dropped_labels = merged.dropped.into_iter().map(|d| d.label).collect();
            merged.merged
        }
        // no user labels: every generated label is kept
        _ => record.labels.clone(),
    };

    let detected = detect(&image, &record.queried_labels, providers.detector, &options.retry)
        .inspect_err(|e| record.attempts.detect = failed_attempts(e))?;
    record.attempts.detect = detected.attempts;
    record.warnings.extend(detected.warnings);
    Ok(detected.value)
}

fn failed_attempts(e: &Error) -> u32 {
    match e {
        Error::Provider(p) => p.attempts,
        _ => 0,
    }
}
