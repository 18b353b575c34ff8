use std::path::Path;

use owdet_core::{normalize_label, BBox, EmbeddingStore};
use serde::{Deserialize, Serialize};

use crate::config::{PromptTemplate, RetryPolicy};
use crate::error::{ProviderError, Result};
use crate::parse::parse_label_reply;

/// An encoded image and the file name it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageInput {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl ImageInput {
    pub fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        ImageInput {
            name: name.into(),
            bytes,
        }
    }

    /// Media type guessed from the file extension.
    pub fn mime_type(&self) -> &'static str {
        let ext = Path::new(&self.name)
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("png") => "image/png",
            Some("gif") => "image/gif",
            Some("webp") => "image/webp",
            Some("bmp") => "image/bmp",
            Some("tif" | "tiff") => "image/tiff",
            _ => "image/jpeg",
        }
    }
}

/// A box as returned by a detector, `[x, y, w, h]` in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDetection {
    pub label: String,
    pub bbox: [f64; 4],
    pub score: f64,
}

/// Answers a prompt about one image with free text.
pub trait LabelGenerator: Send + Sync {
    fn complete(&self, image: &ImageInput, prompt: &str) -> Result<String, ProviderError>;
}

/// Localizes the given labels in one image.
pub trait Detector: Send + Sync {
    fn detect(&self, image: &ImageInput, labels: &[String]) -> Result<Vec<RawDetection>, ProviderError>;
}

/// Returns one vector per label, in input order.
pub trait Embedder: Send + Sync {
    fn embed(&self, labels: &[String]) -> Result<Vec<Vec<f64>>, ProviderError>;
}

/// A provider result with the warnings raised and the attempts it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome<T> {
    pub value: T,
    pub warnings: Vec<String>,
    pub attempts: u32,
}

fn require_image(image: &ImageInput) -> Result<()> {
    if image.bytes.is_empty() {
        return Err(owdet_core::Error::Input(format!("image {} is empty", image.name)).into());
    }
    Ok(())
}

/// Asks the generator for the image's labels and parses the reply.
pub fn generate_labels(
    image: &ImageInput,
    prompt: &PromptTemplate,
    generator: &dyn LabelGenerator,
    retry: &RetryPolicy,
) -> Result<Outcome<Vec<String>>> {
    require_image(image)?;
    let (reply, attempts) = retry.run(|| generator.complete(image, prompt.text()));
    let parsed = parse_label_reply(&reply?);
    Ok(Outcome {
        value: parsed.labels,
        warnings: parsed.warnings,
        attempts,
    })
}

/// Queries the detector with `labels`. Records whose label is outside the
/// query set, whose score is outside `[0, 1]` or whose box is degenerate are
/// dropped with a warning. No labels means no call.
pub fn detect(
    image: &ImageInput,
    labels: &[String],
    detector: &dyn Detector,
    retry: &RetryPolicy,
) -> Result<Outcome<Vec<RawDetection>>> {
    require_image(image)?;
    if labels.is_empty() {
        return Ok(Outcome {
            value: Vec::new(),
            warnings: Vec::new(),
            attempts: 0,
        });
    }
    let (reply, attempts) = retry.run(|| detector.detect(image, labels));
    let mut kept = Vec::new();
    let mut warnings = Vec::new();
    for (i, mut det) in reply?.into_iter().enumerate() {
        let label = normalize_label(&det.label).ok();
        match label {
            Some(l) if labels.contains(&l) => det.label = l,
            _ => {
                warnings.push(format!(
                    "detector record {i}: label {:?} was not queried",
                    det.label
                ));
                continue;
            }
        }
        if !(0.0..=1.0).contains(&det.score) {
            warnings.push(format!("detector record {i}: score {} outside [0, 1]", det.score));
            continue;
        }
        if BBox::from_xywh(det.bbox).is_err() {
            warnings.push(format!("detector record {i}: invalid bbox {:?}", det.bbox));
            continue;
        }
        kept.push(det);
    }
    Ok(Outcome {
        value: kept,
        warnings,
        attempts,
    })
}

/// Embeds each distinct normalized label once.
pub fn embed_labels<S: AsRef<str>>(
    labels: &[S],
    embedder: &dyn Embedder,
    retry: &RetryPolicy,
) -> Result<Outcome<EmbeddingStore>> {
    let mut unique: Vec<String> = Vec::new();
    for l in labels {
        let n = normalize_label(l.as_ref())?;
        if !unique.contains(&n) {
            unique.push(n);
        }
    }
    if unique.is_empty() {
        return Err(owdet_core::Error::Input("no labels to embed".into()).into());
    }
    let (reply, attempts) = retry.run(|| embedder.embed(&unique));
    let vectors = reply?;
    if vectors.len() != unique.len() {
        return Err(ProviderError::schema(
            "embedder",
            format!("expected {} vectors, got {}", unique.len(), vectors.len()),
            "",
        )
        .into());
    }
    let dimension = vectors[0].len();
    let mut store = EmbeddingStore::new(dimension)?;
    for (label, v) in unique.iter().zip(vectors) {
        store.insert(label, v)?;
    }
    Ok(Outcome {
        value: store,
        warnings: Vec::new(),
        attempts,
    })
}

/// Embeds the labels `store` lacks and merges them in. Returns the attempts used.
pub fn embed_missing<S: AsRef<str>>(
    store: &mut EmbeddingStore,
    labels: &[S],
    embedder: &dyn Embedder,
    retry: &RetryPolicy,
) -> Result<u32> {
    let missing = store.missing(labels.iter().map(|l| l.as_ref()));
    if missing.is_empty() {
        return Ok(0);
    }
    let fragment = embed_labels(&missing, embedder, retry)?;
    store.merge(&fragment.value)?;
    Ok(fragment.attempts)
}
