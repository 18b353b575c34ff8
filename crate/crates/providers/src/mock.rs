//! Deterministic stand-ins for the three providers. Every output is a pure
//! function of the request contents.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Mutex;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::config::DEFAULT_PROMPT;
use crate::error::{ProviderError, ProviderErrorKind};
use crate::provider::{Detector, Embedder, ImageInput, LabelGenerator, RawDetection};

pub const MOVING_VEHICLES_PROMPT: &str = "List currently moving vehicles in this scene.";

const MOCK_VOCABULARY: [&str; 12] = [
    "person",
    "bicycle",
    "car",
    "dog",
    "chair",
    "bottle",
    "traffic light",
    "backpack",
    "bench",
    "potted plant",
    "umbrella",
    "cup",
];

fn seeded_rng(parts: &[&[u8]]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest[..32]);
    ChaCha8Rng::from_seed(seed)
}

/// Replies from a prompt script, falling back to a fixed reply or to a
/// numbered list drawn from a small vocabulary by hashing image and prompt.
#[derive(Debug, Clone, Default)]
pub struct MockLabelGenerator {
    script: BTreeMap<String, String>,
    fixed: Option<String>,
}

impl MockLabelGenerator {
    pub fn new() -> Self {
        Self::default()
    }

    /// The street-scene script: the default prompt sees four objects, the
    /// moving-vehicles prompt only the bicycle.
    pub fn scripted_scene() -> Self {
        MockLabelGenerator::new()
            .with_reply(DEFAULT_PROMPT, "1. person\n2. chair\n3. car\n4. bicycle")
            .with_reply(MOVING_VEHICLES_PROMPT, "bicycle")
    }

    /// Same reply for every prompt and image.
    pub fn fixed(reply: impl Into<String>) -> Self {
        MockLabelGenerator {
            script: BTreeMap::new(),
            fixed: Some(reply.into()),
        }
    }

    pub fn with_reply(mut self, prompt: &str, reply: &str) -> Self {
        self.script.insert(prompt.trim().to_string(), reply.to_string());
        self
    }
}

impl LabelGenerator for MockLabelGenerator {
    fn complete(&self, image: &ImageInput, prompt: &str) -> Result<String, ProviderError> {
        if let Some(reply) = self.script.get(prompt.trim()) {
            return Ok(reply.clone());
        }
        if let Some(reply) = &self.fixed {
            return Ok(reply.clone());
        }
        let mut rng = seeded_rng(&[b"labels", &image.bytes, prompt.as_bytes()]);
        let k = rng.gen_range(2..=5);
        let mut picks = sample(&mut rng, MOCK_VOCABULARY.len(), k).into_vec();
        picks.sort_unstable();
        Ok(picks
            .iter()
            .enumerate()
            .map(|(i, &p)| format!("{}. {}", i + 1, MOCK_VOCABULARY[p]))
            .collect::<Vec<_>>()
            .join("\n"))
    }
}

/// Boxes from a fixed script, or 0 to 2 boxes per queried label placed by
/// hashing image bytes and label.
#[derive(Debug, Clone)]
pub enum MockDetector {
    Hashed { width: f64, height: f64 },
    Scripted(Vec<RawDetection>),
}

impl Default for MockDetector {
    fn default() -> Self {
        MockDetector::Hashed {
            width: 640.0,
            height: 480.0,
        }
    }
}

impl MockDetector {
    pub fn scripted_scene() -> Self {
        let d = |label: &str, bbox: [f64; 4], score: f64| RawDetection {
            label: label.to_string(),
            bbox,
            score,
        };
        MockDetector::Scripted(vec![
            d("person", [212.0, 88.0, 74.0, 210.0], 0.91),
            d("bicycle", [180.0, 190.0, 150.0, 110.0], 0.87),
            d("car", [410.0, 150.0, 190.0, 95.0], 0.78),
            d("chair", [30.0, 260.0, 60.0, 85.0], 0.42),
        ])
    }
}

fn grid(rng: &mut ChaCha8Rng, lo: f64, hi: f64, step: f64) -> f64 {
    let k = rng.gen_range((lo / step).round() as i64..=(hi / step).round() as i64);
    k as f64 * step
}

impl Detector for MockDetector {
    fn detect(&self, image: &ImageInput, labels: &[String]) -> Result<Vec<RawDetection>, ProviderError> {
        let (width, height) = match self {
            MockDetector::Scripted(dets) => return Ok(dets.clone()),
            MockDetector::Hashed { width, height } => (*width, *height),
        };
        let mut out = Vec::new();
        for label in labels {
            let mut rng = seeded_rng(&[b"boxes", &image.bytes, label.as_bytes()]);
            for _ in 0..rng.gen_range(0..=2) {
                let w = grid(&mut rng, 8.0, width / 2.0, 0.5);
                let h = grid(&mut rng, 8.0, height / 2.0, 0.5);
                let x = grid(&mut rng, 0.0, width - w, 0.5);
                let y = grid(&mut rng, 0.0, height - h, 0.5);
                let score = rng.gen_range(50..=999) as f64 / 1000.0;
                out.push(RawDetection {
                    label: label.clone(),
                    bbox: [x, y, w, h],
                    score,
                });
            }
        }
        Ok(out)
    }
}

/// Unit vectors seeded by a hash of the label.
#[derive(Debug, Clone, Copy)]
pub struct MockEmbedder {
    pub dimension: usize,
}

impl Default for MockEmbedder {
    fn default() -> Self {
        MockEmbedder { dimension: 512 }
    }
}

impl MockEmbedder {
    pub fn vector(&self, label: &str) -> Vec<f64> {
        let mut rng = seeded_rng(&[b"embed", label.as_bytes()]);
        loop {
            let v: Vec<f64> = (0..self.dimension).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }
}

impl Embedder for MockEmbedder {
    fn embed(&self, labels: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        if self.dimension == 0 {
            return Err(ProviderError::new(
                "mock-embedder",
                ProviderErrorKind::Config,
                "dimension must be positive",
            ));
        }
        Ok(labels.iter().map(|l| self.vector(l)).collect())
    }
}

/// Wraps a provider and fails requests for selected images with a
/// transient transport error: always, or for the first `n` requests per image.
#[derive(Debug)]
pub struct Flaky<P> {
    inner: P,
    images: BTreeSet<String>,
    fail_first: Option<u32>,
    seen: Mutex<HashMap<String, u32>>,
}

impl<P> Flaky<P> {
    pub fn always(inner: P, images: impl IntoIterator<Item = String>) -> Self {
        Flaky {
            inner,
            images: images.into_iter().collect(),
            fail_first: None,
            seen: Mutex::new(HashMap::new()),
        }
    }

    pub fn first_n(inner: P, images: impl IntoIterator<Item = String>, n: u32) -> Self {
        Flaky {
            fail_first: Some(n),
            ..Flaky::always(inner, images)
        }
    }

    fn check(&self, image: &ImageInput) -> Result<(), ProviderError> {
        if !self.images.contains(&image.name) {
            return Ok(());
        }
        let mut seen = self.seen.lock().expect("flaky counter poisoned");
        let count = seen.entry(image.name.clone()).or_insert(0);
        *count += 1;
        match self.fail_first {
            Some(n) if *count > n => Ok(()),
            _ => Err(ProviderError::new(
                "mock",
                ProviderErrorKind::Transport,
                format!("simulated failure for {}", image.name),
            )),
        }
    }
}

impl<P: LabelGenerator> LabelGenerator for Flaky<P> {
    fn complete(&self, image: &ImageInput, prompt: &str) -> Result<String, ProviderError> {
        self.check(image)?;
        self.inner.complete(image, prompt)
    }
}

impl<P: Detector> Detector for Flaky<P> {
    fn detect(&self, image: &ImageInput, labels: &[String]) -> Result<Vec<RawDetection>, ProviderError> {
        self.check(image)?;
        self.inner.detect(image, labels)
    }
}
