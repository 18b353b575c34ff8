use std::path::Path;
use std::sync::Mutex;

use owdet_core::EmbeddingStore;
use owdet_providers::{
    run_pipeline, Detector, Error, Flaky, FrozenClock, ImageInput, ImageStatus, MergeOptions,
    MockDetector, MockEmbedder, MockLabelGenerator, PipelineOptions, PipelineOutput,
    PromptTemplate, ProviderError, Providers, RawDetection, RetryPolicy,
};

fn fixture(dir: &Path, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        std::fs::write(dir.join(name), format!("fake image bytes {i} {name}")).unwrap();
    }
}

fn five_images() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), &["e.jpg", "b.png", "a.jpg", "d.jpeg", "c.JPG"]);
    std::fs::write(dir.path().join("notes.txt"), "not an image").unwrap();
    dir
}

fn options(parallelism: usize) -> PipelineOptions {
    PipelineOptions {
        parallelism,
        retry: RetryPolicy::no_delay(2),
        ..PipelineOptions::default()
    }
}

fn run_mock(dir: &Path, opts: &PipelineOptions) -> PipelineOutput {
    let generator = MockLabelGenerator::new();
    let detector = MockDetector::default();
    let providers = Providers {
        generator: &generator,
        detector: &detector,
        embedder: None,
        embeddings: None,
    };
    run_pipeline(dir, opts, &providers, &FrozenClock).unwrap()
}

#[test]
fn mock_runs_are_byte_identical_across_widths() {
    let dir = five_images();
    let out = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for width in [1, 4] {
        for run in 0..3 {
            let result = run_mock(dir.path(), &options(width));
            let d = out.path().join(format!("dets-{width}-{run}.json"));
            let m = out.path().join(format!("manifest-{width}-{run}.json"));
            result.write(&d, &m).unwrap();
            outputs.push((std::fs::read(d).unwrap(), std::fs::read(m).unwrap()));
        }
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    assert!(!outputs[0].0.is_empty());
}

#[test]
fn images_are_ordered_by_file_name() {
    let dir = five_images();
    let out = run_mock(dir.path(), &options(2));
    let names: Vec<&String> = out.manifest.images.keys().collect();
    assert_eq!(names, ["a.jpg", "b.png", "c.JPG", "d.jpeg", "e.jpg"]);
    let ids: Vec<i64> = out.manifest.images.values().map(|r| r.image_id).collect();
    assert_eq!(ids, [1, 2, 3, 4, 5]);
    for (i, d) in out.detections.iter().enumerate() {
        assert_eq!(d.index, i);
    }
    assert!(out.detections.windows(2).all(|w| w[0].image_id <= w[1].image_id));
    assert_eq!(out.manifest.summary.detections, out.detections.len());
    assert_eq!(out.manifest.prompt, "List the objects that you see in this image.");
    let rec = &out.manifest.images["a.jpg"];
    assert_eq!(rec.labels, rec.queried_labels);
    assert_eq!((rec.attempts.labels, rec.retries, rec.duration_ms), (1, 0, 0));
}

#[test]
fn scripted_scene_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), &["scene.jpg"]);
    let generator = MockLabelGenerator::scripted_scene();
    let detector = MockDetector::scripted_scene();
    let providers = Providers {
        generator: &generator,
        detector: &detector,
        embedder: None,
        embeddings: None,
    };
    let out = run_pipeline(dir.path(), &options(1), &providers, &FrozenClock).unwrap();
    let rec = &out.manifest.images["scene.jpg"];
    assert_eq!(rec.labels, ["person", "chair", "car", "bicycle"]);
    assert_eq!(out.detections.len(), 4);

    let opts = PipelineOptions {
        prompt: PromptTemplate::new(owdet_providers::MOVING_VEHICLES_PROMPT).unwrap(),
        ..options(1)
    };
    let out = run_pipeline(dir.path(), &opts, &providers, &FrozenClock).unwrap();
    let rec = &out.manifest.images["scene.jpg"];
    assert_eq!(rec.labels, ["bicycle"]);
    assert_eq!(out.detections.len(), 1);
    assert_eq!(out.detections[0].label, "bicycle");
    assert_eq!(rec.warnings.len(), 3);
}

#[test]
fn failures_are_recorded_and_the_run_continues() {
    let dir = five_images();
    let generator = Flaky::always(MockLabelGenerator::new(), ["c.JPG".to_string()]);
    let detector = MockDetector::default();
    let providers = Providers {
        generator: &generator,
        detector: &detector,
        embedder: None,
        embeddings: None,
    };
    let out = run_pipeline(dir.path(), &options(4), &providers, &FrozenClock).unwrap();
    let bad = &out.manifest.images["c.JPG"];
    assert_eq!(bad.status, ImageStatus::Failed);
    assert_eq!((bad.attempts.labels, bad.retries), (3, 2));
    assert!(bad.error.as_deref().unwrap().contains("simulated failure"));
    assert!(out.detections.iter().all(|d| d.image_id != bad.image_id));
    assert_eq!((out.manifest.summary.succeeded, out.manifest.summary.failed), (4, 1));
}

#[test]
fn strict_mode_fails_the_whole_run() {
    let dir = five_images();
    let generator = Flaky::always(MockLabelGenerator::new(), ["d.jpeg".to_string()]);
    let detector = MockDetector::default();
    let providers = Providers {
        generator: &generator,
        detector: &detector,
        embedder: None,
        embeddings: None,
    };
    let opts = PipelineOptions {
        strict: true,
        ..options(4)
    };
    match run_pipeline(dir.path(), &opts, &providers, &FrozenClock) {
        Err(Error::ImageFailed { image, .. }) => assert_eq!(image, "d.jpeg"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn transient_failures_recover_with_retries() {
    let dir = five_images();
    let generator = Flaky::first_n(MockLabelGenerator::new(), ["a.jpg".to_string()], 2);
    let detector = Flaky::first_n(MockDetector::default(), ["b.png".to_string()], 1);
    let providers = Providers {
        generator: &generator,
        detector: &detector,
        embedder: None,
        embeddings: None,
    };
    let out = run_pipeline(dir.path(), &options(1), &providers, &FrozenClock).unwrap();
    let clean = run_mock(dir.path(), &options(1));
    assert_eq!(out.detections, clean.detections);
    assert_eq!(out.manifest.images["a.jpg"].attempts.labels, 3);
    assert_eq!(out.manifest.images["b.png"].attempts.detect, 2);
    assert_eq!(out.manifest.images["b.png"].retries, 1);
}

#[test]
fn empty_and_missing_inputs() {
    let empty = tempfile::tempdir().unwrap();
    let generator = MockLabelGenerator::new();
    let detector = MockDetector::default();
    let providers = Providers {
        generator: &generator,
        detector: &detector,
        embedder: None,
        embeddings: None,
    };
    let err = run_pipeline(empty.path(), &options(1), &providers, &FrozenClock).unwrap_err();
    assert!(err.to_string().contains("no images"));

    std::fs::write(empty.path().join("zero.png"), b"").unwrap();
    let out = run_pipeline(empty.path(), &options(1), &providers, &FrozenClock).unwrap();
    let rec = &out.manifest.images["zero.png"];
    assert_eq!(rec.status, ImageStatus::Failed);
    assert!(rec.error.as_deref().unwrap().contains("empty"));
}

struct RecordingDetector(Mutex<Vec<Vec<String>>>);

impl Detector for RecordingDetector {
    fn detect(&self, _: &ImageInput, labels: &[String]) -> Result<Vec<RawDetection>, ProviderError> {
        self.0.lock().unwrap().push(labels.to_vec());
        Ok(vec![])
    }
}

#[test]
fn merge_queries_the_detector_with_the_merged_vocabulary() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), &["one.jpg"]);
    let generator = MockLabelGenerator::fixed("man\ndog\nperson");
    let detector = RecordingDetector(Mutex::new(vec![]));
    let mut store = EmbeddingStore::new(2).unwrap();
    store.insert("person", vec![1.0, 0.0]).unwrap();
    store.insert("man", vec![0.95, 0.05]).unwrap();
    store.insert("dog", vec![0.0, 1.0]).unwrap();
    let providers = Providers {
        generator: &generator,
        detector: &detector,
        embedder: None,
        embeddings: Some(store),
    };
    let opts = PipelineOptions {
        merge: Some(MergeOptions {
            user_labels: vec!["person".into()],
            tau: 0.9,
        }),
        ..options(1)
    };
    let out = run_pipeline(dir.path(), &opts, &providers, &FrozenClock).unwrap();
    let rec = &out.manifest.images["one.jpg"];
    assert_eq!(rec.labels, ["man", "dog", "person"]);
    assert_eq!(rec.queried_labels, ["person", "dog"]);
    assert_eq!(rec.dropped_labels, ["man", "person"]);
    assert_eq!(*detector.0.lock().unwrap(), vec![rec.queried_labels.clone()]);
    assert_eq!(out.manifest.merge.as_ref().unwrap().user_labels, ["person"]);
}

#[test]
fn merge_with_embedder_fills_missing_vectors() {
    let dir = five_images();
    let generator = MockLabelGenerator::new();
    let detector = MockDetector::default();
    let embedder = MockEmbedder { dimension: 16 };
    let providers = Providers {
        generator: &generator,
        detector: &detector,
        embedder: Some(&embedder),
        embeddings: None,
    };
    let opts = |w| PipelineOptions {
        merge: Some(MergeOptions {
            user_labels: vec!["person".into(), "bus".into()],
            tau: 0.9,
        }),
        ..options(w)
    };
    let a = run_pipeline(dir.path(), &opts(1), &providers, &FrozenClock).unwrap();
    let b = run_pipeline(dir.path(), &opts(4), &providers, &FrozenClock).unwrap();
    assert_eq!(a, b);
    for rec in a.manifest.images.values() {
        assert_eq!(rec.status, ImageStatus::Ok, "{:?}", rec.error);
        assert_eq!(&rec.queried_labels[..2], ["person", "bus"]);
    }
}

#[test]
fn merge_without_vectors_for_user_labels_is_an_error() {
    let dir = five_images();
    let generator = MockLabelGenerator::new();
    let detector = MockDetector::default();
    let providers = Providers {
        generator: &generator,
        detector: &detector,
        embedder: None,
        embeddings: Some(EmbeddingStore::new(3).unwrap()),
    };
    let opts = PipelineOptions {
        merge: Some(MergeOptions {
            user_labels: vec!["person".into()],
            tau: 0.9,
        }),
        ..options(1)
    };
    let err = run_pipeline(dir.path(), &opts, &providers, &FrozenClock).unwrap_err();
    assert!(err.to_string().contains("person"), "{err}");
}
