//! Provider interfaces (label generator, detector, embedder) with HTTP
//! clients and deterministic mocks, plus the per-image pipeline that
//! chains them.

pub mod config;
pub mod error;
pub mod http;
pub mod mock;
pub mod parse;
pub mod pipeline;
pub mod provider;

pub use config::{PromptTemplate, ProviderConfig, RetryPolicy, DEFAULT_PROMPT};
pub use error::{Error, ProviderError, ProviderErrorKind, Result};
pub use http::{HttpDetector, HttpEmbedder, HttpLabelGenerator};
pub use mock::{Flaky, MockDetector, MockEmbedder, MockLabelGenerator, MOVING_VEHICLES_PROMPT};
pub use parse::{parse_label_reply, ParsedReply};
pub use pipeline::{
    list_images, run_pipeline, Clock, FrozenClock, ImageRecord, ImageStatus, Manifest,
    MergeOptions, PipelineOptions, PipelineOutput, Providers, SystemClock,
};
pub use provider::{
    detect, embed_labels, embed_missing, generate_labels, Detector, Embedder, ImageInput,
    LabelGenerator, Outcome, RawDetection,
};
