use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderErrorKind {
    /// Connection refused, reset, DNS failure.
    Transport,
    Timeout,
    /// Non-success HTTP status.
    Status(u16),
    /// The reply did not have the expected shape.
    Schema,
    /// Bad endpoint, missing credentials, invalid input.
    Config,
}

impl fmt::Display for ProviderErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderErrorKind::Transport => f.write_str("transport"),
            ProviderErrorKind::Timeout => f.write_str("timeout"),
            ProviderErrorKind::Status(code) => write!(f, "status {code}"),
            ProviderErrorKind::Schema => f.write_str("schema"),
            ProviderErrorKind::Config => f.write_str("config"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{provider} {kind} error: {message}{}", attempts_note(*attempts))]
pub struct ProviderError {
    pub provider: String,
    pub kind: ProviderErrorKind,
    pub message: String,
    /// Requests made before giving up.
    pub attempts: u32,
}

fn attempts_note(attempts: u32) -> String {
    if attempts > 1 {
        format!(" (after {attempts} attempts)")
    } else {
        String::new()
    }
}

/// Longest payload excerpt quoted in schema errors.
const EXCERPT_CHARS: usize = 200;

impl ProviderError {
    pub fn new(provider: &str, kind: ProviderErrorKind, message: impl Into<String>) -> Self {
        ProviderError {
            provider: provider.to_string(),
            kind,
            message: message.into(),
            attempts: 1,
        }
    }

    /// A schema error quoting the start of the offending payload.
    pub fn schema(provider: &str, problem: impl fmt::Display, payload: &str) -> Self {
        let excerpt: String = payload.chars().take(EXCERPT_CHARS).collect();
        let ellipsis = if payload.chars().count() > EXCERPT_CHARS {
            "..."
        } else {
            ""
        };
        ProviderError::new(
            provider,
            ProviderErrorKind::Schema,
            format!("{problem}; payload: {excerpt}{ellipsis}"),
        )
    }

    /// Whether retrying the same request may succeed.
    pub fn is_transient(&self) -> bool {
        match self.kind {
            ProviderErrorKind::Transport | ProviderErrorKind::Timeout => true,
            ProviderErrorKind::Status(code) => code == 429 || code >= 500,
            ProviderErrorKind::Schema | ProviderErrorKind::Config => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Core(#[from] owdet_core::Error),
    /// Strict mode: an image failed, so no output was written.
    #[error("image {image} failed: {message}")]
    ImageFailed { image: String, message: String },
}

impl Error {
    /// True when the failure came from a provider rather than from local inputs.
    pub fn is_provider_error(&self) -> bool {
        matches!(self, Error::Provider(_) | Error::ImageFailed { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
