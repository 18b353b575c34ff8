use std::time::Duration;

use crate::error::{ProviderError, ProviderErrorKind};

pub const DEFAULT_PROMPT: &str = "List the objects that you see in this image.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Result<Self, ProviderError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ProviderError::new(
                "prompt",
                ProviderErrorKind::Config,
                "prompt must not be empty",
            ));
        }
        Ok(PromptTemplate { text })
    }

    /// Appends a granularity directive such as "Use coarse categories.".
    pub fn with_directive(&self, directive: &str) -> Self {
        let directive = directive.trim();
        if directive.is_empty() {
            return self.clone();
        }
        PromptTemplate {
            text: format!("{} {}", self.text.trim_end(), directive),
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            text: DEFAULT_PROMPT.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderConfig {
    pub endpoint: String,
    pub model: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub max_parallel: usize,
    /// Environment variable holding a bearer token, if the provider needs one.
    pub auth_env: Option<String>,
}

impl ProviderConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        ProviderConfig {
            endpoint: endpoint.into(),
            model: String::new(),
            timeout: Duration::from_secs(60),
            max_retries: 3,
            max_parallel: 4,
            auth_env: None,
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        let bad = |m: &str| Err(ProviderError::new(&self.endpoint, ProviderErrorKind::Config, m));
        if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            return bad("endpoint must be an http(s) URL");
        }
        if self.timeout.is_zero() {
            return bad("timeout must be positive");
        }
        if self.max_parallel == 0 {
            return bad("parallelism must be at least 1");
        }
        Ok(())
    }

    /// Reads the token named by `auth_env`. A configured but unset variable is an error.
    pub fn auth_token(&self) -> Result<Option<String>, ProviderError> {
        match &self.auth_env {
            None => Ok(None),
            Some(var) => std::env::var(var).map(Some).map_err(|_| {
                ProviderError::new(
                    &self.endpoint,
                    ProviderErrorKind::Config,
                    format!("environment variable {var} is not set"),
                )
            }),
        }
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            ..RetryPolicy::default()
        }
    }
}

/// Exponential backoff: retry `k` (1-based) waits `base * 2^(k-1)`, capped at
/// `max_delay`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_retries: u32) -> Self {
        RetryPolicy {
            max_retries,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    pub fn delay_before(&self, retry: u32) -> Duration {
        let factor = 2u32.saturating_pow(retry.saturating_sub(1));
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }

    /// Runs `call` until it succeeds, fails permanently or retries run out.
    /// Returns the outcome and the number of attempts made.
    pub fn run<T>(
        &self,
        mut call: impl FnMut() -> Result<T, ProviderError>,
    ) -> (Result<T, ProviderError>, u32) {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match call() {
                Ok(v) => return (Ok(v), attempts),
                Err(e) if e.is_transient() && attempts <= self.max_retries => {
                    let wait = self.delay_before(attempts);
                    if !wait.is_zero() {
                        std::thread::sleep(wait);
                    }
                }
                Err(mut e) => {
                    e.attempts = attempts;
                    return (Err(e), attempts);
                }
            }
        }
    }
}
