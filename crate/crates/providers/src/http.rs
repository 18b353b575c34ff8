//! Blocking HTTP clients for the three provider contracts.
//!
//! - label generator: chat-completions request with the prompt and the image
//!   as a base64 data URL; the reply text is `choices[0].message.content`.
//! - detector: `{"image": <base64>, "labels": [...]}` answered by
//!   `{"detections": [{"label", "bbox": [x, y, w, h], "score"}]}`.
//! - embedder: `{"model", "input": [...]}` answered by
//!   `{"data": [{"index", "embedding": [...]}]}`.

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use reqwest::blocking::Client;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::ProviderConfig;
use crate::error::{ProviderError, ProviderErrorKind};
use crate::provider::{Detector, Embedder, ImageInput, LabelGenerator, RawDetection};

#[derive(Debug, Clone)]
struct HttpClient {
    name: &'static str,
    config: ProviderConfig,
    client: Client,
}

impl HttpClient {
    fn new(name: &'static str, config: ProviderConfig) -> Result<Self, ProviderError> {
        config.validate()?;
        let client = Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ProviderError::new(name, ProviderErrorKind::Config, e.to_string()))?;
        Ok(HttpClient {
            name,
            config,
            client,
        })
    }

    fn post(&self, body: &Value) -> Result<String, ProviderError> {
        let mut req = self
            .client
            .post(&self.config.endpoint)
            .header("content-type", "application/json")
            .body(body.to_string());
        if let Some(token) = self.config.auth_token()? {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| self.transport(e))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| self.transport(e))?;
        if !status.is_success() {
            let excerpt: String = text.chars().take(200).collect();
            return Err(ProviderError::new(
                self.name,
                ProviderErrorKind::Status(status.as_u16()),
                format!("{} returned {status}: {excerpt}", self.config.endpoint),
            ));
        }
        Ok(text)
    }

    fn transport(&self, e: reqwest::Error) -> ProviderError {
        let kind = if e.is_timeout() {
            ProviderErrorKind::Timeout
        } else {
            ProviderErrorKind::Transport
        };
        ProviderError::new(self.name, kind, format!("{}: {e}", self.config.endpoint))
    }

    fn decode<T: for<'de> Deserialize<'de>>(&self, text: &str) -> Result<T, ProviderError> {
        serde_json::from_str(text).map_err(|e| ProviderError::schema(self.name, e, text))
    }
}

#[derive(Debug, Clone)]
pub struct HttpLabelGenerator(HttpClient);

impl HttpLabelGenerator {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        HttpClient::new("label generator", config).map(HttpLabelGenerator)
    }
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

pub fn chat_request(model: &str, image: &ImageInput, prompt: &str) -> Value {
    let url = format!("data:{};base64,{}", image.mime_type(), STANDARD.encode(&image.bytes));
    json!({
        "model": model,
        "messages": [{
            "role": "user",
            "content": [
                {"type": "text", "text": prompt},
                {"type": "image_url", "image_url": {"url": url}},
            ],
        }],
    })
}

impl LabelGenerator for HttpLabelGenerator {
    fn complete(&self, image: &ImageInput, prompt: &str) -> Result<String, ProviderError> {
        let text = self.0.post(&chat_request(&self.0.config.model, image, prompt))?;
        let reply: ChatReply = self.0.decode(&text)?;
        match reply.choices.into_iter().next() {
            Some(c) => Ok(c.message.content.unwrap_or_default()),
            None => Err(ProviderError::schema(self.0.name, "reply has no choices", &text)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpDetector(HttpClient);

impl HttpDetector {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        HttpClient::new("detector", config).map(HttpDetector)
    }
}

#[derive(Deserialize)]
struct DetectReply {
    detections: Vec<RawDetection>,
}

impl Detector for HttpDetector {
    fn detect(&self, image: &ImageInput, labels: &[String]) -> Result<Vec<RawDetection>, ProviderError> {
        let mut body = json!({
            "image": STANDARD.encode(&image.bytes),
            "labels": labels,
        });
        if !self.0.config.model.is_empty() {
            body["model"] = json!(self.0.config.model);
        }
        let text = self.0.post(&body)?;
        Ok(self.0.decode::<DetectReply>(&text)?.detections)
    }
}

#[derive(Debug, Clone)]
pub struct HttpEmbedder(HttpClient);

impl HttpEmbedder {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        HttpClient::new("embedder", config).map(HttpEmbedder)
    }
}

#[derive(Deserialize)]
struct EmbedReply {
    data: Vec<EmbedItem>,
}

#[derive(Deserialize)]
struct EmbedItem {
    index: usize,
    embedding: Vec<f64>,
}

impl Embedder for HttpEmbedder {
    fn embed(&self, labels: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let body = json!({"model": self.0.config.model, "input": labels});
        let text = self.0.post(&body)?;
        let mut items = self.0.decode::<EmbedReply>(&text)?.data;
        items.sort_by_key(|i| i.index);
        let in_order = items.iter().enumerate().all(|(i, item)| item.index == i);
        if items.len() != labels.len() || !in_order {
            return Err(ProviderError::schema(
                self.0.name,
                format!("expected indices 0..{}", labels.len()),
                &text,
            ));
        }
        Ok(items.into_iter().map(|i| i.embedding).collect())
    }
}
