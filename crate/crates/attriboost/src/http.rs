//! HTTP oracle backend speaking the OpenAI-compatible chat-completions dialect.
//!
//! Requests are built in a vendor-neutral shape ([`ChatRequest`]) and then
//! translated by [`openai_body`]; another vendor needs only another translator.

use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use attriboost_core::config::MediaMode;
use attriboost_core::oracle::{
    group_tags, BackendError, DefinitionRequest, DefinitionResponse, LabelRequest, LabelResponse,
};
use attriboost_core::{OracleBackend, OracleConfig};
use base64::Engine;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::error::{AppError, Result};

/// Environment variable holding the bearer token. Its value is never logged.
pub const API_KEY_ENV: &str = "ATTRIBOOST_API_KEY";

const MAX_RETRY_AFTER: Duration = Duration::from_secs(60);

/// One media attachment, either inlined or passed by reference.
#[derive(Debug, Clone, PartialEq)]
pub enum MediaPart {
    Inline { data_b64: String, format: String, mime: String },
    Uri(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContentPart {
    Text(String),
    Media(MediaPart),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub content: Vec<ContentPart>,
    pub schema_name: &'static str,
    pub response_schema: Value,
}

/// MIME type and short format name for a media path, by extension.
pub fn media_type(path: &str) -> (&'static str, &'static str) {
    let ext = Path::new(path)
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "wav" => ("audio/wav", "wav"),
        "mp3" => ("audio/mpeg", "mp3"),
        "flac" => ("audio/flac", "flac"),
        "ogg" | "oga" => ("audio/ogg", "ogg"),
        "m4a" => ("audio/mp4", "m4a"),
        "webm" => ("audio/webm", "webm"),
        _ => ("application/octet-stream", "bin"),
    }
}

fn media_part(media_ref: &str, mode: MediaMode) -> Result<MediaPart, BackendError> {
    match mode {
        MediaMode::Uri => Ok(MediaPart::Uri(media_ref.to_string())),
        MediaMode::Inline => {
            let path = media_ref.strip_prefix("file://").unwrap_or(media_ref);
            let bytes = std::fs::read(path).map_err(|e| BackendError::Media(format!("{media_ref}: {e}")))?;
            let (mime, format) = media_type(path);
            Ok(MediaPart::Inline {
                data_b64: base64::engine::general_purpose::STANDARD.encode(bytes),
                format: format.to_string(),
                mime: mime.to_string(),
            })
        }
    }
}

fn string_array_schema(field: &str, item: Value, n: usize) -> Value {
    json!({
        "type": "object",
        "properties": {
            field: {"type": "array", "items": item, "minItems": n, "maxItems": n}
        },
        "required": [field],
        "additionalProperties": false
    })
}

pub fn define_chat(r: &DefinitionRequest, model: &str, temperature: f64, mode: MediaMode) -> Result<ChatRequest, BackendError> {
    let mut content = vec![ContentPart::Text(r.prompt.clone())];
    for (tags, refs) in [(group_tags('A', r.group_a.len()), &r.group_a), (group_tags('B', r.group_b.len()), &r.group_b)] {
        for (tag, media_ref) in tags.into_iter().zip(refs) {
            content.push(ContentPart::Text(format!("{tag}:")));
            content.push(ContentPart::Media(media_part(media_ref, mode)?));
        }
    }
    Ok(ChatRequest {
        model: model.to_string(),
        temperature,
        content,
        schema_name: "attribute_questions",
        response_schema: string_array_schema("questions", json!({"type": "string"}), r.k),
    })
}

pub fn label_chat(r: &LabelRequest, model: &str, temperature: f64, mode: MediaMode) -> Result<ChatRequest, BackendError> {
    Ok(ChatRequest {
        model: model.to_string(),
        temperature,
        content: vec![
            ContentPart::Text(r.prompt.clone()),
            ContentPart::Media(media_part(&r.media_ref, mode)?),
        ],
        schema_name: "attribute_answers",
        response_schema: string_array_schema("answers", json!({"type": "boolean"}), r.questions.len()),
    })
}

/// Translates a neutral request into an OpenAI-compatible chat-completions body.
pub fn openai_body(chat: &ChatRequest) -> Value {
    let parts: Vec<Value> = chat
        .content
        .iter()
        .map(|p| match p {
            ContentPart::Text(t) => json!({"type": "text", "text": t}),
            ContentPart::Media(MediaPart::Inline { data_b64, format, .. }) => {
                json!({"type": "input_audio", "input_audio": {"data": data_b64, "format": format}})
            }
            ContentPart::Media(MediaPart::Uri(uri)) => json!({"type": "audio_url", "audio_url": {"url": uri}}),
        })
        .collect();
    json!({
        "model": chat.model,
        "temperature": chat.temperature,
        "messages": [{"role": "user", "content": parts}],
        "response_format": {
            "type": "json_schema",
            "json_schema": {"name": chat.schema_name, "strict": true, "schema": chat.response_schema}
        }
    })
}

/// Pulls the assistant message out of a chat-completions reply and parses it as `T`.
pub fn parse_openai_reply<T: DeserializeOwned>(body: &str) -> Result<T, BackendError> {
    let v: Value = serde_json::from_str(body).map_err(|e| BackendError::Malformed(format!("reply is not JSON: {e}")))?;
    let content = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::Malformed("reply has no choices[0].message.content".into()))?;
    let trimmed = content
        .trim()
        .trim_start_matches("```json")
        .trim_start_matches("```")
        .trim_end_matches("```")
        .trim();
    serde_json::from_str(trimmed).map_err(|e| BackendError::Malformed(format!("message content does not match the schema: {e}")))
}

/// Token bucket refilled continuously at `per_minute / 60` tokens a second.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    rate: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(per_minute: u32) -> TokenBucket {
        let rate = f64::from(per_minute) / 60.0;
        let capacity = rate.max(1.0);
        TokenBucket {
            capacity,
            rate,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Blocks until a token is available, then takes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut s = self.state.lock().unwrap_or_else(|p| p.into_inner());
                let now = Instant::now();
                s.0 = (s.0 + now.duration_since(s.1).as_secs_f64() * self.rate).min(self.capacity);
                s.1 = now;
                if s.0 >= 1.0 {
                    s.0 -= 1.0;
                    return;
                }
                (1.0 - s.0) / self.rate
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

#[derive(Debug)]
pub struct HttpBackend {
    id: String,
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    temperature: f64,
    media_mode: MediaMode,
    api_key: Option<String>,
    limiter: Option<TokenBucket>,
}

impl HttpBackend {
    pub fn new(cfg: &OracleConfig) -> Result<HttpBackend> {
        let endpoint = cfg
            .endpoint
            .clone()
            .ok_or_else(|| AppError::Config("oracle.endpoint is required for the http backend".into()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| AppError::Config(format!("http client: {e}")))?;
        Ok(HttpBackend {
            id: format!("http:{}", cfg.model_name),
            client,
            endpoint,
            model: cfg.model_name.clone(),
            temperature: cfg.temperature,
            media_mode: cfg.media_mode,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            limiter: (cfg.requests_per_minute > 0).then(|| TokenBucket::new(cfg.requests_per_minute)),
        })
    }

    fn post(&self, body: &Value) -> Result<String, BackendError> {
        if let Some(l) = &self.limiter {
            l.acquire();
        }
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout(e.without_url().to_string())
            } else {
                BackendError::Transport(e.without_url().to_string())
            }
        })?;
        let status = resp.status();
        if status.is_success() {
            return resp.text().map_err(|e| BackendError::Transport(e.without_url().to_string()));
        }
        if status.as_u16() == 429 {
            let retry_after = resp
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok());
            if let Some(secs) = retry_after {
                std::thread::sleep(Duration::from_secs(secs).min(MAX_RETRY_AFTER));
            }
        }
        let mut body = resp.text().unwrap_or_default();
        body.truncate(body.floor_char_boundary(512));
        Err(BackendError::Status {
            code: status.as_u16(),
            body,
        })
    }
}

impl OracleBackend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn define(&self, request: &DefinitionRequest) -> Result<DefinitionResponse, BackendError> {
        let chat = define_chat(request, &self.model, self.temperature, self.media_mode)?;
        parse_openai_reply(&self.post(&openai_body(&chat))?)
    }

    fn label(&self, request: &LabelRequest) -> Result<LabelResponse, BackendError> {
        let chat = label_chat(request, &self.model, self.temperature, self.media_mode)?;
        parse_openai_reply(&self.post(&openai_body(&chat))?)
    }
}
