use std::env;
use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{BackendError, CompletionRequest, LlmBackend};

pub const API_BASE_ENV: &str = "GF_API_BASE";
pub const API_KEY_ENV: &str = "GF_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Delay before the first retry; doubles each time.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

/// Client for any server speaking the OpenAI chat-completions protocol.
#[derive(Debug, Clone)]
pub struct OpenAiCompatibleBackend {
    base_url: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    client: Client,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

impl OpenAiCompatibleBackend {
    pub fn new(base_url: &str, api_key: Option<String>) -> Result<Self, BackendError> {
        let client = Client::builder().build().map_err(|e| BackendError::Unavailable {
            message: format!("failed to build HTTP client: {e}"),
        })?;
        Ok(OpenAiCompatibleBackend {
            base_url: base_url.trim_end_matches('/').to_owned(),
            api_key,
            retry: RetryPolicy::default(),
            client,
        })
    }

    /// Base URL from `GF_API_BASE`, bearer token from `GF_API_KEY` if set.
    pub fn from_env() -> Result<Self, BackendError> {
        let base = env::var(API_BASE_ENV).map_err(|_| BackendError::Unavailable {
            message: format!("{API_BASE_ENV} is not set"),
        })?;
        Self::new(&base, env::var(API_KEY_ENV).ok())
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn attempt(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let body = ChatRequest {
            model: &request.settings.model,
            messages: [ChatMessage {
                role: "user",
                content: request.prompt,
            }],
            temperature: request.settings.temperature,
            max_tokens: request.settings.max_tokens,
        };
        let mut http = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .timeout(Duration::from_secs(request.settings.timeout_secs))
            .json(&body);
        if let Some(key) = &self.api_key {
            http = http.bearer_auth(key);
        }
        let response = http.send().map_err(classify_transport)?;
        let status = response.status();
        let text = response.text().map_err(classify_transport)?;
        if status == StatusCode::TOO_MANY_REQUESTS {
            return Err(BackendError::RateLimited { message: truncate(&text) });
        }
        if !status.is_success() {
            return Err(BackendError::HttpStatus {
                code: status.as_u16(),
                message: truncate(&text),
            });
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::MalformedResponse {
                message: e.to_string(),
            })?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::MalformedResponse {
                message: "response has no choices[0].message.content".into(),
            })
    }
}

impl LlmBackend for OpenAiCompatibleBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let mut delay = self.retry.base_delay;
        let mut retries = 0;
        loop {
            match self.attempt(request) {
                Err(e) if e.is_transient() && retries < self.retry.max_retries => {
                    thread::sleep(delay);
                    delay *= 2;
                    retries += 1;
                }
                other => return other,
            }
        }
    }
}

fn classify_transport(e: reqwest::Error) -> BackendError {
    if e.is_timeout() {
        BackendError::Timeout { message: e.to_string() }
    } else if e.is_decode() {
        BackendError::MalformedResponse { message: e.to_string() }
    } else {
        BackendError::Unavailable { message: e.to_string() }
    }
}

fn truncate(body: &str) -> String {
    const LIMIT: usize = 512;
    match body.char_indices().nth(LIMIT) {
        Some((i, _)) => format!("{}...", &body[..i]),
        None => body.to_owned(),
    }
}
