//! The language-model seam.
//!
//! The engine talks to models only through [`LlmBackend`]. Three
//! implementations ship with the crate:
//!
//! - [`MockBackend`]: answers from a [`MockScript`]; deterministic.
//! - [`ReplayBackend`]: answers from a recorded [`Cassette`]; deterministic.
//! - [`OpenAiCompatibleBackend`]: POSTs to `{base}/chat/completions`.
//!
//! [`record_and_wrap`] turns any backend into one that also appends every
//! call to a cassette file.

mod cassette;
mod mock;
mod openai;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cassette::{prompt_digest, record_and_wrap, Cassette, CassetteEntry, CassetteError, RecordingBackend, ReplayBackend};
pub use mock::{Matcher, MockBackend, MockRule, MockScript, MockScriptError};
pub use openai::{OpenAiCompatibleBackend, RetryPolicy, API_BASE_ENV, API_KEY_ENV};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSettings {
    pub model: String,
    /// In `[0, 2]`. Defaults to 0 so runs are as repeatable as the model allows.
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        GenerationSettings {
            model: "gpt-4o-mini".to_owned(),
            temperature: 0.0,
            max_tokens: 1024,
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SettingsError {
    #[error("temperature {0} is outside [0, 2]")]
    Temperature(f64),
    #[error("max_tokens must be positive")]
    MaxTokens,
    #[error("timeout must be positive")]
    Timeout,
    #[error("model name is empty")]
    Model,
}

impl GenerationSettings {
    pub fn validate(&self) -> Result<(), SettingsError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(SettingsError::Temperature(self.temperature));
        }
        if self.max_tokens == 0 {
            return Err(SettingsError::MaxTokens);
        }
        if self.timeout_secs == 0 {
            return Err(SettingsError::Timeout);
        }
        if self.model.is_empty() {
            return Err(SettingsError::Model);
        }
        Ok(())
    }
}

/// One prompt, plus the id of the node that produced it.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub node_id: &'a str,
    pub prompt: &'a str,
    pub settings: &'a GenerationSettings,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendError {
    #[error("request timed out: {message}")]
    Timeout { message: String },
    #[error("rate limited: {message}")]
    RateLimited { message: String },
    #[error("HTTP status {code}: {message}")]
    HttpStatus { code: u16, message: String },
    #[error("no rule matched: {message}")]
    NoRuleMatched { message: String },
    #[error("malformed response: {message}")]
    MalformedResponse { message: String },
    #[error("backend unavailable: {message}")]
    Unavailable { message: String },
}

impl BackendError {
    /// Worth retrying: timeouts, rate limits, server errors, connection
    /// failures.
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::Timeout { .. }
            | BackendError::RateLimited { .. }
            | BackendError::Unavailable { .. } => true,
            BackendError::HttpStatus { code, .. } => *code >= 500 || *code == 408,
            BackendError::NoRuleMatched { .. } | BackendError::MalformedResponse { .. } => false,
        }
    }
}

/// Text completion. Implementations must tolerate concurrent calls.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError>;
}

impl<B: LlmBackend + ?Sized> LlmBackend for &B {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for Arc<B> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settings_validation() {
        assert!(GenerationSettings::default().validate().is_ok());
        let hot = GenerationSettings {
            temperature: 2.5,
            ..Default::default()
        };
        assert_eq!(hot.validate(), Err(SettingsError::Temperature(2.5)));
        let none = GenerationSettings {
            max_tokens: 0,
            ..Default::default()
        };
        assert_eq!(none.validate(), Err(SettingsError::MaxTokens));
    }

    #[test]
    fn transient_classification() {
        let status = |code| BackendError::HttpStatus {
            code,
            message: String::new(),
        };
        assert!(status(503).is_transient());
        assert!(!status(400).is_transient());
        assert!(BackendError::RateLimited { message: String::new() }.is_transient());
        assert!(!BackendError::NoRuleMatched { message: String::new() }.is_transient());
    }

    #[test]
    fn error_serializes_with_kind_tag() {
        let e = BackendError::HttpStatus {
            code: 500,
            message: "boom".into(),
        };
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, r#"{"kind":"http_status","code":500,"message":"boom"}"#);
        assert_eq!(serde_json::from_str::<BackendError>(&json).unwrap(), e);
    }
}
