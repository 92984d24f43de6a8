use serde_json::Value;
use thiserror::Error;

use super::{BackendError, CompletionRequest, LlmBackend};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Matcher {
    NodeId(String),
    PromptContains(String),
}

impl Matcher {
    fn matches(&self, request: &CompletionRequest<'_>) -> bool {
        match self {
            Matcher::NodeId(id) => request.node_id == id,
            Matcher::PromptContains(needle) => request.prompt.contains(needle.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockRule {
    pub matcher: Matcher,
    pub response: String,
}

/// Ordered rules; the first match answers. Without a match the default
/// response is used, and without a default the call fails.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
    pub default_response: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MockScriptError {
    #[error("mock script is not valid JSON: {0}")]
    Json(String),
    #[error("mock script must be a JSON object mapping node ids to responses")]
    NotAnObject,
    #[error("mock response for '{0}' must be a string")]
    NonString(String),
}

impl MockScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_node(mut self, node_id: impl Into<String>, response: impl Into<String>) -> Self {
        self.rules.push(MockRule {
            matcher: Matcher::NodeId(node_id.into()),
            response: response.into(),
        });
        self
    }

    pub fn with_prompt_containing(
        mut self,
        needle: impl Into<String>,
        response: impl Into<String>,
    ) -> Self {
        self.rules.push(MockRule {
            matcher: Matcher::PromptContains(needle.into()),
            response: response.into(),
        });
        self
    }

    pub fn with_default(mut self, response: impl Into<String>) -> Self {
        self.default_response = Some(response.into());
        self
    }

    /// Script file format: `{"node_id": "response", ...}`. The key `"*"`
    /// sets the default response.
    pub fn from_json(text: &str) -> Result<Self, MockScriptError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| MockScriptError::Json(e.to_string()))?;
        let Value::Object(map) = value else {
            return Err(MockScriptError::NotAnObject);
        };
        let mut script = MockScript::new();
        for (key, value) in map {
            let Value::String(response) = value else {
                return Err(MockScriptError::NonString(key));
            };
            if key == "*" {
                script.default_response = Some(response);
            } else {
                script = script.with_node(key, response);
            }
        }
        Ok(script)
    }

    pub fn respond(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        self.rules
            .iter()
            .find(|rule| rule.matcher.matches(request))
            .map(|rule| rule.response.clone())
            .or_else(|| self.default_response.clone())
            .ok_or_else(|| BackendError::NoRuleMatched {
                message: format!("no mock rule for node '{}'", request.node_id),
            })
    }
}

#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    script: MockScript,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend { script }
    }
}

impl LlmBackend for MockBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        self.script.respond(request)
    }
}
