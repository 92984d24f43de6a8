//! Prompt templates with `#{name}` placeholders.
//!
//! Expansion is a single pass over the template. Values are inserted
//! verbatim and never rescanned, so a variable holding LLM output that
//! happens to contain `#{...}` cannot trigger further substitution.

use std::collections::BTreeMap;
use std::ops::Range;

use thiserror::Error;

use crate::dsl::ParameterSet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unterminated placeholder at byte {offset}")]
    UnterminatedPlaceholder { offset: usize },
    #[error("invalid placeholder name '{name}' at byte {offset}")]
    InvalidPlaceholderName { offset: usize, name: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error(transparent)]
    Syntax(#[from] TemplateError),
    #[error("unresolved template parameters: {}", .names.join(", "))]
    Unresolved { names: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parameter '{name}' not found")]
pub struct NotFound {
    pub name: String,
}

/// One `#{name}` occurrence; `span` covers the whole token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placeholder<'a> {
    pub name: &'a str,
    pub span: Range<usize>,
}

/// Every placeholder occurrence in order, duplicates included.
pub fn scan(template: &str) -> Result<Vec<Placeholder<'_>>, TemplateError> {
    let mut found = Vec::new();
    let mut pos = 0;
    while let Some(rel) = template[pos..].find("#{") {
        let start = pos + rel;
        let body = start + 2;
        let close = template[body..]
            .find('}')
            .map(|c| body + c)
            .ok_or(TemplateError::UnterminatedPlaceholder { offset: start })?;
        let name = &template[body..close];
        if !crate::dsl::is_identifier(name) {
            return Err(TemplateError::InvalidPlaceholderName {
                offset: start,
                name: name.to_owned(),
            });
        }
        found.push(Placeholder {
            name,
            span: start..close + 1,
        });
        pos = close + 1;
    }
    Ok(found)
}

/// Placeholder names, deduplicated, in order of first occurrence.
pub fn extract_placeholders(template: &str) -> Result<Vec<String>, TemplateError> {
    let mut names: Vec<String> = Vec::new();
    for p in scan(template)? {
        if !names.iter().any(|n| n == p.name) {
            names.push(p.name.to_owned());
        }
    }
    Ok(names)
}

/// Replace each placeholder with its resolved value. Fails listing every
/// unresolved name when any are missing.
pub fn render_template(template: &str, scope: &ParameterScope) -> Result<String, RenderError> {
    let placeholders = scan(template)?;
    let mut missing: Vec<String> = Vec::new();
    let mut out = String::with_capacity(template.len());
    let mut last = 0;
    for p in &placeholders {
        out.push_str(&template[last..p.span.start]);
        match scope.resolve(p.name) {
            Ok(value) => out.push_str(value),
            Err(_) => {
                if !missing.iter().any(|m| m == p.name) {
                    missing.push(p.name.to_owned());
                }
            }
        }
        last = p.span.end;
    }
    if !missing.is_empty() {
        return Err(RenderError::Unresolved { names: missing });
    }
    out.push_str(&template[last..]);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerKind {
    /// Inline `literal` parameters of the node being rendered.
    NodeLiterals,
    /// Variables written by upstream nodes.
    Variables,
    /// A shared parameter file, labelled by its suffix.
    ParameterFile(String),
}

/// Layered lookup, highest precedence first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParameterScope {
    layers: Vec<(LayerKind, BTreeMap<String, String>)>,
}

impl ParameterScope {
    pub fn new() -> Self {
        Self::default()
    }

    /// Standard node scope: literals, then variables, then parameter files
    /// where later files override earlier ones.
    pub fn for_node<'a>(
        literals: impl IntoIterator<Item = (&'a str, &'a str)>,
        variables: BTreeMap<String, String>,
        parameter_files: &[(String, ParameterSet)],
    ) -> Self {
        let mut scope = ParameterScope::new();
        scope.push_layer(
            LayerKind::NodeLiterals,
            literals
                .into_iter()
                .map(|(k, v)| (k.to_owned(), v.to_owned()))
                .collect(),
        );
        scope.push_layer(LayerKind::Variables, variables);
        for (suffix, set) in parameter_files.iter().rev() {
            scope.push_layer(LayerKind::ParameterFile(suffix.clone()), set.as_map().clone());
        }
        scope
    }

    /// Add a layer below all existing ones.
    pub fn push_layer(&mut self, kind: LayerKind, values: BTreeMap<String, String>) {
        self.layers.push((kind, values));
    }

    pub fn resolve(&self, name: &str) -> Result<&str, NotFound> {
        self.resolve_with_layer(name)
            .map(|(_, v)| v)
            .ok_or_else(|| NotFound { name: name.to_owned() })
    }

    /// The winning value together with the layer it came from.
    pub fn resolve_with_layer(&self, name: &str) -> Option<(&LayerKind, &str)> {
        self.layers
            .iter()
            .find_map(|(kind, values)| values.get(name).map(|v| (kind, v.as_str())))
    }
}
