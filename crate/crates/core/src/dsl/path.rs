use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("path variable '{name}' is not set")]
    Unresolved { name: String },
    #[error("unterminated path variable at byte {offset}")]
    Unterminated { offset: usize },
    #[error("invalid path variable name '{name}'")]
    InvalidName { name: String },
    #[error("value of path variable '{name}' itself contains '${{'")]
    NestedVariable { name: String },
}

/// Replace every `${NAME}` with `env[NAME]`.
///
/// A run of several `$` directly before `{` counts as one, so `$${ROOT}`
/// expands like `${ROOT}`. A `$` not followed by `{` is kept as is.
pub fn expand_path_variables(
    template: &str,
    env: &BTreeMap<String, String>,
) -> Result<String, PathError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    let mut offset = 0;
    while let Some(dollar) = rest.find('$') {
        out.push_str(&rest[..dollar]);
        let run = rest[dollar..].bytes().take_while(|&b| b == b'$').count();
        let after = &rest[dollar + run..];
        if !after.starts_with('{') {
            out.push_str(&rest[dollar..dollar + run]);
            offset += dollar + run;
            rest = after;
            continue;
        }
        let close = after.find('}').ok_or(PathError::Unterminated {
            offset: offset + dollar,
        })?;
        let name = &after[1..close];
        if !is_identifier(name) {
            return Err(PathError::InvalidName { name: name.to_owned() });
        }
        let value = env.get(name).ok_or_else(|| PathError::Unresolved {
            name: name.to_owned(),
        })?;
        if value.contains("${") {
            return Err(PathError::NestedVariable { name: name.to_owned() });
        }
        out.push_str(value);
        let consumed = dollar + run + close + 1;
        offset += consumed;
        rest = &rest[consumed..];
    }
    out.push_str(rest);
    Ok(out)
}

pub(crate) fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
