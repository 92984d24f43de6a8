use std::collections::BTreeMap;

use thiserror::Error;

use crate::dsl::{Combinator, Condition, ForwardPath, Operator};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("condition reads variable '{name}', which has no value")]
    MissingVariable { name: String },
}

/// Trim ASCII whitespace, drop one trailing `.`, lowercase.
pub fn normalize_answer(s: &str) -> String {
    let trimmed = s.trim_matches(|c: char| c.is_ascii_whitespace());
    let trimmed = trimmed.strip_suffix('.').unwrap_or(trimmed);
    trimmed.to_lowercase()
}

pub fn compare(operator: Operator, value: &str, operand: &str) -> bool {
    let (v, o) = (normalize_answer(value), normalize_answer(operand));
    match operator {
        Operator::Equal => v == o,
        Operator::NotEqual => v != o,
        Operator::Contains => v.contains(&o),
    }
}

/// Evaluate `condition` against `variables`. Composed conditions stop at
/// the first child that decides the result, so a missing variable in a
/// later child goes unnoticed.
pub fn evaluate_condition(
    condition: &Condition,
    variables: &BTreeMap<String, String>,
) -> Result<bool, EvalError> {
    match condition {
        Condition::Compare {
            variable,
            operator,
            operand,
        } => {
            let value = variables.get(variable).ok_or_else(|| EvalError::MissingVariable {
                name: variable.clone(),
            })?;
            Ok(compare(*operator, value, operand))
        }
        Condition::Composed {
            combinator,
            children,
        } => {
            let decisive = match combinator {
                Combinator::All => false,
                Combinator::Any => true,
            };
            for child in children {
                if evaluate_condition(child, variables)? == decisive {
                    return Ok(decisive);
                }
            }
            Ok(!decisive)
        }
    }
}

/// Targets of the first path whose `condition_result` equals `result`.
pub fn select_forward_paths(result: bool, paths: &[ForwardPath]) -> Vec<String> {
    paths
        .iter()
        .find(|p| p.condition_result == result)
        .map(|p| p.next_nodes.clone())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_workflow, Routing};
    use crate::example;

    fn vars(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    fn cmp(variable: &str, operator: Operator, operand: &str) -> Condition {
        Condition::Compare {
            variable: variable.into(),
            operator,
            operand: operand.into(),
        }
    }

    fn ads_paths() -> Vec<ForwardPath> {
        let spec = parse_workflow(example::ADS_WORKFLOW).unwrap();
        match &spec.node("determine_data_feature").unwrap().routing {
            Routing::Conditional { forward_paths, .. } => forward_paths.clone(),
            Routing::Static { .. } => unreachable!(),
        }
    }

    #[test]
    fn ads_condition() {
        let c = cmp("is_quantitative_data", Operator::Equal, "yes");
        assert!(evaluate_condition(&c, &vars(&[("is_quantitative_data", "yes")])).unwrap());
        assert!(!evaluate_condition(&c, &vars(&[("is_quantitative_data", "no")])).unwrap());
    }

    #[test]
    fn empty_string_equals_itself() {
        let c = cmp("x", Operator::Equal, "");
        assert!(evaluate_condition(&c, &vars(&[("x", "")])).unwrap());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_answer("  YES \n"), "yes");
        assert_eq!(normalize_answer("Yes."), "yes");
        assert_eq!(normalize_answer("yes.."), "yes.");
        assert_eq!(normalize_answer("."), "");
    }

    #[test]
    fn missing_variable_is_named() {
        let c = cmp("gone", Operator::Equal, "yes");
        assert_eq!(
            evaluate_condition(&c, &BTreeMap::new()),
            Err(EvalError::MissingVariable { name: "gone".into() })
        );
    }

    #[test]
    fn composed_short_circuits() {
        let store = vars(&[("a", "yes")]);
        let any = Condition::Composed {
            combinator: Combinator::Any,
            children: vec![cmp("a", Operator::Equal, "yes"), cmp("missing", Operator::Equal, "x")],
        };
        assert!(evaluate_condition(&any, &store).unwrap());
        let all = Condition::Composed {
            combinator: Combinator::All,
            children: vec![cmp("a", Operator::Equal, "no"), cmp("missing", Operator::Equal, "x")],
        };
        assert!(!evaluate_condition(&all, &store).unwrap());
        let all_reaching_missing = Condition::Composed {
            combinator: Combinator::All,
            children: vec![cmp("a", Operator::Equal, "yes"), cmp("missing", Operator::Equal, "x")],
        };
        assert!(evaluate_condition(&all_reaching_missing, &store).is_err());
    }

    #[test]
    fn forward_path_selection() {
        let paths = ads_paths();
        assert_eq!(select_forward_paths(true, &paths), ["data_trend_miner"]);
        assert_eq!(
            select_forward_paths(false, &paths),
            ["qualitative_analysis_1", "qualitative_analysis_2"]
        );
        let empty_true = vec![
            ForwardPath {
                condition_result: true,
                next_nodes: vec![],
            },
            ForwardPath {
                condition_result: false,
                next_nodes: vec!["x".into()],
            },
        ];
        assert!(select_forward_paths(true, &empty_true).is_empty());
    }
}
