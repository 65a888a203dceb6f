use serde::Deserialize;

use super::compile::ResidualSystem;
use crate::model::ModelError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearDoc {
    variables: Vec<String>,
    equations: Vec<EquationDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EquationDoc {
    id: String,
    coefficients: Vec<f64>,
    rhs: f64,
}

/// Parses a plain linear system
/// `{"variables": [..], "equations": [{"id", "coefficients", "rhs"}]}`
/// into residuals `a·x − b`.
pub fn parse_linear_system(s: &str) -> Result<ResidualSystem, ModelError> {
    let doc: LinearDoc = serde_json::from_str(s).map_err(|e| ModelError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let n = doc.variables.len();
    for eq in &doc.equations {
        if eq.coefficients.len() != n {
            return Err(ModelError::Invalid(format!(
                "{}: expected {} coefficients, found {}",
                eq.id,
                n,
                eq.coefficients.len()
            )));
        }
        if eq.coefficients.iter().chain([&eq.rhs]).any(|v| !v.is_finite()) {
            return Err(ModelError::Invalid(format!("{}: non-finite value", eq.id)));
        }
    }
    let names: Vec<&str> = doc.variables.iter().map(String::as_str).collect();
    let labels: Vec<&str> = doc.equations.iter().map(|e| e.id.as_str()).collect();
    let coefficients: Vec<Vec<f64>> = doc.equations.iter().map(|e| e.coefficients.clone()).collect();
    let rhs: Vec<f64> = doc.equations.iter().map(|e| e.rhs).collect();
    Ok(ResidualSystem::linear(&names, &labels, &coefficients, &rhs))
}

/// Whether a JSON document looks like a linear system rather than a model.
pub fn is_linear_system(s: &str) -> bool {
    serde_json::from_str::<serde_json::Value>(s)
        .map(|v| v.get("equations").is_some() && v.get("variables").is_some())
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::eval_residuals;

    #[test]
    fn parses_and_evaluates() {
        let s =
            parse_linear_system(r#"{"variables":["x","y"],"equations":[{"id":"E1","coefficients":[1,2],"rhs":3}]}"#)
                .unwrap();
        assert_eq!(eval_residuals(&s, &[1.0, 1.0]).unwrap(), vec![0.0]);
        assert_eq!(s.residuals[0].label, "E1");
    }

    #[test]
    fn rejects_wrong_arity() {
        let err = parse_linear_system(r#"{"variables":["x"],"equations":[{"id":"E1","coefficients":[1,2],"rhs":3}]}"#);
        assert!(matches!(err, Err(ModelError::Invalid(_))));
    }
}
