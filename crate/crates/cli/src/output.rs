use std::fmt::Write as _;

use persuade_core::{to_dot, Instance, MechanismTree};
use serde_json::Value;

use crate::{CliError, Format, EXIT_OK};

/// What a command produced, before formatting.
pub(crate) struct Output {
    pub json: Value,
    /// Mechanism to draw under `--format dot`.
    pub tree: Option<(MechanismTree, Instance)>,
    pub code: i32,
    pub diagnostic: Option<String>,
}

impl Output {
    pub fn json(json: Value) -> Self {
        Self {
            json,
            tree: None,
            code: EXIT_OK,
            diagnostic: None,
        }
    }

    pub fn with_tree(mut self, tree: MechanismTree, inst: Instance) -> Self {
        self.tree = Some((tree, inst));
        self
    }
}

/// Rounds to 12 significant digits; non-finite values pass through.
pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let r: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    // Avoid printing "-0.0".
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn round_json(v: &Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| serde_json::Number::from_f64(round_significant(x)))
            .map_or(Value::Null, Value::Number),
        Value::Array(a) => Value::Array(a.iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.iter().map(|(k, v)| (k.clone(), round_json(v))).collect()),
        other => other.clone(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(o) => {
            for (k, child) in o {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        Value::Array(a) if a.iter().any(|x| x.is_object() || x.is_array()) => {
            for (i, child) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), child, out);
            }
        }
        leaf => {
            let _ = writeln!(out, "{prefix} = {leaf}");
        }
    }
}

pub(crate) fn render(o: &Output, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&round_json(&o.json))
                .map_err(|e| CliError::Usage(format!("cannot serialize output: {e}")))?;
            s.push('\n');
            Ok(s)
        }
        Format::Text => {
            let mut s = String::new();
            flatten("", &round_json(&o.json), &mut s);
            Ok(s)
        }
        Format::Dot => match &o.tree {
            Some((tree, inst)) => Ok(to_dot(tree, Some(inst))),
            None => Err(CliError::Usage("--format dot needs a command that yields a mechanism".into())),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(round_significant(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_significant(2.0 / 3.0), 0.666666666667);
        assert_eq!(round_significant(0.9999999999999), 1.0);
        assert_eq!(round_significant(-1e-17), -1e-17);
        assert_eq!(round_significant(0.0), 0.0);
        assert!(round_significant(f64::NAN).is_nan());
    }

    #[test]
    fn text_flattens_nested_values() {
        let mut s = String::new();
        flatten("", &serde_json::json!({"a": {"b": 1.5}, "c": [1, 2]}), &mut s);
        assert_eq!(s, "a.b = 1.5\nc = [1,2]\n");
    }
}
