//! Structural validation of reports against `docs/report-schema.json`.
//!
//! Supports the JSON Schema keywords that document uses: `type`, `const`,
//! `enum`, `properties`, `required`, `additionalProperties` (boolean),
//! `items`, `minItems`, `maxItems`, `minimum`, `exclusiveMinimum` and local
//! `$ref`s into `$defs`.

use std::sync::OnceLock;

use serde_json::Value;

use super::StabilityError;

/// The published schema document.
pub const REPORT_SCHEMA_JSON: &str = include_str!("../../../../docs/report-schema.json");

pub fn report_schema() -> &'static Value {
    static SCHEMA: OnceLock<Value> = OnceLock::new();
    SCHEMA.get_or_init(|| serde_json::from_str(REPORT_SCHEMA_JSON).expect("bundled schema is valid JSON"))
}

/// Validate a report document; the error names the first offending path.
pub fn validate_report(doc: &Value) -> Result<(), StabilityError> {
    let root = report_schema();
    check(root, root, doc, "$").map_err(StabilityError::Schema)
}

fn type_matches(name: &str, v: &Value) -> bool {
    match name {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64() || v.as_f64().is_some_and(|f| f.fract() == 0.0),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        _ => false,
    }
}

fn check(root: &Value, schema: &Value, v: &Value, path: &str) -> Result<(), String> {
    let Some(s) = schema.as_object() else { return Ok(()) };
    if let Some(r) = s.get("$ref").and_then(Value::as_str) {
        let target = r
            .strip_prefix("#/")
            .and_then(|p| p.split('/').try_fold(root, |node, key| node.get(key)))
            .ok_or_else(|| format!("unresolvable $ref {r}"))?;
        check(root, target, v, path)?;
    }
    if let Some(t) = s.get("type") {
        let ok = match t {
            Value::String(name) => type_matches(name, v),
            Value::Array(names) => names.iter().filter_map(Value::as_str).any(|n| type_matches(n, v)),
            _ => true,
        };
        if !ok {
            return Err(format!("{path}: expected type {t}, got {v}"));
        }
    }
    if let Some(c) = s.get("const") {
        if c != v {
            return Err(format!("{path}: expected {c}, got {v}"));
        }
    }
    if let Some(options) = s.get("enum").and_then(Value::as_array) {
        if !options.contains(v) {
            return Err(format!("{path}: {v} is not one of {}", Value::Array(options.clone())));
        }
    }
    if let Some(x) = v.as_f64() {
        if let Some(min) = s.get("minimum").and_then(Value::as_f64) {
            if x < min {
                return Err(format!("{path}: {x} < minimum {min}"));
            }
        }
        if let Some(min) = s.get("exclusiveMinimum").and_then(Value::as_f64) {
            if x <= min {
                return Err(format!("{path}: {x} must exceed {min}"));
            }
        }
    }
    if let Some(obj) = v.as_object() {
        let props = s.get("properties").and_then(Value::as_object);
        if let Some(required) = s.get("required").and_then(Value::as_array) {
            for key in required.iter().filter_map(Value::as_str) {
                if !obj.contains_key(key) {
                    return Err(format!("{path}: missing required property {key:?}"));
                }
            }
        }
        for (key, value) in obj {
            match props.and_then(|p| p.get(key)) {
                Some(sub) => check(root, sub, value, &format!("{path}.{key}"))?,
                None if s.get("additionalProperties") == Some(&Value::Bool(false)) => {
                    return Err(format!("{path}: unexpected property {key:?}"));
                }
                None => {}
            }
        }
    }
    if let Some(items) = v.as_array() {
        if let Some(min) = s.get("minItems").and_then(Value::as_u64) {
            if (items.len() as u64) < min {
                return Err(format!("{path}: needs at least {min} items, has {}", items.len()));
            }
        }
        if let Some(max) = s.get("maxItems").and_then(Value::as_u64) {
            if items.len() as u64 > max {
                return Err(format!("{path}: allows at most {max} items, has {}", items.len()));
            }
        }
        if let Some(sub) = s.get("items") {
            for (i, item) in items.iter().enumerate() {
                check(root, sub, item, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}
