//! Versioned JSON reports.
//!
//! Every report carries `schema`, `command`, the effective `config`, the
//! `seed` and optional wall-clock `timings`. Floating-point numbers are
//! rounded to 12 significant digits and object keys are sorted, so equal
//! inputs give byte-identical files.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::error::Result;

pub const SIGNIFICANT_DIGITS: usize = 12;

pub const ATTACK: &str = "attack-report/1";
pub const LEARN: &str = "learn-report/1";
pub const SAMPLE_SIZE: &str = "sample-size-report/1";
pub const GADGET_VERIFY: &str = "gadget-report/1";
pub const BENCH: &str = "bench-report/1";

/// Published JSON Schema documents, by schema id.
pub fn schema_document(id: &str) -> Option<&'static str> {
    Some(match id {
        ATTACK => include_str!("../schemas/attack-report-1.json"),
        LEARN => include_str!("../schemas/learn-report-1.json"),
        SAMPLE_SIZE => include_str!("../schemas/sample-size-report-1.json"),
        GADGET_VERIFY => include_str!("../schemas/gadget-report-1.json"),
        BENCH => include_str!("../schemas/bench-report-1.json"),
        _ => return None,
    })
}

pub fn schema_ids() -> [&'static str; 5] {
    [ATTACK, LEARN, SAMPLE_SIZE, GADGET_VERIFY, BENCH]
}

/// `x` rounded to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// Round every float in `v` in place. Integers are left alone.
pub fn canonicalize(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig(n.as_f64().expect("f64"), SIGNIFICANT_DIGITS);
            *n = Number::from_f64(r).unwrap_or_else(|| n.clone());
        }
        Value::Array(items) => items.iter_mut().for_each(canonicalize),
        Value::Object(map) => map.values_mut().for_each(canonicalize),
        _ => {}
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    schema: &'static str,
    command: String,
    config: Value,
    seed: Option<u64>,
    timings: Option<BTreeMap<String, f64>>,
    body: Map<String, Value>,
}

impl Report {
    pub fn new(schema: &'static str, command: impl Into<String>, config: Value, seed: Option<u64>) -> Self {
        Report { schema, command: command.into(), config, seed, timings: None, body: Map::new() }
    }

    pub fn insert(&mut self, key: &str, value: impl Serialize) -> Result<&mut Self> {
        self.body.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(self)
    }

    pub fn timing(&mut self, key: &str, seconds: f64) -> &mut Self {
        self.timings.get_or_insert_with(BTreeMap::new).insert(key.to_string(), seconds);
        self
    }

    pub fn to_value(&self) -> Value {
        let mut m = self.body.clone();
        m.insert("schema".into(), Value::String(self.schema.into()));
        m.insert("command".into(), Value::String(self.command.clone()));
        m.insert("config".into(), self.config.clone());
        m.insert("seed".into(), self.seed.map_or(Value::Null, Value::from));
        if let Some(t) = &self.timings {
            m.insert("timings".into(), serde_json::to_value(t).expect("plain map"));
        }
        let mut v = Value::Object(m);
        canonicalize(&mut v);
        v
    }

    /// Pretty JSON with a trailing newline.
    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("values serialize");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round_sig(0.1 + 0.2, 12), 0.3);
        assert_eq!(round_sig(123456789.123456789, 12), 123456789.123);
        assert_eq!(round_sig(-1.0e-20 / 3.0, 12), -3.33333333333e-21);
        assert_eq!(round_sig(0.0, 12), 0.0);
    }

    #[test]
    fn deterministic_render() {
        let mut r = Report::new(ATTACK, "attack", serde_json::json!({"delta": 0.1, "eta": 0.01}), Some(7));
        r.insert("value", 1.0 / 3.0).unwrap();
        let a = r.render();
        assert_eq!(a, r.clone().render());
        assert!(a.contains("0.333333333333"));
        assert!(!a.contains("timings"));
        assert!(a.find("\"command\"").unwrap() < a.find("\"value\"").unwrap());
    }

    #[test]
    fn schemas_are_json() {
        for id in schema_ids() {
            let doc: Value = serde_json::from_str(schema_document(id).unwrap()).unwrap();
            assert!(doc.get("$id").is_some());
        }
    }
}
