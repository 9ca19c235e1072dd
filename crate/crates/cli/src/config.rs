//! Flag / config-file / default resolution.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Values from an optional JSON config file, with every key accounted for.
pub struct Resolver {
    file: Map<String, Value>,
    echo: Map<String, Value>,
}

impl Resolver {
    pub fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self> {
        let file = match path {
            None => Map::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                match serde_json::from_str::<Value>(&text).map_err(|e| crate::Invalid(format!("config {}: {e}", p.display())))? {
                    Value::Object(m) => m,
                    _ => bail!(crate::Invalid("config file must hold a JSON object".into())),
                }
            }
        };
        for k in file.keys() {
            if !allowed.contains(&k.as_str()) {
                bail!(crate::Invalid(format!("unknown config key {k:?}")));
            }
        }
        Ok(Resolver { file, echo: Map::new() })
    }

    /// Flag, else config file, else `default`.
    pub fn get<T: DeserializeOwned + Serialize + Clone>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let v = self.get_opt(key, flag)?.unwrap_or(default);
        self.echo.insert(key.into(), serde_json::to_value(&v)?);
        Ok(v)
    }

    pub fn get_opt<T: DeserializeOwned + Serialize + Clone>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let v = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(raw) => Some(
                    serde_json::from_value(raw.clone()).map_err(|e| crate::Invalid(format!("config key {key:?}: {e}")))?,
                ),
                None => None,
            },
        };
        self.echo.insert(key.into(), serde_json::to_value(&v)?);
        Ok(v)
    }

    /// The effective configuration, for the report.
    pub fn echo(&self) -> Value {
        Value::Object(self.echo.clone())
    }
}
