use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::report::Failure;

/// Values from a `--config` JSON object. Keys are long flag names; `-` and `_`
/// are interchangeable.
#[derive(Debug, Default)]
pub struct FileConfig {
    map: Map<String, Value>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        match serde_json::from_str::<Value>(&text) {
            Ok(Value::Object(map)) => Ok(Self { map }),
            Ok(_) => Err(Failure::usage("config file must hold a JSON object")),
            Err(e) => Err(Failure::usage(format!("config file {} is not valid JSON: {e}", path.display()))),
        }
    }

    fn raw(&self, key: &str) -> Option<&Value> {
        self.map
            .get(key)
            .or_else(|| self.map.get(&key.replace('-', "_")))
            .or_else(|| self.map.get(&key.replace('_', "-")))
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>, Failure> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| Failure::usage(format!("config key `{key}`: {e}"))),
        }
    }

    /// The command-line value if given, else the config value under any of `keys`.
    pub fn pick<T: DeserializeOwned>(&self, flag: Option<T>, keys: &[&str]) -> Result<Option<T>, Failure> {
        if flag.is_some() {
            return Ok(flag);
        }
        for key in keys {
            if let Some(v) = self.get(key)? {
                return Ok(Some(v));
            }
        }
        Ok(None)
    }
}
