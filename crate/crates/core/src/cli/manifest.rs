use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

/// Keys holding elapsed time; the only fields allowed to differ between
/// two runs with the same manifest.
pub const TIMING_KEYS: &[&str] = &["wall_time_seconds", "runtime_seconds"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: BTreeMap<String, Value>,
    pub master_seed: Option<u64>,
    pub outputs: Vec<String>,
    pub toolkit_version: &'static str,
    pub wall_time_seconds: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            parameters: BTreeMap::new(),
            master_seed: None,
            outputs: Vec::new(),
            toolkit_version: env!("CARGO_PKG_VERSION"),
            wall_time_seconds: 0.0,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("parameter serialises");
        self.parameters.insert(key.to_string(), v);
    }
}

/// Removes every timing field, recursively.
pub fn strip_timing(value: &mut Value) {
    match value {
        Value::Object(map) => {
            for key in TIMING_KEYS {
                map.remove(*key);
            }
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_nested_timing() {
        let mut v = serde_json::json!({
            "wall_time_seconds": 1.0,
            "a": [{"runtime_seconds": 2.0, "x": 3}],
            "b": {"runtime_seconds": 4.0, "y": 5}
        });
        strip_timing(&mut v);
        assert_eq!(v, serde_json::json!({"a": [{"x": 3}], "b": {"y": 5}}));
    }
}
