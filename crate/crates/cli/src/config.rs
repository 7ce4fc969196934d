use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Apply the keys of a TOML config file on top of the parsed options.
/// Keys use the option names with underscores (`k_range`, `add_intercept`).
pub fn overlay<T: Serialize + DeserializeOwned>(args: &T, config: Option<&Path>) -> CliResult<T> {
    let Some(path) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(args)?)?);
    };
    let table: toml::Table = toml::from_str(&std::fs::read_to_string(path)?)?;
    let mut value = serde_json::to_value(args)?;
    let obj = value.as_object_mut().expect("options serialize to an object");
    for (key, v) in table {
        if !obj.contains_key(&key) {
            let known: Vec<&String> = obj.keys().collect();
            return Err(CliError::Usage(format!("unknown config key '{key}' (known: {known:?})")));
        }
        obj.insert(key, serde_json::to_value(v)?);
    }
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("config file: {e}")))
}
