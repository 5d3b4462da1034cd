//! Run configuration: defaults, overlaid by a JSON config file, overlaid
//! by command-line flags. The resolved config is written next to the
//! outputs of every run.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

pub const CONFIG_FILE: &str = "config.json";

/// `flags` is the serialized flag struct; `null` entries are flags that
/// were not given.
pub fn resolve<C>(file: Option<&Path>, flags: &impl Serialize) -> Result<C, CliError>
where
    C: Default + Serialize + DeserializeOwned,
{
    let mut merged = serde_json::to_value(C::default()).expect("config serializes");
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
        if !v.is_object() {
            return Err(CliError::Schema(format!(
                "{}: config must be a JSON object",
                path.display()
            )));
        }
        overlay(&mut merged, v);
    }
    overlay(
        &mut merged,
        serde_json::to_value(flags).expect("flags serialize"),
    );
    serde_json::from_value(merged).map_err(|e| CliError::Schema(format!("config: {e}")))
}

fn overlay(base: &mut Value, top: Value) {
    if let (Value::Object(b), Value::Object(t)) = (base, top) {
        for (k, v) in t {
            if !v.is_null() {
                b.insert(k, v);
            }
        }
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn persist(out: &Path, config: &impl Serialize) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_json(&out.join(CONFIG_FILE), config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
    struct Toy {
        horizon: usize,
        eps_u: f64,
        name: String,
    }

    #[derive(Serialize)]
    #[serde(rename_all = "kebab-case")]
    struct ToyFlags {
        horizon: Option<usize>,
        eps_u: Option<f64>,
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"horizon": 7, "name": "file"}"#).unwrap();
        let flags = ToyFlags {
            horizon: Some(9),
            eps_u: None,
        };
        let c: Toy = resolve(Some(&path), &flags).unwrap();
        assert_eq!(
            c,
            Toy {
                horizon: 9,
                eps_u: 0.0,
                name: "file".into()
            }
        );
    }

    #[test]
    fn unknown_keys_are_schema_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"horizn": 7}"#).unwrap();
        let flags = ToyFlags {
            horizon: None,
            eps_u: None,
        };
        let err = resolve::<Toy>(Some(&path), &flags).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
