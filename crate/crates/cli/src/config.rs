//! Flag/config-file merging and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::UsageError;

/// Parameters for `command`: values from the config file, overridden by
/// every flag that was actually given. A config file may hold one object
/// per subcommand (`{"qec-sim": {...}}`) or a flat object; manifests written
/// by earlier runs are accepted as-is.
pub fn resolve<T: Serialize + DeserializeOwned>(command: &str, flags: &T, file: Option<&Path>) -> anyhow::Result<T> {
    let mut base = match file {
        Some(path) => section(command, load(path)?)?,
        None => Map::new(),
    };
    let Value::Object(given) = serde_json::to_value(flags)? else {
        unreachable!("argument structs serialize to objects")
    };
    for (k, v) in given {
        let unset = v.is_null() || v.as_array().is_some_and(|a| a.is_empty());
        if !unset {
            base.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| UsageError(format!("config for {command}: {e}")).into())
}

fn load(path: &Path) -> anyhow::Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())).into())
}

fn section(command: &str, v: Value) -> anyhow::Result<Map<String, Value>> {
    let Value::Object(mut obj) = v else {
        bail!(UsageError("config file must hold a JSON object".into()));
    };
    match obj.remove(command) {
        Some(Value::Object(inner)) => Ok(inner),
        Some(_) => bail!(UsageError(format!("config entry '{command}' must be an object"))),
        None => {
            obj.remove("sqfock_version");
            obj.remove("command");
            obj.remove("outputs");
            Ok(obj)
        }
    }
}

/// Manifest echoing every resolved parameter of a run.
pub fn manifest<T: Serialize>(command: &str, params: &T, outputs: &[PathBuf], extra: Value) -> anyhow::Result<Value> {
    let mut m = json!({
        "sqfock_version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    m[command] = serde_json::to_value(params)?;
    if let Value::Object(e) = extra {
        for (k, v) in e {
            m[k] = v;
        }
    }
    Ok(m)
}

/// Writes the manifest to `<first output>.manifest.json`.
pub fn write_manifest(m: &Value, outputs: &[PathBuf]) -> anyhow::Result<PathBuf> {
    let first = outputs.first().context("manifest needs an output file")?;
    let mut path = first.clone().into_os_string();
    path.push(".manifest.json");
    let path = PathBuf::from(path);
    fs::write(&path, serde_json::to_string_pretty(m)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
