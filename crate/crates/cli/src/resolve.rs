//! Built-in defaults, then the config file, then flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

/// A fully specified run of one subcommand.
pub trait Spec: Serialize + DeserializeOwned + Default + Clone {
    const COMMAND: &'static str;

    /// Fills the defaults that depend on other fields and rejects invalid
    /// combinations before any compute starts.
    fn finish(&mut self) -> Result<(), CliError>;
}

/// Merges `config` (a spec object, or a manifest of the same command) and
/// then the non-null entries of `flags` over the defaults of `S`. Keys that
/// `S` does not have are rejected.
pub fn resolve<S: Spec>(config: Option<&Path>, flags: &impl Serialize) -> Result<S, CliError> {
    let mut merged = object(serde_json::to_value(S::default()).expect("specs serialize"), "defaults")?;
    if let Some(path) = config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut v: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if let (Some(cmd), Some(_)) = (v.get("command").and_then(Value::as_str), v.get("spec")) {
            if cmd != S::COMMAND {
                return Err(CliError::Validation(format!(
                    "{} is a manifest of `{cmd}`, not `{}`",
                    path.display(),
                    S::COMMAND
                )));
            }
            v = v["spec"].take();
        }
        overlay(&mut merged, object(v, "config file")?, "config file")?;
    }
    let flags = object(serde_json::to_value(flags).expect("flags serialize"), "flags")?;
    let flags: Map<String, Value> = flags.into_iter().filter(|(_, v)| !v.is_null()).collect();
    overlay(&mut merged, flags, "flags")?;
    let mut spec: S =
        serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Validation(e.to_string()))?;
    spec.finish()?;
    Ok(spec)
}

fn object(v: Value, what: &str) -> Result<Map<String, Value>, CliError> {
    match v {
        Value::Object(m) => Ok(m),
        _ => Err(CliError::Validation(format!("{what} must be a JSON object"))),
    }
}

fn overlay(base: &mut Map<String, Value>, top: Map<String, Value>, source: &str) -> Result<(), CliError> {
    for (k, v) in top {
        match base.get_mut(&k) {
            Some(slot) => *slot = v,
            None => return Err(CliError::Validation(format!("unknown key `{k}` in {source}"))),
        }
    }
    Ok(())
}
