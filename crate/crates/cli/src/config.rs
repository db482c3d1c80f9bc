//! `--config file.json` support.
//!
//! File values are spliced into the argument list ahead of the command-line
//! flags, so with `args_override_self` the flags win.

use std::ffi::OsString;
use std::fs;

use anyhow::{bail, Context, Result};
use serde_json::Value;

/// Returns `args` with the `--config` pair removed and the file's entries
/// inserted after the subcommand name.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let text = arg.to_string_lossy();
        if text == "--config" {
            let value = iter.next().context("--config needs a path")?;
            path = Some(value);
        } else if let Some(v) = text.strip_prefix("--config=") {
            path = Some(OsString::from(v));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let raw = fs::read_to_string(&path).with_context(|| format!("reading config {}", path.to_string_lossy()))?;
    let value: Value =
        serde_json::from_str(&raw).with_context(|| format!("parsing config {}", path.to_string_lossy()))?;
    let flags = config_flags(&value)?;
    // program name, subcommand, then file values, then the remaining flags
    let split = rest.len().min(2);
    let mut out: Vec<OsString> = rest[..split].to_vec();
    out.extend(flags.into_iter().map(OsString::from));
    out.extend(rest[split..].iter().cloned());
    Ok(out)
}

fn config_flags(value: &Value) -> Result<Vec<String>> {
    let Value::Object(map) = value else {
        bail!("config must be a JSON object of flag names to values");
    };
    let mut out = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            Value::Null => {}
            Value::Bool(true) => out.push(flag),
            Value::Bool(false) => {}
            Value::Number(n) => out.extend([flag, n.to_string()]),
            Value::String(s) => out.extend([flag, s.clone()]),
            Value::Array(items) => {
                let parts: Result<Vec<String>> = items
                    .iter()
                    .map(|item| match item {
                        Value::Number(n) => Ok(n.to_string()),
                        Value::String(s) => Ok(s.clone()),
                        other => bail!("config field {key:?}: unsupported list element {other}"),
                    })
                    .collect();
                out.extend([flag, parts?.join(",")]);
            }
            Value::Object(_) => bail!("config field {key:?}: nested objects are not supported"),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_from_object() {
        let v: Value =
            serde_json::json!({"samples": 100, "sigma": [2, 1], "drift": "sine", "quiet": true, "skip": false});
        let f = config_flags(&v).unwrap();
        assert_eq!(f, ["--drift", "sine", "--quiet", "--samples", "100", "--sigma", "2,1"]);
        assert!(config_flags(&serde_json::json!([1])).is_err());
        assert!(config_flags(&serde_json::json!({"a": {"b": 1}})).is_err());
    }

    #[test]
    fn file_values_precede_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"seed": 5, "n_samples": 10}"#).unwrap();
        let args: Vec<OsString> = ["sheet", "verify-ibp", "--config", path.to_str().unwrap(), "--seed", "7"]
            .iter()
            .map(OsString::from)
            .collect();
        let out: Vec<String> = expand_config(args).unwrap().into_iter().map(|s| s.into_string().unwrap()).collect();
        assert_eq!(out, ["sheet", "verify-ibp", "--n-samples", "10", "--seed", "5", "--seed", "7"]);
    }
}
