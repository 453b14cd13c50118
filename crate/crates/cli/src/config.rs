use std::fmt;
use std::path::Path;

use anyhow::Result;
use rhsim_core::engine::ScenarioConfig;
use serde_json::Value;

/// Bad input from the command line: unreadable files, unknown keys,
/// malformed overrides.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Preset, then config file, then `key=value` overrides in order.
pub fn load(preset: &str, file: Option<&Path>, overrides: &[String]) -> Result<ScenarioConfig> {
    let mut value = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| bad(format!("{}: {e}", p.display())))?;
            let base = ScenarioConfig::preset(preset).ok_or_else(|| bad(format!("unknown preset `{preset}`")))?;
            let mut v = serde_json::to_value(base)?;
            let file: Value = serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", p.display())))?;
            merge(&mut v, file, "")?;
            v
        }
        None => serde_json::to_value(
            ScenarioConfig::preset(preset).ok_or_else(|| bad(format!("unknown preset `{preset}`")))?,
        )?,
    };
    for o in overrides {
        set(&mut value, o)?;
    }
    Ok(ScenarioConfig::from_json(&value.to_string())?)
}

fn merge(base: &mut Value, patch: Value, at: &str) -> Result<()> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let key = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, &key)?,
                    None => return Err(bad(format!("unknown config key `{key}`"))),
                }
            }
            Ok(())
        }
        (b, p) => {
            *b = p;
            Ok(())
        }
    }
}

/// Applies one `dotted.key=value` override. Values parse as JSON when they
/// can and as plain strings otherwise.
pub fn set(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| bad(format!("override `{assignment}` is not key=value")))?;
    let mut slot = &mut *root;
    for part in key.split('.') {
        slot = match slot {
            Value::Object(m) => m.get_mut(part),
            Value::Array(a) => part.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| bad(format!("unknown config key `{key}`")))?;
    }
    *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}

fn flatten(v: &Value, at: &str, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
                flatten(x, &key, out);
            }
        }
        Value::Array(a) if a.iter().any(|x| x.is_object() || x.is_array()) => {
            out.push((at.to_string(), format!("list of {} entries", a.len())));
        }
        _ => out.push((at.to_string(), v.to_string())),
    }
}

/// Every config key with its desk and full-scale defaults.
pub fn key_table() -> String {
    let keys = |c: ScenarioConfig| {
        let mut out = Vec::new();
        flatten(&serde_json::to_value(c).unwrap_or(Value::Null), "", &mut out);
        out
    };
    let (desk, full) = (keys(ScenarioConfig::desk()), keys(ScenarioConfig::full()));
    let width = full.iter().map(|k| k.0.len()).max().unwrap_or(0);
    let mut s = String::from(
        "Config keys (JSON file via --config, or --set key=value; desk default / full default):\n",
    );
    for (k, f) in &full {
        let d = desk.iter().find(|x| &x.0 == k).map(|x| x.1.as_str()).unwrap_or("-");
        if d == f {
            s.push_str(&format!("  {k:width$}  {f}\n"));
        } else {
            s.push_str(&format!("  {k:width$}  {d} / {f}\n"));
        }
    }
    s
}
