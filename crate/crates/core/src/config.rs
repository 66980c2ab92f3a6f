//! Flat `key = value` configuration text.
//!
//! One entry per line; `#` starts a comment; blank lines are ignored. Keys
//! are dotted paths such as `texture.theta`. Later entries override earlier
//! ones.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub type KeyValues = BTreeMap<String, String>;

pub fn parse_kv(text: &str) -> Result<KeyValues> {
    let mut out = KeyValues::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected `key = value`, got `{raw}`",
                n + 1
            ))
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn read_kv_file(path: &Path) -> Result<KeyValues> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_kv(&text)
}

/// Renders entries sorted by key, one per line.
pub fn format_kv(kv: &KeyValues) -> String {
    kv.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

pub fn get<'a>(kv: &'a KeyValues, key: &str) -> Result<&'a str> {
    kv.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
}

pub fn parse_value<T: FromStr>(kv: &KeyValues, key: &str) -> Result<T> {
    let raw = get(kv, key)?;
    raw.parse()
        .map_err(|_| Error::Config(format!("cannot parse `{key}` = `{raw}`")))
}

/// Turns `--key value` / `--key=value` pairs into entries.
pub fn parse_flag_overrides(args: &[String]) -> Result<KeyValues> {
    let mut out = KeyValues::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected `--key value`, got `{arg}`")))?;
        let (k, v) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::Config(format!("flag `{arg}` has no value")))?;
                (key.to_string(), v.clone())
            }
        };
        out.insert(k, v);
    }
    Ok(out)
}
