//! Flat `key = value` configuration text: one pair per line, `#` starts a
//! comment line, blank lines are ignored, keys are unique.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Value plus the 1-based line it came from.
pub(crate) type Entries = BTreeMap<String, (String, usize)>;

pub(crate) fn parse(text: &str, file: &str) -> Result<Entries> {
    let mut out = Entries::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                file: file.into(),
                line: k + 1,
                message: format!("expected key = value, got {line:?}"),
            });
        };
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::Parse {
                file: file.into(),
                line: k + 1,
                message: "empty key".into(),
            });
        }
        if out.insert(key.clone(), (value.trim().to_string(), k + 1)).is_some() {
            return Err(Error::Config(format!("{file}:{}: key {key:?} given twice", k + 1)));
        }
    }
    Ok(out)
}

/// Parses a value, naming the key and line on failure.
pub(crate) fn value<T: std::str::FromStr>(file: &str, key: &str, raw: &str, line: usize) -> Result<T> {
    raw.parse().map_err(|_| {
        Error::Config(format!("{file}:{line}: cannot parse {key} = {raw:?}"))
    })
}
