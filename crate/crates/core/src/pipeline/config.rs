//! Flat `key = value` configuration files.
//!
//! ```text
//! # comment
//! seeds = 0, 1, 2
//! solver.max_inner = 100
//! densify.sigma_rgb = 0.05
//! ```
//!
//! Dotted keys address nested fields of a serde-serializable struct. Values
//! are read as JSON when they parse as JSON, as a list when they contain a
//! comma, and as a bare string otherwise. Unknown keys are errors.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Parsed entries with the 1-based line each came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlatConfig {
    pub source: String,
    pub entries: BTreeMap<String, (usize, String)>,
}

impl FlatConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: source.to_string(),
                line: i + 1,
                message,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let key = k.trim();
            if key.is_empty() || key.split('.').any(str::is_empty) {
                return Err(err(format!("bad key `{key}`")));
            }
            if entries.insert(key.to_string(), (i + 1, v.trim().to_string())).is_some() {
                return Err(err(format!("duplicate key `{key}`")));
            }
        }
        Ok(Self {
            source: source.to_string(),
            entries,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Removes and returns the entries under `prefix.` (prefix stripped).
    pub fn take_section(&mut self, prefix: &str) -> FlatConfig {
        let dotted = format!("{prefix}.");
        let keys: Vec<String> = self.entries.keys().filter(|k| k.starts_with(&dotted)).cloned().collect();
        let entries = keys
            .into_iter()
            .map(|k| {
                let v = self.entries.remove(&k).unwrap();
                (k[dotted.len()..].to_string(), v)
            })
            .collect();
        FlatConfig {
            source: self.source.clone(),
            entries,
        }
    }

    /// Overlays the entries on `base` and deserializes the result.
    pub fn apply<T: Serialize + DeserializeOwned>(&self, base: &T) -> Result<T> {
        let mut tree = serde_json::to_value(base)?;
        for (key, (line, raw)) in &self.entries {
            let err = |message: String| Error::Parse {
                path: self.source.clone(),
                line: *line,
                message,
            };
            let mut node = &mut tree;
            for part in key.split('.') {
                node = node
                    .as_object_mut()
                    .and_then(|o| o.get_mut(part))
                    .ok_or_else(|| err(format!("unknown key `{key}`")))?;
            }
            *node = coerce(raw, node);
        }
        serde_json::from_value(tree).map_err(|e| {
            let line = self.entries.values().map(|(l, _)| *l).min().unwrap_or(0);
            Error::Parse {
                path: self.source.clone(),
                line,
                message: e.to_string(),
            }
        })
    }
}

/// Turns a raw value into JSON shaped like `current` where possible.
fn coerce(raw: &str, current: &Value) -> Value {
    if let Ok(v) = serde_json::from_str::<Value>(raw) {
        if !(current.is_array() && !v.is_array()) {
            return v;
        }
    }
    if current.is_array() {
        return Value::Array(
            raw.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string())))
                .collect(),
        );
    }
    Value::String(raw.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct Inner {
        a: f64,
        mode: String,
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct Outer {
        n: usize,
        list: Vec<f64>,
        names: Vec<String>,
        inner: Inner,
    }

    fn base() -> Outer {
        Outer {
            n: 1,
            list: vec![1.0],
            names: vec![],
            inner: Inner {
                a: 0.5,
                mode: "x".into(),
            },
        }
    }

    #[test]
    fn overlays_nested_keys() {
        let text = "# c\n\nn = 3\nlist = 1, 0.5 ,0.1\nnames = ours,retinex\ninner.a=2.5\ninner.mode = luminance\n";
        let c = FlatConfig::parse(text, "mem").unwrap();
        let out = c.apply(&base()).unwrap();
        assert_eq!(out.n, 3);
        assert_eq!(out.list, vec![1.0, 0.5, 0.1]);
        assert_eq!(out.names, vec!["ours", "retinex"]);
        assert_eq!(out.inner.a, 2.5);
        assert_eq!(out.inner.mode, "luminance");

        let single = FlatConfig::parse("list = 0.25\nnames=[\"a\"]", "mem").unwrap().apply(&base()).unwrap();
        assert_eq!(single.list, vec![0.25]);
        assert_eq!(single.names, vec!["a"]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match FlatConfig::parse("n = 1\noops\n", "mem") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match FlatConfig::parse("n = 1\nn = 2\n", "mem") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let c = FlatConfig::parse("n = 1\ninner.b = 2\n", "mem").unwrap();
        match c.apply(&base()) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("inner.b"));
            }
            other => panic!("{other:?}"),
        }
        let c = FlatConfig::parse("n = many\n", "mem").unwrap();
        assert!(c.apply(&base()).is_err());
    }

    #[test]
    fn sections_split_off() {
        let mut c = FlatConfig::parse("synth.n_regions = 4\nseed = 2\n", "mem").unwrap();
        let s = c.take_section("synth");
        assert_eq!(s.entries.len(), 1);
        assert!(s.entries.contains_key("n_regions"));
        assert_eq!(c.entries.len(), 1);
    }
}
