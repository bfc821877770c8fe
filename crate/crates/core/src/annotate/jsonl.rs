//! JSON-lines pair files.
//!
//! Canonical line: `{"image_id": "a", "p1": [x, y], "p2": [x, y], "J": "E", "w": 1.0}`.
//! `J` is `E` (same albedo), `D` (p1 darker) or `L` (p2 darker). Files using
//! other key names or label spellings load through a [`FieldMap`].

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

use super::{AnnotationPair, Judgement};

/// Key names and label spellings for foreign pair files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMap {
    pub image_id: String,
    pub p1: String,
    pub p2: String,
    pub judgement: String,
    pub weight: String,
    /// Raw label -> class. Empty means the canonical `E`/`D`/`L`.
    pub labels: BTreeMap<String, Judgement>,
}

impl Default for FieldMap {
    fn default() -> Self {
        Self {
            image_id: "image_id".into(),
            p1: "p1".into(),
            p2: "p2".into(),
            judgement: "J".into(),
            weight: "w".into(),
            labels: BTreeMap::new(),
        }
    }
}

impl FieldMap {
    fn label(&self, raw: &str) -> Option<Judgement> {
        if self.labels.is_empty() {
            match raw {
                "E" => Some(Judgement::E),
                "D" => Some(Judgement::D),
                "L" => Some(Judgement::L),
                _ => None,
            }
        } else {
            self.labels.get(raw).copied()
        }
    }
}

fn point(v: &Value, key: &str) -> std::result::Result<[usize; 2], String> {
    let arr = v
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| format!("missing or non-array field `{key}`"))?;
    if arr.len() != 2 {
        return Err(format!("`{key}` must have 2 coordinates, got {}", arr.len()));
    }
    let mut out = [0usize; 2];
    for (o, c) in out.iter_mut().zip(arr) {
        let f = c.as_f64().ok_or_else(|| format!("`{key}` coordinate is not a number"))?;
        if f < 0.0 || f.fract() != 0.0 || !f.is_finite() {
            return Err(format!("`{key}` coordinate {f} is not a non-negative integer"));
        }
        *o = f as usize;
    }
    Ok(out)
}

fn parse_line(v: &Value, map: &FieldMap) -> std::result::Result<AnnotationPair, String> {
    let image_id = match v.get(&map.image_id) {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    };
    let raw = v
        .get(&map.judgement)
        .ok_or_else(|| format!("missing field `{}`", map.judgement))?;
    let raw = match raw {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    let judgement = map.label(&raw).ok_or_else(|| format!("unknown judgement label {raw:?}"))?;
    let weight = v
        .get(&map.weight)
        .and_then(Value::as_f64)
        .ok_or_else(|| format!("missing or non-numeric field `{}`", map.weight))?;
    Ok(AnnotationPair {
        image_id,
        p1: point(v, &map.p1)?,
        p2: point(v, &map.p2)?,
        judgement,
        weight,
    })
}

/// Parses pair lines from `reader`. Blank lines are skipped. Every pair is
/// validated (distinct endpoints, positive weight, and `bounds` if given);
/// the first bad line aborts with its 1-based line number.
pub fn parse_annotations<R: BufRead>(
    reader: R,
    source: &str,
    bounds: Option<(usize, usize)>,
    map: &FieldMap,
) -> Result<Vec<AnnotationPair>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| Error::Parse {
            path: source.to_string(),
            line: line_no,
            message,
        };
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        let pair = parse_line(&v, map).map_err(err)?;
        pair.validate(bounds).map_err(|e| err(e.to_string()))?;
        out.push(pair);
    }
    Ok(out)
}

pub fn read_annotations(path: &Path, bounds: Option<(usize, usize)>, map: &FieldMap) -> Result<Vec<AnnotationPair>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(BufReader::new(f), &path.display().to_string(), bounds, map)
}

/// Writes pairs in the canonical format, one per line.
pub fn write_annotations(path: &Path, pairs: &[AnnotationPair]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for p in pairs {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, bounds: Option<(usize, usize)>) -> Result<Vec<AnnotationPair>> {
        parse_annotations(text.as_bytes(), "mem", bounds, &FieldMap::default())
    }

    #[test]
    fn canonical_lines() {
        let text = "{\"image_id\":\"a\",\"p1\":[1,2],\"p2\":[3,4],\"J\":\"D\",\"w\":0.8}\n\n{\"p1\":[0,0],\"p2\":[1,0],\"J\":\"E\",\"w\":5}\n";
        let v = parse(text, Some((8, 8))).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].image_id, "a");
        assert_eq!(v[0].p2, [3, 4]);
        assert_eq!(v[0].judgement, Judgement::D);
        assert_eq!(v[1].weight, 5.0);
    }

    #[test]
    fn errors_name_the_line() {
        let cases = [
            "{\"p1\":[1,2],\"p2\":[3,4],\"J\":\"X\",\"w\":1}",
            "{\"p1\":[1,2],\"p2\":[1,2],\"J\":\"E\",\"w\":1}",
            "{\"p1\":[1,2],\"p2\":[3,4],\"J\":\"E\",\"w\":0}",
            "{\"p1\":[1,2],\"p2\":[9,4],\"J\":\"E\",\"w\":1}",
            "{\"p1\":[1.5,2],\"p2\":[3,4],\"J\":\"E\",\"w\":1}",
            "not json",
        ];
        for bad in cases {
            let text = format!("{{\"p1\":[0,0],\"p2\":[1,1],\"J\":\"E\",\"w\":1}}\n{bad}\n");
            match parse(&text, Some((8, 8))) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, 2, "{bad}"),
                other => panic!("{bad}: {other:?}"),
            }
        }
    }

    #[test]
    fn field_map() {
        let map = FieldMap {
            image_id: "img".into(),
            p1: "a".into(),
            p2: "b".into(),
            judgement: "label".into(),
            weight: "score".into(),
            labels: [("same".to_string(), Judgement::E), ("1".to_string(), Judgement::D)]
                .into_iter()
                .collect(),
        };
        let text = "{\"img\":7,\"a\":[1,2],\"b\":[3,4],\"label\":\"same\",\"score\":2.5}\n{\"a\":[1,2],\"b\":[3,4],\"label\":1,\"score\":1}";
        let v = parse_annotations(text.as_bytes(), "mem", None, &map).unwrap();
        assert_eq!(v[0].image_id, "7");
        assert_eq!(v[0].judgement, Judgement::E);
        assert_eq!(v[1].judgement, Judgement::D);
    }

    #[test]
    fn write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.jsonl");
        let pairs = vec![
            AnnotationPair {
                image_id: "s0".into(),
                p1: [1, 2],
                p2: [5, 6],
                judgement: Judgement::L,
                weight: 0.3,
            },
            AnnotationPair {
                image_id: "s0".into(),
                p1: [0, 0],
                p2: [5, 6],
                judgement: Judgement::E,
                weight: 1.0,
            },
        ];
        write_annotations(&path, &pairs).unwrap();
        assert_eq!(read_annotations(&path, Some((8, 8)), &FieldMap::default()).unwrap(), pairs);
    }
}
