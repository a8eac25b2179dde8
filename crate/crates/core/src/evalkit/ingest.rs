//! Annotation export parsing.
//!
//! Two layouts are accepted. The generic one is a JSON array (or JSON lines)
//! of flat rows:
//!
//! ```json
//! {"annotator": "A", "image_id": "0125",
//!  "scores": {"image_simplicity": 9, "ethics": 18},
//!  "style_guesses": ["Retro", "Cartoon", "3D Rendered"], "flags": []}
//! ```
//!
//! The other is a Label Studio JSON export: an array of tasks, each with
//! `data` naming the image and `annotations[].result[]` holding one control
//! value per dimension. Controls are matched to dimensions by `from_name`; a
//! control whose name contains `style` supplies the guesses and one containing
//! `flag` supplies free-text flags.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AnnotationRecord, Dimension, EvalError, RowError};
use crate::corpus::DatasetSource;
use crate::genpipe::AnonymizationMap;
use crate::templates::Style;

/// One row of the generic export layout, before validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExportRow {
    pub annotator: String,
    #[serde(alias = "image", deserialize_with = "string_or_number")]
    pub image_id: String,
    #[serde(default)]
    pub scores: BTreeMap<String, Value>,
    #[serde(default)]
    pub style_guesses: Vec<String>,
    #[serde(default)]
    pub flags: Vec<String>,
}

fn string_or_number<'de, D: serde::Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    match Value::deserialize(d)? {
        Value::String(s) => Ok(s),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(serde::de::Error::custom(format!("expected string or number, got {other}"))),
    }
}

fn value_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        other => other.to_string(),
    }
}

/// Parse export text in either layout into raw rows.
pub fn parse_export(text: &str) -> Result<Vec<ExportRow>, String> {
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    let values: Vec<Value> = if trimmed.starts_with('[') {
        serde_json::from_str(trimmed).map_err(|e| e.to_string())?
    } else {
        trimmed
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
            .collect::<Result<_, _>>()?
    };
    if values.iter().any(|v| v.get("annotations").is_some()) {
        return label_studio_rows(&values);
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| serde_json::from_value(v).map_err(|e| format!("row {}: {e}", i + 1)))
        .collect()
}

fn label_studio_rows(tasks: &[Value]) -> Result<Vec<ExportRow>, String> {
    let mut rows = Vec::new();
    for (t, task) in tasks.iter().enumerate() {
        let data = task.get("data").cloned().unwrap_or(Value::Null);
        let image = ["image_id", "numeric_id", "image"]
            .iter()
            .find_map(|k| data.get(*k))
            .map(value_label)
            .ok_or_else(|| format!("task {}: no image reference in `data`", t + 1))?;
        let annotations = task.get("annotations").and_then(Value::as_array).cloned().unwrap_or_default();
        for ann in annotations {
            if ann.get("was_cancelled").and_then(Value::as_bool) == Some(true) {
                continue;
            }
            let annotator = match ann.get("completed_by") {
                Some(Value::Object(o)) => o
                    .get("email")
                    .or_else(|| o.get("id"))
                    .map(value_label)
                    .unwrap_or_default(),
                Some(v) => value_label(v),
                None => String::new(),
            };
            let mut row = ExportRow {
                annotator,
                image_id: image_stem(&image),
                ..ExportRow::default()
            };
            for res in ann.get("result").and_then(Value::as_array).into_iter().flatten() {
                let name = res.get("from_name").and_then(Value::as_str).unwrap_or_default();
                let value = res.get("value").cloned().unwrap_or(Value::Null);
                let lower = name.to_lowercase();
                let choices = || -> Vec<String> {
                    value.get("choices").and_then(Value::as_array).into_iter().flatten().map(value_label).collect()
                };
                if lower.contains("style") {
                    row.style_guesses.extend(choices());
                } else if lower.contains("flag") {
                    row.flags.extend(choices());
                    row.flags
                        .extend(value.get("text").and_then(Value::as_array).into_iter().flatten().map(value_label));
                } else if name.parse::<Dimension>().is_ok() {
                    let v = ["number", "rating"]
                        .iter()
                        .find_map(|k| value.get(*k).cloned())
                        .or_else(|| choices().first().map(|c| Value::String(c.clone())));
                    if let Some(v) = v {
                        row.scores.insert(name.to_string(), v);
                    }
                }
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

/// `/data/upload/3/8f2a91c0-0125.png` -> `0125`.
fn image_stem(reference: &str) -> String {
    let file = reference.rsplit(['/', '\\']).next().unwrap_or(reference);
    let stem = file.rsplit_once('.').map_or(file, |(s, _)| s);
    stem.rsplit_once('-').map_or(stem, |(_, s)| s).to_string()
}

fn resolve_id<'m>(map: &'m AnonymizationMap, id: &str) -> Option<&'m str> {
    let stem = image_stem(id.trim());
    if let Some((k, _)) = map.entries.get_key_value(stem.as_str()) {
        return Some(k);
    }
    let n: u64 = stem.parse().ok()?;
    map.entries.keys().find(|k| k.parse::<u64>().ok() == Some(n)).map(String::as_str)
}

fn parse_score(d: Dimension, v: &Value) -> Result<f64, String> {
    let x = match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    }
    .ok_or_else(|| format!("{d}: `{}` is not a number", value_label(v)))?;
    if x.fract() != 0.0 {
        return Err(format!("{d}: {x} is not an integer"));
    }
    if !(0.0..=d.scale_max()).contains(&x) {
        return Err(format!("{d}: {x} outside 0-{}", d.scale_max()));
    }
    Ok(x)
}

/// Validate raw rows against the anonymisation map.
///
/// All offending rows are reported together. Unknown image ids, unknown
/// dimensions or styles, out-of-scale scores, more than three guesses and
/// repeated (annotator, image) pairs are errors.
pub fn ingest_annotations(rows: &[ExportRow], map: &AnonymizationMap) -> Result<Vec<AnnotationRecord>, EvalError> {
    let mut out = Vec::with_capacity(rows.len());
    let mut errors = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, row) in rows.iter().enumerate() {
        let mut problems = Vec::new();
        if row.annotator.trim().is_empty() {
            problems.push("missing annotator".to_string());
        }
        let id = resolve_id(map, &row.image_id);
        if id.is_none() {
            problems.push(format!("unknown image id `{}`", row.image_id));
        }
        let mut scores = BTreeMap::new();
        for (k, v) in &row.scores {
            match k.parse::<Dimension>() {
                Ok(d) => match parse_score(d, v) {
                    Ok(x) => {
                        scores.insert(d, x);
                    }
                    Err(e) => problems.push(e),
                },
                Err(e) => problems.push(e),
            }
        }
        let mut guesses: Vec<Style> = Vec::new();
        for g in &row.style_guesses {
            match g.parse::<Style>() {
                Ok(s) if !guesses.contains(&s) => guesses.push(s),
                Ok(_) => {}
                Err(e) => problems.push(e),
            }
        }
        if guesses.len() > 3 {
            problems.push(format!("{} style guesses, at most 3 allowed", guesses.len()));
        }
        if let Some(id) = id {
            if !seen.insert((row.annotator.trim().to_string(), id.to_string())) {
                problems.push(format!("duplicate rating of {id} by {}", row.annotator));
            }
        }
        if !problems.is_empty() {
            errors.push(RowError { row: i + 1, message: problems.join("; ") });
            continue;
        }
        let id = id.unwrap();
        let entry = &map.entries[id];
        out.push(AnnotationRecord {
            annotator: row.annotator.trim().to_string(),
            image_id: id.to_string(),
            item_id: entry.item_id.clone(),
            style: entry.style,
            dataset: DatasetSource::from_item_id(&entry.item_id).unwrap_or(DatasetSource::Asset),
            scores,
            style_guesses: guesses,
            flags: row.flags.clone(),
        });
    }
    if !errors.is_empty() {
        return Err(EvalError::InvalidRows(errors));
    }
    Ok(out)
}

pub fn write_records(path: &Path, records: &[AnnotationRecord]) -> Result<(), EvalError> {
    let io = |source| EvalError::Io { path: path.into(), source };
    let mut f = fs::File::create(path).map_err(io)?;
    for r in records {
        writeln!(f, "{}", serde_json::to_string(r).expect("record serialises")).map_err(io)?;
    }
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<AnnotationRecord>, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io { path: path.into(), source })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Format {
                path: path.into(),
                message: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genpipe::anonymize_names;

    fn map() -> AnonymizationMap {
        let names: Vec<String> = ["wikipedia_387", "asset_001"]
            .iter()
            .flat_map(|i| Style::ALL.map(|s| format!("{i}_{}.png", s.key())))
            .collect();
        anonymize_names(&names, 9).unwrap()
    }

    fn row(annotator: &str, image: &str, scores: &[(&str, i64)]) -> ExportRow {
        ExportRow {
            annotator: annotator.into(),
            image_id: image.into(),
            scores: scores.iter().map(|(k, v)| (k.to_string(), Value::from(*v))).collect(),
            style_guesses: vec!["Retro".into(), "3D Rendered".into(), "retro".into()],
            flags: vec![],
        }
    }

    #[test]
    fn resolves_truth_through_map() {
        let m = map();
        let recs = ingest_annotations(&[row("A", "0003", &[("ethics", 20)]), row("K", "3", &[])], &m).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].image_id, "0003");
        let e = &m.entries["0003"];
        assert_eq!((recs[0].item_id.as_str(), recs[0].style), (e.item_id.as_str(), e.style));
        assert_eq!(recs[0].style_guesses, vec![Style::Retro, Style::ThreeDRendered]);
        assert_eq!(recs[0].score(Dimension::Ethics), Some(20.0));
    }

    #[test]
    fn rejects_with_row_diagnostics() {
        let m = map();
        let rows = [
            row("A", "0001", &[("ethics", 21)]),
            row("A", "0002", &[("image_quality", 15)]),
            row("A", "9999", &[]),
            row("A", "0002", &[]),
        ];
        match ingest_annotations(&rows, &m).unwrap_err() {
            EvalError::InvalidRows(errs) => {
                let rows: Vec<usize> = errs.iter().map(|e| e.row).collect();
                assert_eq!(rows, vec![1, 3, 4]);
                assert!(errs[0].message.contains("ethics: 21 outside 0-20"));
                assert!(errs[2].message.contains("duplicate"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn empty_export() {
        assert!(parse_export("").unwrap().is_empty());
        assert!(parse_export("[]").unwrap().is_empty());
        assert!(ingest_annotations(&[], &map()).unwrap().is_empty());
    }

    #[test]
    fn generic_layout_array_and_lines() {
        let line = r#"{"annotator":"M","image_id":125,"scores":{"Text Quality":"12"},"extra":true}"#;
        let a = parse_export(&format!("[{line}]")).unwrap();
        let b = parse_export(&format!("{line}\n\n{line}\n")).unwrap();
        assert_eq!(a[0].image_id, "125");
        assert_eq!(b.len(), 2);
        assert_eq!(a[0], b[0]);
    }

    #[test]
    fn label_studio_layout() {
        let export = r#"[{
          "id": 7,
          "data": {"image": "/data/upload/3/8f2a91c0-0002.png"},
          "annotations": [
            {"completed_by": {"id": 3, "email": "L"}, "result": [
              {"from_name": "image_simplicity", "type": "number", "value": {"number": 9}},
              {"from_name": "ethics", "type": "rating", "value": {"rating": 18}},
              {"from_name": "style_guess", "type": "choices", "value": {"choices": ["Retro", "Cartoon"]}},
              {"from_name": "ethics_flags", "type": "textarea", "value": {"text": ["stereotype"]}},
              {"from_name": "comment", "type": "textarea", "value": {"text": ["nice"]}}
            ]},
            {"completed_by": 4, "was_cancelled": true, "result": []}
          ]
        }]"#;
        let rows = parse_export(export).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].annotator, "L");
        assert_eq!(rows[0].image_id, "0002");
        let recs = ingest_annotations(&rows, &map()).unwrap();
        assert_eq!(recs[0].score(Dimension::ImageSimplicity), Some(9.0));
        assert_eq!(recs[0].style_guesses, vec![Style::Retro, Style::Cartoon]);
        assert_eq!(recs[0].flags, vec!["stereotype"]);
    }

    #[test]
    fn records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let recs = ingest_annotations(&[row("A", "0001", &[("ethics", 3)])], &map()).unwrap();
        let p = dir.path().join("r.jsonl");
        write_records(&p, &recs).unwrap();
        assert_eq!(read_records(&p).unwrap(), recs);
    }
}
