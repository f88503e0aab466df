//! Ingestion of raw observation records (JSONL or CSV) and re-export.
//!
//! One record is one `(curve key, anchor, outer seed, inner seed, value)`
//! observation; a missing value is spelled `NaN`. Ingestion is single-pass
//! and groups records into one `CurveSet` per distinct key.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CurveKey, CurveSet, EmpiricalCurve, ObsMatrix, RepeatId};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "dataset,learner,metric,split,scaling,anchor,outer,inner,value";
pub const AGGREGATED_CSV_HEADER: &str = "dataset,learner,metric,split,scaling,anchor,mean,stderr,k";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    Jsonl,
    Csv,
}

impl FromStr for FileFormat {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "jsonl" => Ok(FileFormat::Jsonl),
            "csv" => Ok(FileFormat::Csv),
            other => Err(format!("unknown format `{other}` (expected jsonl or csv)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Record {
    key: CurveKey,
    anchor: u64,
    repeat: RepeatId,
    value: f64,
}

/// Loads every curve in the file, one `CurveSet` per distinct key.
pub fn load_curves(path: &Path, format: FileFormat) -> Result<Vec<CurveSet>> {
    let file = File::open(path)?;
    read_curves(BufReader::new(file), format, &path.display().to_string())
}

/// Reader-based variant of [`load_curves`]; `source` labels error messages.
pub fn read_curves<R: BufRead>(
    reader: R,
    format: FileFormat,
    source: &str,
) -> Result<Vec<CurveSet>> {
    let records = match format {
        FileFormat::Jsonl => parse_jsonl(reader, source)?,
        FileFormat::Csv => parse_csv(reader, source)?,
    };
    assemble(records)
}

fn parse_jsonl<R: BufRead>(reader: R, source: &str) -> Result<Vec<Record>> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: source.to_string(),
            line: lineno,
            msg: e.to_string(),
        })?;
        records.push(record_from_json(&value, source, lineno)?);
    }
    Ok(records)
}

fn record_from_json(v: &Value, source: &str, line: usize) -> Result<Record> {
    let schema_err = |field: &str| Error::Schema {
        path: source.to_string(),
        line,
        field: field.to_string(),
    };
    let str_field = |field: &str| -> Result<&str> {
        v.get(field)
            .and_then(Value::as_str)
            .ok_or_else(|| schema_err(field))
    };
    let int_field = |field: &str| -> Result<u64> {
        v.get(field)
            .and_then(Value::as_u64)
            .ok_or_else(|| schema_err(field))
    };

    let key = CurveKey::new(
        str_field("dataset")?,
        str_field("learner")?,
        str_field("metric")?
            .parse()
            .map_err(|_| schema_err("metric"))?,
        str_field("split")?
            .parse()
            .map_err(|_| schema_err("split"))?,
        str_field("scaling")?
            .parse()
            .map_err(|_| schema_err("scaling"))?,
    )
    .map_err(|_| schema_err("dataset"))?;

    let value = match v.get("value") {
        Some(Value::Number(n)) => n.as_f64().ok_or_else(|| schema_err("value"))?,
        Some(Value::String(s)) if s == "NaN" => f64::NAN,
        _ => return Err(schema_err("value")),
    };

    Ok(Record {
        key,
        anchor: int_field("anchor")?,
        repeat: RepeatId {
            outer: int_field("outer")? as u32,
            inner: int_field("inner")? as u32,
        },
        value,
    })
}

fn parse_csv<R: BufRead>(reader: R, source: &str) -> Result<Vec<Record>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    {
        let headers = csv_reader.headers()?;
        let got = headers.iter().collect::<Vec<_>>().join(",");
        if got != CSV_HEADER {
            return Err(Error::Parse {
                path: source.to_string(),
                line: 1,
                msg: format!("header must be exactly `{CSV_HEADER}`, got `{got}`"),
            });
        }
    }
    let mut records = Vec::new();
    for row in csv_reader.into_records() {
        let row = row?;
        let lineno = row.position().map_or(0, |p| p.line() as usize);
        let schema_err = |field: &str| Error::Schema {
            path: source.to_string(),
            line: lineno,
            field: field.to_string(),
        };
        let field =
            |i: usize, name: &str| -> Result<&str> { row.get(i).ok_or_else(|| schema_err(name)) };
        let key = CurveKey::new(
            field(0, "dataset")?,
            field(1, "learner")?,
            field(2, "metric")?
                .parse()
                .map_err(|_| schema_err("metric"))?,
            field(3, "split")?
                .parse()
                .map_err(|_| schema_err("split"))?,
            field(4, "scaling")?
                .parse()
                .map_err(|_| schema_err("scaling"))?,
        )
        .map_err(|_| schema_err("dataset"))?;
        let anchor: u64 = field(5, "anchor")?
            .parse()
            .map_err(|_| schema_err("anchor"))?;
        let outer: u32 = field(6, "outer")?
            .parse()
            .map_err(|_| schema_err("outer"))?;
        let inner: u32 = field(7, "inner")?
            .parse()
            .map_err(|_| schema_err("inner"))?;
        let raw = field(8, "value")?;
        let value = if raw == "NaN" {
            f64::NAN
        } else {
            raw.parse().map_err(|_| schema_err("value"))?
        };
        records.push(Record {
            key,
            anchor,
            repeat: RepeatId { outer, inner },
            value,
        });
    }
    Ok(records)
}

fn assemble(records: Vec<Record>) -> Result<Vec<CurveSet>> {
    type Cells = BTreeMap<(u64, RepeatId), f64>;
    let mut by_key: BTreeMap<CurveKey, Cells> = BTreeMap::new();
    for rec in records {
        let cells = by_key.entry(rec.key.clone()).or_default();
        if let Some(&existing) = cells.get(&(rec.anchor, rec.repeat)) {
            let same = existing.to_bits() == rec.value.to_bits()
                || (existing.is_nan() && rec.value.is_nan());
            if !same {
                return Err(Error::DuplicateObservation {
                    key: rec.key.to_string(),
                    anchor: rec.anchor,
                    outer: rec.repeat.outer,
                    inner: rec.repeat.inner,
                    first: existing,
                    second: rec.value,
                });
            }
            continue;
        }
        cells.insert((rec.anchor, rec.repeat), rec.value);
    }

    let mut sets = Vec::with_capacity(by_key.len());
    for (key, cells) in by_key {
        let mut anchors: Vec<u64> = cells.keys().map(|&(a, _)| a).collect();
        anchors.sort_unstable();
        anchors.dedup();
        let mut repeats: Vec<RepeatId> = cells.keys().map(|&(_, r)| r).collect();
        repeats.sort_unstable();
        repeats.dedup();

        let mut matrix = ObsMatrix::filled(anchors.len(), repeats.len(), f64::NAN);
        for (&(anchor, repeat), &value) in &cells {
            let r = anchors.binary_search(&anchor).expect("anchor indexed");
            let c = repeats.binary_search(&repeat).expect("repeat indexed");
            matrix.set(r, c, value);
        }
        sets.push(CurveSet::new(key, anchors, matrix, repeats)?);
    }
    Ok(sets)
}

/// Writes one JSONL record per matrix cell, NaN spelled `"NaN"`.
pub fn write_jsonl<W: Write>(sets: &[CurveSet], mut out: W) -> Result<()> {
    for set in sets {
        for (r, &anchor) in set.anchors.iter().enumerate() {
            for (c, repeat) in set.repeat_ids.iter().enumerate() {
                let v = set.observations.get(r, c);
                let value = if v.is_nan() {
                    Value::String("NaN".to_string())
                } else {
                    serde_json::json!(v)
                };
                let record = serde_json::json!({
                    "dataset": set.key.dataset,
                    "learner": set.key.learner,
                    "metric": set.key.metric.to_string(),
                    "split": set.key.split.to_string(),
                    "scaling": set.key.scaling.to_string(),
                    "anchor": anchor,
                    "outer": repeat.outer,
                    "inner": repeat.inner,
                    "value": value,
                });
                writeln!(out, "{record}")?;
            }
        }
    }
    Ok(())
}

/// Aggregated-curve export: one row per anchor with mean, stderr, and the
/// effective repeat count.
pub fn write_aggregated_csv<W: Write>(curves: &[EmpiricalCurve], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATED_CSV_HEADER.split(','))?;
    for curve in curves {
        for i in 0..curve.len() {
            w.write_record(&[
                curve.key.dataset.clone(),
                curve.key.learner.clone(),
                curve.key.metric.to_string(),
                curve.key.split.to_string(),
                curve.key.scaling.to_string(),
                curve.anchors[i].to_string(),
                curve.means[i].to_string(),
                curve.std_errors[i].to_string(),
                curve.k_effective[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
