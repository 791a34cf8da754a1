//! Report files.
//!
//! * JSON reports carry a top-level `schema_version`.
//! * CSV files start with a `# schema_version=N` comment line, then a header.
//! * `history.jsonl` holds one JSON object per epoch, each with
//!   `schema_version`.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::{atomic_write, SCHEMA_VERSION};
use crate::error::Result;
use crate::metrics::{ClassificationReport, KmCurve};
use crate::training::EpochRecord;

pub const KM_HEADER: &str = "time,survival,ci_low,ci_high,at_risk,group";

fn version_line() -> String {
    format!("# schema_version={SCHEMA_VERSION}\n")
}

/// Serializes `value` (an object) with an added `schema_version` key.
pub fn versioned<T: Serialize>(value: &T) -> Result<Value> {
    let mut out = serde_json::Map::new();
    out.insert("schema_version".into(), SCHEMA_VERSION.into());
    match serde_json::to_value(value)? {
        Value::Object(m) => {
            for (k, v) in m {
                if k != "schema_version" {
                    out.insert(k, v);
                }
            }
        }
        other => {
            out.insert("value".into(), other);
        }
    }
    Ok(Value::Object(out))
}

pub fn history_jsonl(records: &[&EpochRecord]) -> Result<String> {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(&versioned(r)?)?);
        s.push('\n');
    }
    Ok(s)
}

pub fn write_history(path: &Path, records: &[&EpochRecord]) -> Result<()> {
    atomic_write(path, history_jsonl(records)?.as_bytes())
}

/// One block of rows per `(group name, curve)`.
pub fn km_csv(curves: &[(&str, &KmCurve)]) -> String {
    let mut s = version_line();
    s.push_str(KM_HEADER);
    s.push('\n');
    for (name, c) in curves {
        for i in 0..c.len() {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.times[i], c.survival[i], c.ci_low[i], c.ci_high[i], c.at_risk[i], name
            ));
        }
    }
    s
}

/// Square confusion matrix, rows = truth, columns = prediction.
pub fn confusion_csv(report: &ClassificationReport, names: &[&str]) -> String {
    let mut s = version_line();
    s.push_str("truth\\pred");
    for n in names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for (row, name) in report.confusion.iter().zip(names) {
        s.push_str(name);
        for v in row {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}
