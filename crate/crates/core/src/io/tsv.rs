//! Tab-separated inputs. Missing values are spelled `NA` (an empty cell is
//! also read as missing).

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::preprocess::{ClinicalRecord, Modality, RawModalityTable};

pub const MISSING: &str = "NA";

fn malformed(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Header plus data rows, each already split and checked for width.
struct Tsv {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

fn read_tsv(path: &Path) -> Result<Tsv> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header: Vec<String> = match lines.next() {
        Some((_, l)) => l
            .map_err(|e| Error::io(path, e))?
            .trim_end_matches('\r')
            .split('\t')
            .map(str::to_string)
            .collect(),
        None => return Err(malformed(path, 1, "empty file, expected a header row")),
    };
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split('\t').map(str::to_string).collect();
        if cells.len() != header.len() {
            return Err(malformed(
                path,
                i + 1,
                format!("{} fields, header has {}", cells.len(), header.len()),
            ));
        }
        rows.push((i + 1, cells));
    }
    Ok(Tsv {
        path: path.to_path_buf(),
        header,
        rows,
    })
}

fn parse_value(path: &Path, line: usize, cell: &str) -> Result<f64> {
    let c = cell.trim();
    if c.is_empty() || c == MISSING {
        return Ok(f64::NAN);
    }
    c.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| malformed(path, line, format!("cannot parse `{cell}` as a number")))
}

/// `<cancer>/<modality>.tsv`: header `sample_id` + feature names, one row
/// per sample.
pub fn read_modality_tsv(path: &Path, modality: Modality) -> Result<RawModalityTable> {
    let t = read_tsv(path)?;
    if t.header.first().map(String::as_str) != Some("sample_id") {
        return Err(malformed(&t.path, 1, "first header column must be `sample_id`"));
    }
    let features = t.header[1..].to_vec();
    let mut samples = Vec::with_capacity(t.rows.len());
    let mut columns = vec![Vec::with_capacity(t.rows.len()); features.len()];
    for (line, cells) in &t.rows {
        samples.push(cells[0].clone());
        for (col, cell) in columns.iter_mut().zip(&cells[1..]) {
            col.push(parse_value(&t.path, *line, cell)?);
        }
    }
    RawModalityTable::new(modality, samples, features, columns)
        .map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))
}

pub const LABEL_COLUMNS: [&str; 8] = [
    "sample_id",
    "os_days",
    "event",
    "cancer_type",
    "age",
    "gender",
    "race",
    "stage",
];

/// One row of `labels.tsv`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelRow {
    pub sample_id: String,
    pub os_days: f64,
    pub event: bool,
    pub clinical: ClinicalRecord,
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    let t = read_tsv(path)?;
    let col = |name: &str| {
        t.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| malformed(&t.path, 1, format!("missing column `{name}`")))
    };
    let idx: Vec<usize> = LABEL_COLUMNS.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(t.rows.len());
    for (line, cells) in &t.rows {
        let get = |k: usize| cells[idx[k]].trim();
        let os_days = parse_value(&t.path, *line, get(1))?;
        if !(os_days >= 0.0) {
            return Err(malformed(&t.path, *line, format!("os_days `{}` must be >= 0", get(1))));
        }
        let event = match get(2) {
            "1" => true,
            "0" => false,
            other => {
                return Err(malformed(&t.path, *line, format!("event `{other}` must be 0 or 1")))
            }
        };
        let age = parse_value(&t.path, *line, get(4))?;
        out.push(LabelRow {
            sample_id: get(0).to_string(),
            os_days,
            event,
            clinical: ClinicalRecord {
                sample_id: get(0).to_string(),
                age: (!age.is_nan()).then_some(age),
                gender: get(5).to_string(),
                race: get(6).to_string(),
                stage: get(7).to_string(),
                cancer_type: get(3).to_string(),
            },
        });
    }
    Ok(out)
}

/// Writes a modality table in the ingest format.
pub fn format_modality_tsv(sample_ids: &[String], features: &[String], rows: &[Vec<f32>]) -> String {
    let mut s = String::from("sample_id");
    for f in features {
        s.push('\t');
        s.push_str(f);
    }
    s.push('\n');
    for (id, row) in sample_ids.iter().zip(rows) {
        s.push_str(id);
        for v in row {
            s.push('\t');
            if v.is_nan() {
                s.push_str(MISSING);
            } else {
                s.push_str(&v.to_string());
            }
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn reads_missing_markers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gene_expression.tsv");
        fs::write(&p, "sample_id\ta\tb\ns1\t1.5\tNA\ns2\t\t2\n").unwrap();
        let t = read_modality_tsv(&p, Modality::GeneExpression).unwrap();
        assert_eq!(t.feature_names, vec!["a", "b"]);
        assert_eq!(t.value(0, 0), 1.5);
        assert!(t.value(0, 1).is_nan());
        assert!(t.value(1, 0).is_nan());
    }

    #[test]
    fn ragged_row_reports_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.tsv");
        fs::write(&p, "sample_id\ta\tb\ns1\t1\t2\ns2\t3\n").unwrap();
        match read_modality_tsv(&p, Modality::GeneExpression) {
            Err(Error::Malformed { path, line, .. }) => {
                assert_eq!(path, p);
                assert_eq!(line, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_number_and_duplicate_sample() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.tsv");
        fs::write(&p, "sample_id\ta\ns1\tabc\n").unwrap();
        assert!(matches!(
            read_modality_tsv(&p, Modality::GeneExpression),
            Err(Error::Malformed { line: 2, .. })
        ));
        fs::write(&p, "sample_id\ta\ns1\t1\ns1\t2\n").unwrap();
        assert!(matches!(
            read_modality_tsv(&p, Modality::GeneExpression),
            Err(Error::Ingestion(_))
        ));
    }

    #[test]
    fn labels_parse() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.tsv");
        fs::write(
            &p,
            "sample_id\tos_days\tevent\tcancer_type\tage\tgender\trace\tstage\n\
             s1\t100\t1\tTCGA-BRCA\t55\tfemale\twhite\tStage IIA\n\
             s2\t30.5\t0\tTCGA-BRCA\tNA\tmale\tNA\tNA\n",
        )
        .unwrap();
        let l = read_labels(&p).unwrap();
        assert_eq!(l.len(), 2);
        assert!(l[0].event && !l[1].event);
        assert_eq!(l[1].clinical.age, None);
        fs::write(&p, "sample_id\tos_days\n").unwrap();
        assert!(matches!(read_labels(&p), Err(Error::Malformed { line: 1, .. })));
    }
}
