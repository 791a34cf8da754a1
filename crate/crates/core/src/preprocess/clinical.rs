//! Clinical covariates and their integer code dictionaries.
//!
//! gender: male 0, female 1. race: white 0, asian 1, black 2, american
//! indian / alaska native 3, native hawaiian / pacific islander 4. stage:
//! 0, I, IA, IB, IC, II, IIA, IIB, IIC, III, IIIA, IIIB, IIIC, IV, IVA, IVB,
//! IVC → 0..=16. Unknown or not-reported categories map to −1.

use serde::{Deserialize, Serialize};

use super::{Modality, RawModalityTable};
use crate::error::{Error, Result};

/// The 33 primary-site cohorts, in class-id order.
pub const CANCER_TYPES: [&str; 33] = [
    "TCGA-ACC", "TCGA-BLCA", "TCGA-BRCA", "TCGA-CESC", "TCGA-CHOL", "TCGA-COAD", "TCGA-DLBC",
    "TCGA-ESCA", "TCGA-GBM", "TCGA-HNSC", "TCGA-KICH", "TCGA-KIRC", "TCGA-KIRP", "TCGA-LAML",
    "TCGA-LGG", "TCGA-LIHC", "TCGA-LUAD", "TCGA-LUSC", "TCGA-MESO", "TCGA-OV", "TCGA-PAAD",
    "TCGA-PCPG", "TCGA-PRAD", "TCGA-READ", "TCGA-SARC", "TCGA-SKCM", "TCGA-STAD", "TCGA-TGCT",
    "TCGA-THCA", "TCGA-THYM", "TCGA-UCEC", "TCGA-UCS", "TCGA-UVM",
];

const STAGES: [&str; 17] = [
    "0", "I", "IA", "IB", "IC", "II", "IIA", "IIB", "IIC", "III", "IIIA", "IIIB", "IIIC", "IV",
    "IVA", "IVB", "IVC",
];

const UNKNOWN: [&str; 7] = ["", "na", "nan", "unknown", "not reported", "not available", "--"];

pub const UNKNOWN_CODE: f64 = -1.0;

/// Class id of a cancer label; accepts `TCGA-XXX` or the bare `XXX`.
pub fn cancer_class(label: &str) -> Result<usize> {
    let upper = label.trim().to_ascii_uppercase();
    CANCER_TYPES
        .iter()
        .position(|c| *c == upper || c.strip_prefix("TCGA-") == Some(upper.as_str()))
        .ok_or_else(|| Error::Ingestion(format!("unknown cancer type `{label}`")))
}

fn is_unknown(s: &str) -> bool {
    UNKNOWN.contains(&s)
}

pub fn gender_code(raw: &str) -> Result<f64> {
    let s = raw.trim().to_ascii_lowercase();
    match s.as_str() {
        "male" | "m" => Ok(0.0),
        "female" | "f" => Ok(1.0),
        _ if is_unknown(&s) => Ok(UNKNOWN_CODE),
        _ => Err(Error::Ingestion(format!("unknown gender category `{raw}`"))),
    }
}

pub fn race_code(raw: &str) -> Result<f64> {
    let s = raw.trim().to_ascii_lowercase();
    match s.as_str() {
        "white" => Ok(0.0),
        "asian" => Ok(1.0),
        "black" | "black or african american" => Ok(2.0),
        "american indian" | "american indian or alaska native" | "alaska native" => Ok(3.0),
        "native hawaiian or other pacific islander" | "pacific islander" | "islander" => Ok(4.0),
        _ if is_unknown(&s) => Ok(UNKNOWN_CODE),
        _ => Err(Error::Ingestion(format!("unknown race category `{raw}`"))),
    }
}

pub fn stage_code(raw: &str) -> Result<f64> {
    let s = raw.trim().to_ascii_lowercase();
    if is_unknown(&s) {
        return Ok(UNKNOWN_CODE);
    }
    let bare = s.strip_prefix("stage").map_or(s.as_str(), str::trim).to_ascii_uppercase();
    STAGES
        .iter()
        .position(|st| *st == bare)
        .map(|i| i as f64)
        .ok_or_else(|| Error::Ingestion(format!("unknown stage category `{raw}`")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClinicalRecord {
    pub sample_id: String,
    /// Years; `None` when not recorded (imputed later).
    pub age: Option<f64>,
    pub gender: String,
    pub race: String,
    pub stage: String,
    pub cancer_type: String,
}

/// Numeric clinical block: `[age, gender, race, (stage)]`.
pub fn encode_clinical(records: &[ClinicalRecord], include_stage: bool) -> Result<RawModalityTable> {
    let mut names = vec!["age".to_string(), "gender".to_string(), "race".to_string()];
    if include_stage {
        names.push("stage".to_string());
    }
    let mut rows = Vec::with_capacity(records.len());
    for r in records {
        let age = match r.age {
            Some(a) if a < 0.0 => {
                return Err(Error::Ingestion(format!(
                    "negative age {a} for sample `{}`",
                    r.sample_id
                )))
            }
            Some(a) => a,
            None => f64::NAN,
        };
        cancer_class(&r.cancer_type)?;
        let mut row = vec![age, gender_code(&r.gender)?, race_code(&r.race)?];
        if include_stage {
            row.push(stage_code(&r.stage)?);
        }
        rows.push(row);
    }
    RawModalityTable::from_rows(
        Modality::Clinical,
        records.iter().map(|r| r.sample_id.clone()).collect(),
        names,
        &rows,
    )
}
