//! Feature reduction per cohort, then union and concatenation across
//! cohorts and modalities.
//!
//! Stage order is fixed: all-missing drop → quasi-constant → duplicates →
//! variance → expression floor (gene expression only) → mean imputation →
//! union → concatenation.

mod clinical;
mod filters;
mod table;
mod union;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use clinical::{
    cancer_class, encode_clinical, gender_code, race_code, stage_code, ClinicalRecord,
    CANCER_TYPES, UNKNOWN_CODE,
};
pub use filters::{
    drop_all_nan_features, drop_duplicate_features, drop_quasi_constant,
    expression_floor_filter, feature_variance, impute_mean_within_group, variance_filter,
    DropReason, Filtered,
};
pub use table::{Modality, RawModalityTable};
pub use union::{concat_modalities, union_modality, ModalityBlock, ModalitySlice};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub quasi_constant_tol: f64,
    /// Fallback for modalities without an explicit entry.
    pub variance_threshold: f64,
    pub variance_overrides: BTreeMap<Modality, f64>,
    pub expression_floor: f64,
    pub include_clinical: bool,
    pub include_stage: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            quasi_constant_tol: 0.998,
            variance_threshold: 0.25,
            variance_overrides: BTreeMap::new(),
            expression_floor: 7.0,
            include_clinical: true,
            include_stage: true,
        }
    }
}

impl PreprocessConfig {
    pub fn variance_threshold_for(&self, m: Modality) -> f64 {
        self.variance_overrides
            .get(&m)
            .copied()
            .unwrap_or(self.variance_threshold)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.quasi_constant_tol > 0.0 && self.quasi_constant_tol <= 1.0) {
            return Err(Error::Config(format!(
                "quasi_constant_tol {} outside (0, 1]",
                self.quasi_constant_tol
            )));
        }
        let bad = std::iter::once(self.variance_threshold)
            .chain(self.variance_overrides.values().copied())
            .find(|v| !(*v >= 0.0));
        if let Some(v) = bad {
            return Err(Error::Config(format!("variance threshold {v} must be >= 0")));
        }
        Ok(())
    }
}

/// Features removed from one cohort's modality by one stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub cancer: String,
    pub modality: Modality,
    pub reason: DropReason,
    pub features: Vec<String>,
}

/// Runs the per-cohort stages on one table.
pub fn reduce_table(
    cancer: &str,
    t: &RawModalityTable,
    cfg: &PreprocessConfig,
) -> Result<(RawModalityTable, Vec<DropRecord>)> {
    let mut ledger = Vec::new();
    let mut record = |f: Filtered| {
        if !f.dropped.is_empty() {
            ledger.push(DropRecord {
                cancer: cancer.to_string(),
                modality: t.modality,
                reason: f.reason,
                features: f.dropped,
            });
        }
        f.table
    };
    let mut cur = record(drop_all_nan_features(t));
    if t.modality != Modality::Clinical {
        cur = record(drop_quasi_constant(&cur, cfg.quasi_constant_tol)?);
        cur = record(drop_duplicate_features(&cur));
        cur = record(variance_filter(&cur, cfg.variance_threshold_for(t.modality))?);
        if t.modality == Modality::GeneExpression {
            cur = record(expression_floor_filter(&cur, cfg.expression_floor)?);
        }
    }
    let imputed = impute_mean_within_group(&cur)?;
    Ok((imputed, ledger))
}
