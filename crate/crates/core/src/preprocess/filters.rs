//! Per-cohort feature reduction stages. Every stage keeps the surviving
//! features in their original order and is idempotent.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Modality, RawModalityTable};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    AllMissing,
    QuasiConstant,
    Duplicate,
    LowVariance,
    BelowExpressionFloor,
}

/// Output of a filter: the reduced table plus the names it removed.
#[derive(Clone, Debug)]
pub struct Filtered {
    pub table: RawModalityTable,
    pub dropped: Vec<String>,
    pub reason: DropReason,
}

fn apply(t: &RawModalityTable, keep: Vec<bool>, reason: DropReason) -> Filtered {
    let dropped = keep
        .iter()
        .zip(&t.feature_names)
        .filter(|(k, _)| !**k)
        .map(|(_, n)| n.clone())
        .collect();
    Filtered {
        table: t.retain_features(&keep),
        dropped,
        reason,
    }
}

fn present(col: &[f64]) -> impl Iterator<Item = f64> + '_ {
    col.iter().copied().filter(|v| !v.is_nan())
}

/// Hashable identity of a value; all NaNs compare equal, −0 equals +0.
fn value_key(v: f64) -> u64 {
    if v.is_nan() {
        u64::MAX
    } else if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

pub fn drop_all_nan_features(t: &RawModalityTable) -> Filtered {
    let keep = t
        .columns()
        .iter()
        .map(|c| c.iter().any(|v| !v.is_nan()))
        .collect();
    apply(t, keep, DropReason::AllMissing)
}

/// Drops a feature when its most frequent non-missing value accounts for at
/// least `tol` of its non-missing entries.
pub fn drop_quasi_constant(t: &RawModalityTable, tol: f64) -> Result<Filtered> {
    if !(tol > 0.0 && tol <= 1.0) {
        return Err(Error::Parameter(format!(
            "quasi-constant tolerance {tol} outside (0, 1]"
        )));
    }
    let keep = t
        .columns()
        .iter()
        .map(|c| {
            let mut counts: HashMap<u64, usize> = HashMap::new();
            let mut n = 0usize;
            for v in present(c) {
                *counts.entry(value_key(v)).or_default() += 1;
                n += 1;
            }
            if n == 0 {
                return true;
            }
            let modal = counts.values().copied().max().unwrap_or(0);
            (modal as f64 / n as f64) < tol
        })
        .collect();
    Ok(apply(t, keep, DropReason::QuasiConstant))
}

/// Among identical columns (missing equals missing) keeps the first.
pub fn drop_duplicate_features(t: &RawModalityTable) -> Filtered {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let keep = t
        .columns()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let key: Vec<u64> = c.iter().map(|&v| value_key(v)).collect();
            *seen.entry(key).or_insert(j) == j
        })
        .collect();
    apply(t, keep, DropReason::Duplicate)
}

/// Population variance of the non-missing entries.
pub fn feature_variance(col: &[f64]) -> f64 {
    let (n, sum) = present(col).fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    present(col).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
}

/// Drops features with variance ≤ `threshold`.
pub fn variance_filter(t: &RawModalityTable, threshold: f64) -> Result<Filtered> {
    if !(threshold >= 0.0) {
        return Err(Error::Parameter(format!(
            "variance threshold {threshold} must be non-negative"
        )));
    }
    let keep = t
        .columns()
        .iter()
        .map(|c| feature_variance(c) > threshold)
        .collect();
    Ok(apply(t, keep, DropReason::LowVariance))
}

/// Keeps a gene iff its largest value is strictly greater than `floor`.
pub fn expression_floor_filter(t: &RawModalityTable, floor: f64) -> Result<Filtered> {
    if t.modality != Modality::GeneExpression {
        return Err(Error::Contract(format!(
            "expression floor applies to gene expression only, got {}",
            t.modality
        )));
    }
    let keep = t
        .columns()
        .iter()
        .map(|c| present(c).any(|v| v > floor))
        .collect();
    Ok(apply(t, keep, DropReason::BelowExpressionFloor))
}

/// Replaces missing entries with the feature's mean over this cohort.
pub fn impute_mean_within_group(t: &RawModalityTable) -> Result<RawModalityTable> {
    let mut out = t.clone();
    let names = t.feature_names.clone();
    for (j, col) in out.columns_mut().iter_mut().enumerate() {
        if !col.iter().any(|v| v.is_nan()) {
            continue;
        }
        let (n, sum) = present(col).fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
        if n == 0 {
            return Err(Error::PipelineOrder(format!(
                "feature `{}` is entirely missing; all-missing features must be dropped before imputation",
                names[j]
            )));
        }
        let mean = sum / n as f64;
        for v in col.iter_mut().filter(|v| v.is_nan()) {
            *v = mean;
        }
    }
    Ok(out)
}
