use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    GeneExpression,
    DnaMethylation,
    MirnaExpression,
    ProteinExpression,
    DnaMutation,
    Clinical,
}

impl Modality {
    /// Canonical concatenation order.
    pub const ALL: [Modality; 6] = [
        Modality::GeneExpression,
        Modality::DnaMethylation,
        Modality::MirnaExpression,
        Modality::ProteinExpression,
        Modality::DnaMutation,
        Modality::Clinical,
    ];

    /// Modalities read from `<cancer>/<name>.tsv`.
    pub const MOLECULAR: [Modality; 5] = [
        Modality::GeneExpression,
        Modality::DnaMethylation,
        Modality::MirnaExpression,
        Modality::ProteinExpression,
        Modality::DnaMutation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Modality::GeneExpression => "gene_expression",
            Modality::DnaMethylation => "dna_methylation",
            Modality::MirnaExpression => "mirna_expression",
            Modality::ProteinExpression => "protein_expression",
            Modality::DnaMutation => "dna_mutation",
            Modality::Clinical => "clinical",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Modality::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Ingestion(format!("unknown modality `{s}`")))
    }
}

/// One modality's samples × features block for a single cancer cohort.
///
/// Values are stored column-major; a missing entry is `NaN`.
#[derive(Clone, Debug, PartialEq)]
pub struct RawModalityTable {
    pub modality: Modality,
    pub sample_ids: Vec<String>,
    pub feature_names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl RawModalityTable {
    pub fn new(
        modality: Modality,
        sample_ids: Vec<String>,
        feature_names: Vec<String>,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if feature_names.len() != columns.len() {
            return Err(Error::Shape(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                columns.len()
            )));
        }
        if let Some((j, _)) = columns
            .iter()
            .enumerate()
            .find(|(_, c)| c.len() != sample_ids.len())
        {
            return Err(Error::Shape(format!(
                "column `{}` has {} entries for {} samples",
                feature_names[j],
                columns[j].len(),
                sample_ids.len()
            )));
        }
        check_unique(&sample_ids, "sample id")?;
        check_unique(&feature_names, "feature name")?;
        Ok(Self {
            modality,
            sample_ids,
            feature_names,
            columns,
        })
    }

    /// Builds from sample-major rows.
    pub fn from_rows(
        modality: Modality,
        sample_ids: Vec<String>,
        feature_names: Vec<String>,
        rows: &[Vec<f64>],
    ) -> Result<Self> {
        let mut columns = vec![Vec::with_capacity(rows.len()); feature_names.len()];
        for (i, r) in rows.iter().enumerate() {
            if r.len() != feature_names.len() {
                return Err(Error::Shape(format!(
                    "row {i} has {} values for {} features",
                    r.len(),
                    feature_names.len()
                )));
            }
            for (c, &v) in columns.iter_mut().zip(r) {
                c.push(v);
            }
        }
        Self::new(modality, sample_ids, feature_names, columns)
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn value(&self, sample: usize, feature: usize) -> f64 {
        self.columns[feature][sample]
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().flatten().any(|v| v.is_nan())
    }

    /// Keeps the features whose flag is set, in order.
    pub(crate) fn retain_features(&self, keep: &[bool]) -> RawModalityTable {
        let mut names = Vec::new();
        let mut cols = Vec::new();
        for (j, &k) in keep.iter().enumerate() {
            if k {
                names.push(self.feature_names[j].clone());
                cols.push(self.columns[j].clone());
            }
        }
        RawModalityTable {
            modality: self.modality,
            sample_ids: self.sample_ids.clone(),
            feature_names: names,
            columns: cols,
        }
    }

    pub(crate) fn columns_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.columns
    }
}

fn check_unique(items: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(items.len());
    for s in items {
        if !seen.insert(s.as_str()) {
            return Err(Error::Ingestion(format!("duplicate {what} `{s}`")));
        }
    }
    Ok(())
}
