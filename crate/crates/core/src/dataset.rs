use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::SurvivalLabel;
use crate::math::Matrix;
use crate::preprocess::CANCER_TYPES;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    Survival,
    Classification,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Survival => "survival",
            Task::Classification => "classification",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "survival" => Ok(Task::Survival),
            "classification" => Ok(Task::Classification),
            other => Err(Error::Config(format!(
                "unknown task `{other}` (expected survival|classification)"
            ))),
        }
    }
}

/// Aligned design matrix with per-sample survival and class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct CohortDataset {
    pub x: Matrix,
    pub sample_ids: Vec<String>,
    pub cancer_types: Vec<String>,
    pub survival: Vec<SurvivalLabel>,
    pub classes: Vec<usize>,
    pub n_classes: usize,
}

impl CohortDataset {
    pub fn new(
        x: Matrix,
        sample_ids: Vec<String>,
        cancer_types: Vec<String>,
        survival: Vec<SurvivalLabel>,
        classes: Vec<usize>,
    ) -> Result<Self> {
        let n = x.rows();
        if [sample_ids.len(), cancer_types.len(), survival.len(), classes.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::Alignment(format!(
                "design matrix has {n} rows but label vectors differ in length"
            )));
        }
        if let Some(l) = survival.iter().find(|l| !(l.time >= 0.0)) {
            return Err(Error::Ingestion(format!("invalid survival time {}", l.time)));
        }
        Ok(Self {
            x,
            sample_ids,
            cancer_types,
            survival,
            classes,
            n_classes: CANCER_TYPES.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> CohortDataset {
        CohortDataset {
            x: self.x.select_rows(idx),
            sample_ids: idx.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            cancer_types: idx.iter().map(|&i| self.cancer_types[i].clone()).collect(),
            survival: idx.iter().map(|&i| self.survival[i]).collect(),
            classes: idx.iter().map(|&i| self.classes[i]).collect(),
            n_classes: self.n_classes,
        }
    }

    pub fn events(&self) -> Vec<bool> {
        self.survival.iter().map(|l| l.event).collect()
    }
}
