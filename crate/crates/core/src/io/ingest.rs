//! Directory ingestion: `<data_dir>/<cancer>/<modality>.tsv` plus
//! `<data_dir>/<cancer>/labels.tsv`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::design::{write_dataset, Manifest, SampleInfo};
use super::tsv::{read_labels, read_modality_tsv, LabelRow};
use super::SCHEMA_VERSION;
use crate::dataset::CohortDataset;
use crate::error::{Error, Result};
use crate::losses::SurvivalLabel;
use crate::math::Matrix;
use crate::preprocess::{
    cancer_class, concat_modalities, encode_clinical, reduce_table, union_modality, Modality,
    PreprocessConfig, RawModalityTable,
};

pub const LABELS_FILE: &str = "labels.tsv";

#[derive(Clone, Debug)]
pub struct Ingested {
    pub x: Matrix,
    pub manifest: Manifest,
}

impl Ingested {
    pub fn dataset(&self) -> Result<CohortDataset> {
        let s = &self.manifest.samples;
        CohortDataset::new(
            self.x.clone(),
            s.iter().map(|i| i.id.clone()).collect(),
            s.iter().map(|i| i.cancer_type.clone()).collect(),
            s.iter().map(|i| SurvivalLabel::new(i.os_days, i.event)).collect(),
            s.iter().map(|i| i.class).collect(),
        )
    }
}

struct Cohort {
    name: String,
    labels: Vec<LabelRow>,
    tables: Vec<(Modality, PathBuf)>,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<_>>()?;
    v.sort();
    Ok(v)
}

fn scan(data_dir: &Path) -> Result<Vec<Cohort>> {
    let mut cohorts = Vec::new();
    for dir in sorted_entries(data_dir)?.into_iter().filter(|p| p.is_dir()) {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut tables = Vec::new();
        let mut labels = None;
        for f in sorted_entries(&dir)? {
            if f.extension().and_then(|e| e.to_str()) != Some("tsv") {
                continue;
            }
            let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            if f.file_name().and_then(|s| s.to_str()) == Some(LABELS_FILE) {
                labels = Some(read_labels(&f)?);
                continue;
            }
            match stem.parse::<Modality>() {
                Ok(Modality::Clinical) => {
                    return Err(Error::Ingestion(format!(
                        "{}: clinical covariates are read from {LABELS_FILE}",
                        f.display()
                    )))
                }
                Ok(m) => tables.push((m, f)),
                Err(_) => {
                    return Err(Error::Ingestion(format!(
                        "{}: unknown modality file name `{stem}`",
                        f.display()
                    )))
                }
            }
        }
        if tables.is_empty() && labels.is_none() {
            continue;
        }
        let labels = labels.ok_or_else(|| {
            Error::Ingestion(format!("{} has no {LABELS_FILE}", dir.display()))
        })?;
        cohorts.push(Cohort {
            name,
            labels,
            tables,
        });
    }
    if cohorts.iter().all(|c| c.tables.is_empty()) {
        return Err(Error::Ingestion(format!(
            "no modalities found in {}",
            data_dir.display()
        )));
    }
    Ok(cohorts)
}

/// Reads, reduces, unions and concatenates every cohort under `data_dir`.
pub fn ingest(data_dir: &Path, cfg: &PreprocessConfig) -> Result<Ingested> {
    cfg.validate()?;
    let cohorts = scan(data_dir)?;
    let mut per_modality: BTreeMap<Modality, Vec<(String, RawModalityTable)>> = BTreeMap::new();
    let mut dropped = Vec::new();
    let mut samples = Vec::new();
    for c in &cohorts {
        for l in &c.labels {
            samples.push(SampleInfo {
                id: l.sample_id.clone(),
                cancer_type: l.clinical.cancer_type.clone(),
                class: cancer_class(&l.clinical.cancer_type)?,
                os_days: l.os_days,
                event: l.event,
            });
        }
        let mut tables = Vec::with_capacity(c.tables.len() + 1);
        for (m, path) in &c.tables {
            tables.push(read_modality_tsv(path, *m)?);
        }
        if cfg.include_clinical {
            let records: Vec<_> = c.labels.iter().map(|l| l.clinical.clone()).collect();
            tables.push(encode_clinical(&records, cfg.include_stage)?);
        }
        for t in tables {
            let (reduced, ledger) = reduce_table(&c.name, &t, cfg)?;
            dropped.extend(ledger);
            per_modality
                .entry(t.modality)
                .or_default()
                .push((c.name.clone(), reduced));
        }
    }
    let order: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let slices = Modality::ALL
        .iter()
        .filter_map(|m| per_modality.get(m))
        .map(|tables| union_modality(tables))
        .collect::<Result<Vec<_>>>()?;
    let (x, blocks) = concat_modalities(&order, &slices)?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        n_samples: x.rows(),
        n_features: x.cols(),
        cancers: cohorts.iter().map(|c| c.name.clone()).collect(),
        blocks,
        samples,
        dropped,
        preprocess: cfg.clone(),
    };
    Ok(Ingested { x, manifest })
}

/// [`ingest`] followed by an atomic write of `design.bin` and `manifest.json`.
pub fn ingest_to(data_dir: &Path, out_dir: &Path, cfg: &PreprocessConfig) -> Result<Ingested> {
    let ing = ingest(data_dir, cfg)?;
    write_dataset(out_dir, &ing.x, &ing.manifest)?;
    Ok(ing)
}
