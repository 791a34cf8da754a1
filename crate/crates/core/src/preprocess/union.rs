use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{Modality, RawModalityTable};
use crate::error::{Error, Result};
use crate::math::Matrix;

/// One modality after the cross-cohort union, rows aligned to `sample_ids`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalitySlice {
    pub modality: Modality,
    pub feature_names: Vec<String>,
    pub sample_ids: Vec<String>,
    pub values: Matrix,
}

/// Location of one modality's block inside the concatenated feature vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalityBlock {
    pub modality: Modality,
    pub offset: usize,
    pub width: usize,
    pub feature_names: Vec<String>,
}

/// Unions per-cohort tables of one modality. Cohorts are visited in
/// alphabetical label order; the feature order is first-seen. Features a
/// cohort lacks are filled with exactly 0.0 for its samples.
pub fn union_modality(tables: &[(String, RawModalityTable)]) -> Result<ModalitySlice> {
    let first = tables
        .first()
        .ok_or_else(|| Error::Contract("union of zero tables".into()))?;
    let modality = first.1.modality;
    if let Some((c, t)) = tables.iter().find(|(_, t)| t.modality != modality) {
        return Err(Error::Contract(format!(
            "cohort {c} contributes {} to a {modality} union",
            t.modality
        )));
    }
    let mut order: Vec<usize> = (0..tables.len()).collect();
    order.sort_by(|&a, &b| tables[a].0.cmp(&tables[b].0));

    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for &k in &order {
        for f in &tables[k].1.feature_names {
            if !index.contains_key(f) {
                index.insert(f.clone(), names.len());
                names.push(f.clone());
            }
        }
    }

    let n_rows: usize = tables.iter().map(|(_, t)| t.n_samples()).sum();
    let mut values = Matrix::zeros(n_rows, names.len());
    let mut sample_ids = Vec::with_capacity(n_rows);
    let mut seen = HashSet::with_capacity(n_rows);
    for &k in &order {
        let (cancer, t) = &tables[k];
        let cols: Vec<usize> = t.feature_names.iter().map(|f| index[f]).collect();
        for (i, sid) in t.sample_ids.iter().enumerate() {
            if !seen.insert(sid.clone()) {
                return Err(Error::Ingestion(format!(
                    "sample `{sid}` appears in more than one cohort ({cancer} and an earlier one) for {modality}"
                )));
            }
            let r = sample_ids.len();
            let row = values.row_mut(r);
            for (j, &c) in cols.iter().enumerate() {
                row[c] = t.value(i, j);
            }
            sample_ids.push(sid.clone());
        }
    }
    Ok(ModalitySlice {
        modality,
        feature_names: names,
        sample_ids,
        values,
    })
}

/// Concatenates modality slices into one design matrix whose rows follow
/// `sample_order`. A sample absent from a slice gets an all-zero block.
pub fn concat_modalities(
    sample_order: &[String],
    slices: &[ModalitySlice],
) -> Result<(Matrix, Vec<ModalityBlock>)> {
    let row_of: HashMap<&str, usize> = sample_order
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    if row_of.len() != sample_order.len() {
        return Err(Error::Alignment("duplicate sample in sample order".into()));
    }
    let mut blocks = Vec::with_capacity(slices.len());
    let mut offset = 0;
    for s in slices {
        blocks.push(ModalityBlock {
            modality: s.modality,
            offset,
            width: s.feature_names.len(),
            feature_names: s.feature_names.clone(),
        });
        offset += s.feature_names.len();
    }
    let mut x = Matrix::zeros(sample_order.len(), offset);
    for (s, block) in slices.iter().zip(&blocks) {
        for (i, sid) in s.sample_ids.iter().enumerate() {
            let r = *row_of.get(sid.as_str()).ok_or_else(|| {
                Error::Alignment(format!(
                    "sample `{sid}` in {} is not in the cohort sample order",
                    s.modality
                ))
            })?;
            x.row_mut(r)[block.offset..block.offset + block.width]
                .copy_from_slice(s.values.row(i));
        }
    }
    Ok((x, blocks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(m: Modality, samples: &[&str], feats: &[&str], rows: &[Vec<f64>]) -> RawModalityTable {
        RawModalityTable::from_rows(
            m,
            samples.iter().map(|s| s.to_string()).collect(),
            feats.iter().map(|s| s.to_string()).collect(),
            rows,
        )
        .unwrap()
    }

    #[test]
    fn union_zero_pads() {
        let m = Modality::MirnaExpression;
        let a = t(m, &["x1"], &["a", "b"], &[vec![1.0, 2.0]]);
        let b = t(m, &["y1"], &["b", "c"], &[vec![3.0, 4.0]]);
        // Given out of label order on purpose.
        let u = union_modality(&[("TCGA-B".into(), b), ("TCGA-A".into(), a)]).unwrap();
        assert_eq!(u.feature_names, vec!["a", "b", "c"]);
        assert_eq!(u.sample_ids, vec!["x1", "y1"]);
        assert_eq!(u.values.row(0), &[1.0, 2.0, 0.0]);
        assert_eq!(u.values.row(1), &[0.0, 3.0, 4.0]);
    }

    #[test]
    fn single_cohort_identity() {
        let m = Modality::DnaMethylation;
        let a = t(m, &["x1", "x2"], &["p", "q"], &[vec![0.1, 0.2], vec![0.3, 0.4]]);
        let u = union_modality(&[("C".into(), a.clone())]).unwrap();
        assert_eq!(u.feature_names, a.feature_names);
        assert_eq!(u.values.data(), &[0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn disjoint_union_adds_widths() {
        let m = Modality::ProteinExpression;
        let a = t(m, &["x"], &["a", "b"], &[vec![1.0, 1.0]]);
        let b = t(m, &["y"], &["c", "d", "e"], &[vec![1.0, 1.0, 1.0]]);
        let u = union_modality(&[("A".into(), a), ("B".into(), b)]).unwrap();
        assert_eq!(u.feature_names.len(), 5);
    }

    #[test]
    fn duplicate_sample_across_cohorts() {
        let m = Modality::ProteinExpression;
        let a = t(m, &["x"], &["a"], &[vec![1.0]]);
        let b = t(m, &["x"], &["a"], &[vec![2.0]]);
        assert!(matches!(
            union_modality(&[("A".into(), a), ("B".into(), b)]),
            Err(Error::Ingestion(_))
        ));
    }

    fn slice(m: Modality, samples: &[&str], width: usize) -> ModalitySlice {
        ModalitySlice {
            modality: m,
            feature_names: (0..width).map(|j| format!("{m}_{j}")).collect(),
            sample_ids: samples.iter().map(|s| s.to_string()).collect(),
            values: Matrix::filled(samples.len(), width, 1.0),
        }
    }

    #[test]
    fn concat_widths_and_missing_blocks() {
        let order: Vec<String> = vec!["s1".into(), "s2".into()];
        let slices = [
            slice(Modality::GeneExpression, &["s1", "s2"], 4),
            slice(Modality::ProteinExpression, &["s1"], 3),
            slice(Modality::DnaMutation, &["s2", "s1"], 2),
        ];
        let (x, blocks) = concat_modalities(&order, &slices).unwrap();
        assert_eq!(x.cols(), 9);
        assert_eq!(blocks[1].offset, 4);
        assert_eq!(blocks[2].offset, 7);
        assert_eq!(&x.row(1)[4..7], &[0.0, 0.0, 0.0]);
        assert_eq!(&x.row(0)[4..7], &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn concat_unknown_sample_is_alignment_error() {
        let order: Vec<String> = vec!["s1".into()];
        let slices = [slice(Modality::GeneExpression, &["zz"], 2)];
        assert!(matches!(concat_modalities(&order, &slices), Err(Error::Alignment(_))));
    }
}
