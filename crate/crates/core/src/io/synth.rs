//! Synthetic cohorts in the ingest layout, with known ground truth.
//!
//! Survival mode: `x ~ N(0, I)`, risk `r = x·w` with `nonzero` entries of
//! `w` equal to `±hazard_scale·RISK_SD_PER_SCALE/√nonzero`, so that
//! `sd(r) ≈ RISK_SD_PER_SCALE·hazard_scale`. Event time `~ Exp(e^r)`,
//! censoring time `~ Exp(μ)` with `μ` solved so the expected censored
//! fraction equals `censoring_rate`.
//!
//! Classification mode: class `c` has mean `separation·e_c`.

use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::tsv::{format_modality_tsv, LABEL_COLUMNS};
use super::{atomic_write, write_json};
use crate::dataset::Task;
use crate::error::{Error, Result};
use crate::losses::SurvivalLabel;
use crate::math::Matrix;
use crate::preprocess::{Modality, CANCER_TYPES};

pub const RISK_SD_PER_SCALE: f64 = 1.5;
pub const ORACLE_FILE: &str = "oracle_risk.tsv";
pub const SPEC_FILE: &str = "synth_spec.json";
const DAYS_PER_UNIT: f64 = 365.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub mode: Task,
    pub n_samples: usize,
    pub modalities: Vec<(Modality, usize)>,
    pub nonzero: usize,
    pub hazard_scale: f64,
    pub censoring_rate: f64,
    pub n_classes: usize,
    pub separation: f64,
    /// Survival mode only; classification uses one cohort per class.
    pub n_cancers: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            mode: Task::Survival,
            n_samples: 2000,
            modalities: vec![
                (Modality::DnaMethylation, 200),
                (Modality::MirnaExpression, 200),
                (Modality::ProteinExpression, 100),
            ],
            nonzero: 20,
            hazard_scale: 1.0,
            censoring_rate: 0.3,
            n_classes: 33,
            separation: 6.0,
            n_cancers: 2,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn n_features(&self) -> usize {
        self.modalities.iter().map(|(_, w)| w).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be >= 1".into()));
        }
        if self.modalities.is_empty() || self.modalities.iter().any(|(_, w)| *w == 0) {
            return Err(Error::Config("every synthetic modality needs width >= 1".into()));
        }
        if self.modalities.iter().any(|(m, _)| *m == Modality::Clinical) {
            return Err(Error::Config("clinical is not a synthetic modality".into()));
        }
        for (i, (m, _)) in self.modalities.iter().enumerate() {
            if self.modalities[..i].iter().any(|(o, _)| o == m) {
                return Err(Error::Config(format!("modality {m} listed twice")));
            }
        }
        if !(0.0..1.0).contains(&self.censoring_rate) {
            return Err(Error::Config(format!(
                "censoring_rate {} outside [0, 1)",
                self.censoring_rate
            )));
        }
        if !(self.hazard_scale >= 0.0 && self.hazard_scale.is_finite()) {
            return Err(Error::Config("hazard_scale must be finite and >= 0".into()));
        }
        match self.mode {
            Task::Survival => {
                if self.nonzero == 0 || self.nonzero > self.n_features() {
                    return Err(Error::Config(format!(
                        "nonzero {} outside [1, {}]",
                        self.nonzero,
                        self.n_features()
                    )));
                }
                if self.n_cancers == 0 || self.n_cancers > CANCER_TYPES.len() {
                    return Err(Error::Config(format!("n_cancers {} outside [1, 33]", self.n_cancers)));
                }
            }
            Task::Classification => {
                if self.n_classes < 2 || self.n_classes > CANCER_TYPES.len() {
                    return Err(Error::Config(format!("n_classes {} outside [2, 33]", self.n_classes)));
                }
                if self.n_classes > self.n_features() {
                    return Err(Error::Config(format!(
                        "{} classes need at least as many features, have {}",
                        self.n_classes,
                        self.n_features()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    /// Values already rounded to f32, as written to disk.
    pub x: Matrix,
    pub risk: Vec<f64>,
    pub survival: Vec<SurvivalLabel>,
    pub classes: Vec<usize>,
    pub sample_ids: Vec<String>,
}

/// Censoring rate `μ` with `mean(μ / (μ + e^r)) = target`.
fn censoring_rate_for(risk: &[f64], target: f64) -> f64 {
    let frac = |log_mu: f64| {
        let mu = log_mu.exp();
        risk.iter().map(|r| mu / (mu + r.exp())).sum::<f64>() / risk.len() as f64
    };
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if frac(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

pub fn generate(spec: &SyntheticSpec) -> Result<SynthData> {
    spec.validate()?;
    let n = spec.n_samples;
    let d = spec.n_features();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let classes: Vec<usize> = match spec.mode {
        Task::Survival => (0..n).map(|i| i % spec.n_cancers).collect(),
        Task::Classification => (0..n).map(|i| i % spec.n_classes).collect(),
    };
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        for j in 0..d {
            let mut v: f64 = rng.sample(StandardNormal);
            if spec.mode == Task::Classification && j == classes[i] {
                v += spec.separation;
            }
            data.push(v as f32 as f64);
        }
    }
    let x = Matrix::from_vec(n, d, data)?;

    let risk = match spec.mode {
        Task::Survival => {
            let idx = sample(&mut rng, d, spec.nonzero);
            let mag = spec.hazard_scale * RISK_SD_PER_SCALE / (spec.nonzero as f64).sqrt();
            let mut w = vec![0.0; d];
            for j in idx.iter() {
                w[j] = if rng.random::<bool>() { mag } else { -mag };
            }
            (0..n)
                .map(|i| x.row(i).iter().zip(&w).map(|(a, b)| a * b).sum())
                .collect()
        }
        Task::Classification => vec![0.0; n],
    };
    let mu = (spec.censoring_rate > 0.0).then(|| censoring_rate_for(&risk, spec.censoring_rate));
    let survival = risk
        .iter()
        .map(|r: &f64| {
            let e1: f64 = rng.sample(Exp1);
            let e2: f64 = rng.sample(Exp1);
            let t_event = e1 / r.exp();
            match mu {
                Some(mu) if e2 / mu < t_event => SurvivalLabel::new(e2 / mu * DAYS_PER_UNIT, false),
                _ => SurvivalLabel::new(t_event * DAYS_PER_UNIT, true),
            }
        })
        .collect();
    Ok(SynthData {
        x,
        risk,
        survival,
        classes,
        sample_ids: (0..n).map(|i| format!("S{i:05}")).collect(),
    })
}

/// Generates and writes the cohort directories, `oracle_risk.tsv` and
/// `synth_spec.json` under `out_dir`.
pub fn write_synth(spec: &SyntheticSpec, out_dir: &Path) -> Result<SynthData> {
    let data = generate(spec)?;
    let n_cohorts = match spec.mode {
        Task::Survival => spec.n_cancers,
        Task::Classification => spec.n_classes,
    };
    for cohort in 0..n_cohorts {
        let cancer = CANCER_TYPES[cohort];
        let dir = out_dir.join(cancer);
        let members: Vec<usize> = (0..spec.n_samples).filter(|&i| data.classes[i] == cohort).collect();
        let ids: Vec<String> = members.iter().map(|&i| data.sample_ids[i].clone()).collect();
        let mut offset = 0;
        for (m, width) in &spec.modalities {
            let names: Vec<String> = (0..*width).map(|j| format!("{}_{j:04}", m.name())).collect();
            let rows: Vec<Vec<f32>> = members
                .iter()
                .map(|&i| data.x.row(i)[offset..offset + width].iter().map(|&v| v as f32).collect())
                .collect();
            atomic_write(
                &dir.join(format!("{}.tsv", m.name())),
                format_modality_tsv(&ids, &names, &rows).as_bytes(),
            )?;
            offset += width;
        }
        let mut labels = LABEL_COLUMNS.join("\t");
        labels.push('\n');
        for &i in &members {
            let l = data.survival[i];
            let gender = if (i / n_cohorts) % 2 == 0 { "female" } else { "male" };
            labels.push_str(&format!(
                "{}\t{}\t{}\t{cancer}\tNA\t{gender}\tNA\tNA\n",
                data.sample_ids[i],
                l.time,
                u8::from(l.event)
            ));
        }
        atomic_write(&dir.join(super::ingest::LABELS_FILE), labels.as_bytes())?;
    }
    let mut oracle = String::from("sample_id\trisk\n");
    for (id, r) in data.sample_ids.iter().zip(&data.risk) {
        oracle.push_str(&format!("{id}\t{r}\n"));
    }
    atomic_write(&out_dir.join(ORACLE_FILE), oracle.as_bytes())?;
    write_json(&out_dir.join(SPEC_FILE), spec)?;
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            n_samples: 300,
            modalities: vec![(Modality::DnaMethylation, 20), (Modality::ProteinExpression, 10)],
            nonzero: 5,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn zero_censoring_means_all_events() {
        let d = generate(&SyntheticSpec {
            censoring_rate: 0.0,
            ..small()
        })
        .unwrap();
        assert!(d.survival.iter().all(|l| l.event));
    }

    #[test]
    fn censoring_fraction_near_target() {
        let d = generate(&SyntheticSpec {
            n_samples: 4000,
            ..small()
        })
        .unwrap();
        let frac = d.survival.iter().filter(|l| !l.event).count() as f64 / 4000.0;
        assert!((frac - 0.3).abs() < 0.03, "{frac}");
    }

    #[test]
    fn same_seed_same_data() {
        assert_eq!(generate(&small()).unwrap(), generate(&small()).unwrap());
        let other = SyntheticSpec { seed: 1, ..small() };
        assert_ne!(generate(&small()).unwrap().x, generate(&other).unwrap().x);
    }

    #[test]
    fn oracle_risk_concordance_near_080() {
        let d = generate(&SyntheticSpec::default()).unwrap();
        let c = crate::metrics::concordance_index(&d.risk, &d.survival).unwrap();
        assert!((c - 0.80).abs() <= 0.03, "{c}");
    }

    #[test]
    fn nearest_mean_separates_classes() {
        let spec = SyntheticSpec {
            mode: Task::Classification,
            n_samples: 3300,
            modalities: vec![(Modality::GeneExpression, 64)],
            ..SyntheticSpec::default()
        };
        let d = generate(&spec).unwrap();
        // Class k has mean `separation` on axis k and 0 elsewhere.
        let correct = (0..d.x.rows())
            .filter(|&i| {
                let row = d.x.row(i);
                let dist = |k: usize| -> f64 {
                    row.iter()
                        .enumerate()
                        .map(|(j, v)| {
                            let m = if j == k { spec.separation } else { 0.0 };
                            (v - m) * (v - m)
                        })
                        .sum()
                };
                let best = (0..spec.n_classes)
                    .min_by(|&a, &b| dist(a).total_cmp(&dist(b)))
                    .unwrap();
                best == d.classes[i]
            })
            .count();
        let acc = correct as f64 / d.x.rows() as f64;
        assert!(acc >= 0.999, "{acc}");
    }

    #[test]
    fn same_spec_same_files() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        write_synth(&small(), a.path()).unwrap();
        write_synth(&small(), b.path()).unwrap();
        let files = |root: &Path| {
            let mut out = Vec::new();
            let mut stack = vec![root.to_path_buf()];
            while let Some(d) = stack.pop() {
                for e in std::fs::read_dir(&d).unwrap() {
                    let p = e.unwrap().path();
                    if p.is_dir() {
                        stack.push(p);
                    } else {
                        out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
                    }
                }
            }
            out.sort();
            out
        };
        let fa = files(a.path());
        assert!(fa.len() >= 8);
        assert_eq!(fa, files(b.path()));
    }

    #[test]
    fn invalid_specs() {
        for bad in [
            SyntheticSpec { censoring_rate: 1.0, ..small() },
            SyntheticSpec { modalities: vec![(Modality::DnaMethylation, 0)], ..small() },
            SyntheticSpec { nonzero: 31, ..small() },
            SyntheticSpec { mode: Task::Classification, n_classes: 33, ..small() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }
}
