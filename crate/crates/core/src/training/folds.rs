use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StratifyKey {
    #[default]
    None,
    Event,
    Class,
}

/// Partition of `0..n` into `k` validation folds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n: usize,
    pub k: usize,
    pub stratify: StratifyKey,
    pub folds: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
}

impl FoldPlan {
    pub fn validation(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Every index outside `fold`, ascending.
    pub fn training(&self, fold: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != fold)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        idx.sort_unstable();
        idx
    }
}

fn shuffled_strata(n: usize, strata: Option<&[usize]>, seed: u64) -> Result<Vec<(usize, Vec<usize>)>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    match strata {
        Some(keys) => {
            if keys.len() != n {
                return Err(Error::Contract(format!(
                    "{} stratification keys for {n} samples",
                    keys.len()
                )));
            }
            for (i, &k) in keys.iter().enumerate() {
                groups.entry(k).or_default().push(i);
            }
        }
        None => {
            groups.insert(0, (0..n).collect());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(groups
        .into_iter()
        .map(|(k, mut v)| {
            v.shuffle(&mut rng);
            (k, v)
        })
        .collect())
}

/// Deterministic shuffled k-fold plan. With strata, each stratum is dealt
/// round-robin across folds (continuing where the previous stratum
/// stopped), so per-fold stratum counts differ by at most one and fold sizes
/// by at most one.
pub fn make_folds(
    n: usize,
    k: usize,
    seed: u64,
    stratify: StratifyKey,
    strata: Option<&[usize]>,
) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("k = {k}; need at least 2 folds")));
    }
    if n < k {
        return Err(Error::Config(format!("{n} samples cannot fill {k} folds")));
    }
    let strata = if stratify == StratifyKey::None { None } else { strata };
    if stratify != StratifyKey::None && strata.is_none() {
        return Err(Error::Contract("stratified plan requested without keys".into()));
    }
    let groups = shuffled_strata(n, strata, seed)?;
    let mut warnings = Vec::new();
    let mut folds = vec![Vec::new(); k];
    let mut pos = 0;
    for (key, members) in &groups {
        if strata.is_some() && members.len() < k {
            warnings.push(format!(
                "stratum {key} has {} samples for {k} folds; some folds get none",
                members.len()
            ));
        }
        for &i in members {
            folds[pos % k].push(i);
            pos += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan {
        n,
        k,
        stratify,
        folds,
        warnings,
    })
}

/// Stratified holdout: `round(fraction·|stratum|)` of each stratum goes to the
/// test side. Returns `(train, test)`, each ascending.
pub fn holdout_split(
    n: usize,
    fraction: f64,
    seed: u64,
    strata: Option<&[usize]>,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!("test fraction {fraction} outside [0, 1)")));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (_, members) in shuffled_strata(n, strata, seed)? {
        let cut = (fraction * members.len() as f64).round() as usize;
        test.extend_from_slice(&members[..cut]);
        train.extend_from_slice(&members[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
