use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, FinetuneConfig, LrPolicy, OptimizerKind, TrainConfig, STREAM_SEARCH};
use crate::error::{Error, Result};

/// Ranges and categorical choices to sample from. Empty `hidden_*`,
/// `frozen_layers` or `additional_layers` lists mean "not searched".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub lr: (f64, f64),
    pub weight_decay: (f64, f64),
    pub dropout: (f64, f64),
    pub batch_sizes: Vec<usize>,
    pub epochs: Vec<usize>,
    pub hidden_layers: Vec<usize>,
    pub hidden_neurons: Vec<usize>,
    pub optimizers: Vec<OptimizerKind>,
    pub lr_policies: Vec<LrPolicy>,
    pub frozen_layers: Vec<usize>,
    pub additional_layers: Vec<usize>,
}

impl SearchSpace {
    pub fn training() -> Self {
        Self {
            lr: (1e-6, 1e-1),
            weight_decay: (1e-6, 1e-1),
            dropout: (0.1, 0.65),
            batch_sizes: vec![64, 128, 256, 512],
            epochs: vec![50, 100],
            hidden_layers: (1..=9).collect(),
            hidden_neurons: vec![2048, 1024, 512, 256, 128, 48, 32],
            optimizers: vec![
                OptimizerKind::Adam,
                OptimizerKind::Sgd,
                OptimizerKind::Rmsprop,
                OptimizerKind::Adamw,
            ],
            lr_policies: LrPolicy::ALL.to_vec(),
            frozen_layers: Vec::new(),
            additional_layers: Vec::new(),
        }
    }

    pub fn finetuning() -> Self {
        Self {
            lr: (1e-8, 1e-3),
            weight_decay: (1e-4, 1e-2),
            dropout: (0.05, 0.45),
            batch_sizes: vec![8, 16, 32, 48],
            epochs: vec![8, 10, 15, 20, 30],
            hidden_layers: Vec::new(),
            hidden_neurons: Vec::new(),
            optimizers: vec![OptimizerKind::Adam, OptimizerKind::Adamw],
            lr_policies: vec![LrPolicy::Linear, LrPolicy::Exp, LrPolicy::Plateau],
            frozen_layers: vec![7, 6, 5, 4, 3, 2],
            additional_layers: vec![1, 2, 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("lr", self.lr), ("weight_decay", self.weight_decay)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} range [{lo}, {hi}] must be positive and ordered"
                )));
            }
        }
        let (dlo, dhi) = self.dropout;
        if !(0.0 <= dlo && dlo <= dhi && dhi < 1.0) {
            return Err(Error::Config(format!("dropout range [{dlo}, {dhi}] invalid")));
        }
        let empty = [
            ("batch_sizes", self.batch_sizes.is_empty()),
            ("epochs", self.epochs.is_empty()),
            ("optimizers", self.optimizers.is_empty()),
            ("lr_policies", self.lr_policies.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::Config(format!("search space `{name}` is empty")));
        }
        if self.hidden_layers.is_empty() != self.hidden_neurons.is_empty() {
            return Err(Error::Config(
                "hidden_layers and hidden_neurons must both be set or both empty".into(),
            ));
        }
        if self.batch_sizes.contains(&0)
            || self.epochs.contains(&0)
            || self.hidden_layers.contains(&0)
            || self.hidden_neurons.contains(&0)
        {
            return Err(Error::Config("search space contains a zero count".into()));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SampledParams {
        let log_uniform =
            |rng: &mut R, (lo, hi): (f64, f64)| rng.random_range(lo.ln()..=hi.ln()).exp().clamp(lo, hi);
        let lr = log_uniform(rng, self.lr);
        let weight_decay = log_uniform(rng, self.weight_decay);
        let dropout = rng.random_range(self.dropout.0..=self.dropout.1);
        let pick = |rng: &mut R, v: &[usize]| v.choose(rng).copied();
        let batch_size = pick(rng, &self.batch_sizes).expect("validated");
        let epochs = pick(rng, &self.epochs).expect("validated");
        let hidden_widths = pick(rng, &self.hidden_layers).map(|depth| {
            let mut w: Vec<usize> = (0..depth)
                .map(|_| *self.hidden_neurons.choose(rng).expect("validated"))
                .collect();
            w.sort_unstable_by(|a, b| b.cmp(a));
            w
        });
        SampledParams {
            lr,
            weight_decay,
            dropout,
            batch_size,
            epochs,
            hidden_widths,
            optimizer: *self.optimizers.choose(rng).expect("validated"),
            lr_policy: *self.lr_policies.choose(rng).expect("validated"),
            frozen_layers: pick(rng, &self.frozen_layers),
            additional_layers: pick(rng, &self.additional_layers),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledParams {
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub hidden_widths: Option<Vec<usize>>,
    pub optimizer: OptimizerKind,
    pub lr_policy: LrPolicy,
    pub frozen_layers: Option<usize>,
    pub additional_layers: Option<usize>,
}

impl SampledParams {
    pub fn apply_train(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            dropout_p: self.dropout,
            batch_size: self.batch_size,
            epochs: self.epochs,
            hidden_widths: self
                .hidden_widths
                .clone()
                .unwrap_or_else(|| base.hidden_widths.clone()),
            optimizer: self.optimizer,
            lr_policy: self.lr_policy,
            ..base.clone()
        }
    }

    pub fn apply_finetune(&self, base: &FinetuneConfig) -> FinetuneConfig {
        FinetuneConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            dropout_p: self.dropout,
            batch_size: self.batch_size,
            epochs: self.epochs,
            optimizer: self.optimizer,
            lr_policy: self.lr_policy,
            frozen_layers: self.frozen_layers.unwrap_or(base.frozen_layers),
            additional_layers: self.additional_layers.unwrap_or(base.additional_layers),
            ..base.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: usize,
    pub params: SampledParams,
    pub objective: Option<f64>,
    pub error: Option<String>,
}

/// Trials ranked by objective, best first; failed or undefined trials last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub schema_version: u32,
    pub seed: u64,
    pub trials: Vec<Trial>,
}

impl SearchReport {
    pub fn best(&self) -> Option<&Trial> {
        self.trials.first().filter(|t| t.objective.is_some())
    }
}

/// Samples `n_trials` configurations and scores each with `objective`
/// (higher is better). Trial `i` draws from its own derived stream, so the
/// sequence does not depend on how objectives behave.
pub fn random_search<F>(
    space: &SearchSpace,
    n_trials: usize,
    seed: u64,
    mut objective: F,
) -> Result<SearchReport>
where
    F: FnMut(usize, &SampledParams) -> Result<Option<f64>>,
{
    space.validate()?;
    if n_trials == 0 {
        return Err(Error::Config("n_trials must be >= 1".into()));
    }
    let mut trials = Vec::with_capacity(n_trials);
    for id in 0..n_trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SEARCH, id as u64));
        let params = space.sample(&mut rng);
        let (objective, error) = match objective(id, &params) {
            Ok(v) => (v.filter(|v| v.is_finite()), None),
            Err(e @ (Error::Divergence { .. } | Error::NonAdmissible(_))) => {
                (None, Some(e.to_string()))
            }
            Err(e) => return Err(e),
        };
        trials.push(Trial {
            id,
            params,
            objective,
            error,
        });
    }
    trials.sort_by(|a, b| match (a.objective, b.objective) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.id.cmp(&b.id)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.id.cmp(&b.id),
    });
    Ok(SearchReport {
        schema_version: 1,
        seed,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_lr_within_bounds() {
        let r = random_search(&SearchSpace::training(), 200, 4, |_, p| Ok(Some(p.lr))).unwrap();
        assert!(r.trials.iter().all(|t| (1e-6..=1e-1).contains(&t.params.lr)));
        assert!(r.trials.iter().all(|t| (0.1..=0.65).contains(&t.params.dropout)));
        for t in &r.trials {
            let w = t.params.hidden_widths.as_ref().unwrap();
            assert!((1..=9).contains(&w.len()));
            assert!(w.windows(2).all(|p| p[0] >= p[1]));
        }
    }

    #[test]
    fn single_trial_is_best() {
        let r = random_search(&SearchSpace::training(), 1, 4, |_, _| Ok(Some(0.6))).unwrap();
        assert_eq!(r.best().unwrap().id, 0);
    }

    #[test]
    fn same_seed_same_sequence_and_sorted() {
        let f = |_: usize, p: &SampledParams| Ok(Some(-p.lr.ln()));
        let a = random_search(&SearchSpace::finetuning(), 10, 8, f).unwrap();
        let b = random_search(&SearchSpace::finetuning(), 10, 8, f).unwrap();
        assert_eq!(a, b);
        let objs: Vec<f64> = a.trials.iter().map(|t| t.objective.unwrap()).collect();
        assert!(objs.windows(2).all(|w| w[0] >= w[1]));
        assert!(a.trials.iter().all(|t| t.params.frozen_layers.is_some()));
    }

    #[test]
    fn empty_space_rejected() {
        let mut s = SearchSpace::training();
        s.optimizers.clear();
        assert!(matches!(random_search(&s, 1, 0, |_, _| Ok(None)), Err(Error::Config(_))));
        assert!(random_search(&SearchSpace::training(), 0, 0, |_, _| Ok(None)).is_err());
    }

    #[test]
    fn failed_trials_rank_last() {
        let r = random_search(&SearchSpace::training(), 3, 1, |id, _| {
            if id == 0 {
                Err(Error::NonAdmissible("no pairs".into()))
            } else {
                Ok(Some(id as f64))
            }
        })
        .unwrap();
        assert_eq!(r.trials.iter().map(|t| t.id).collect::<Vec<_>>(), vec![2, 1, 0]);
        assert!(r.trials[2].error.is_some());
    }
}
