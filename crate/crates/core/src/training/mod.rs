//! Optimizers, learning-rate schedules, fold plans, the per-fold training
//! loop, ensembling, fine-tuning and random search.

mod ensemble;
mod finetune;
mod folds;
mod optim;
mod schedule;
mod search;
mod trainer;

use serde::{Deserialize, Serialize};

pub use ensemble::{ensemble_predict, evaluate_ensemble, EnsembleReport};
pub use finetune::{finetune, finetune_fold, FinetuneConfig};
pub use folds::{holdout_split, make_folds, FoldPlan, StratifyKey};
pub use optim::{optimizer_step, OptimizerKind, OptimizerState};
pub use schedule::{lr_schedule, LrPolicy, PlateauTracker, ScheduleParams};
pub use search::{random_search, SampledParams, SearchReport, SearchSpace, Trial};
pub use trainer::{
    fit_fold, task_metric, train, EpochRecord, FoldResult, FoldStatus, TrainRun,
};

use crate::dataset::{CohortDataset, Task};
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::math::Activation;
use crate::model::{EncoderConfig, HeadKind, DEFAULT_HIDDEN_WIDTHS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: Task,
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout_p: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub lr_policy: LrPolicy,
    pub schedule: ScheduleParams,
    pub loss_weights: LossWeights,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(task: Task) -> Self {
        Self {
            task,
            hidden_widths: DEFAULT_HIDDEN_WIDTHS.to_vec(),
            activation: Activation::Selu,
            lr: 1e-3,
            weight_decay: 1e-4,
            dropout_p: 0.1,
            batch_size: 64,
            epochs: 50,
            optimizer: OptimizerKind::Adam,
            lr_policy: LrPolicy::Cosine,
            schedule: ScheduleParams::default(),
            loss_weights: match task {
                Task::Survival => LossWeights::survival(),
                Task::Classification => LossWeights::classification(),
            },
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        self.loss_weights.validate()?;
        self.encoder(1).validate()
    }

    pub fn encoder(&self, input_dim: usize) -> EncoderConfig {
        EncoderConfig {
            input_dim,
            hidden_widths: self.hidden_widths.clone(),
            dropout_p: self.dropout_p,
            activation: self.activation,
        }
    }
}

pub fn head_for(task: Task, dataset: &CohortDataset) -> HeadKind {
    match task {
        Task::Survival => HeadKind::Survival,
        Task::Classification => HeadKind::Classification {
            classes: dataset.n_classes,
        },
    }
}

/// Independent 64-bit seeds for the RNG streams of one run
/// (splitmix64 finalizer over seed, purpose and id).
pub fn derive_seed(seed: u64, purpose: u64, id: u64) -> u64 {
    let mut z = seed
        ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ id.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_BATCHES: u64 = 2;
pub(crate) const STREAM_APPEND: u64 = 3;
pub(crate) const STREAM_SEARCH: u64 = 4;
pub(crate) const STREAM_SPLIT: u64 = 5;
pub(crate) const STREAM_FOLDS: u64 = 6;
