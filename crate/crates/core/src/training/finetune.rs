use serde::{Deserialize, Serialize};

use super::trainer::run_fold;
use super::{fit_fold, FoldResult};
use super::{
    derive_seed, FoldPlan, LrPolicy, OptimizerKind, ScheduleParams, TrainConfig, TrainRun,
    STREAM_APPEND,
};
use crate::dataset::{CohortDataset, Task};
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::model::ModelParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    /// Encoder layers, counted from the input side, that receive no update.
    pub frozen_layers: usize,
    /// Fresh `embedding_dim → embedding_dim` blocks inserted before the head.
    pub additional_layers: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout_p: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub lr_policy: LrPolicy,
    pub seed: u64,
}

impl FinetuneConfig {
    /// Full-encoder fine-tuning with a very small learning rate, heavy
    /// weight decay and dropout, and few epochs.
    pub fn ft_preset() -> Self {
        Self {
            frozen_layers: 0,
            additional_layers: 0,
            lr: 4e-5,
            weight_decay: 0.35,
            dropout_p: 0.35,
            epochs: 10,
            batch_size: 16,
            optimizer: OptimizerKind::Adamw,
            lr_policy: LrPolicy::Linear,
            seed: 0,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper-ft" => Ok(Self::ft_preset()),
            other => Err(Error::Config(format!("unknown fine-tune preset `{other}`"))),
        }
    }

    pub fn train_config(&self, base: &ModelParams, task: Task) -> TrainConfig {
        TrainConfig {
            task,
            hidden_widths: base.config.hidden_widths.clone(),
            activation: base.config.activation,
            lr: self.lr,
            weight_decay: self.weight_decay,
            dropout_p: self.dropout_p,
            batch_size: self.batch_size,
            epochs: self.epochs,
            optimizer: self.optimizer,
            lr_policy: self.lr_policy,
            schedule: ScheduleParams::default(),
            loss_weights: match task {
                Task::Survival => LossWeights::survival(),
                Task::Classification => LossWeights::classification(),
            },
            seed: self.seed,
        }
    }
}

fn prepare(
    base: &ModelParams,
    ft: &FinetuneConfig,
    dataset: &CohortDataset,
    task: Task,
) -> Result<(ModelParams, TrainConfig)> {
    base.check_consistent()?;
    if ft.frozen_layers > base.encoder_depth() {
        return Err(Error::Config(format!(
            "frozen_layers {} exceeds encoder depth {}",
            ft.frozen_layers,
            base.encoder_depth()
        )));
    }
    if dataset.n_features() != base.config.input_dim {
        return Err(Error::Shape(format!(
            "dataset has {} features, base model expects {}",
            dataset.n_features(),
            base.config.input_dim
        )));
    }
    if base.head != super::head_for(task, dataset) {
        return Err(Error::Contract(format!(
            "base model head {:?} does not match task {}",
            base.head,
            task.name()
        )));
    }
    let mut start = base.clone();
    start.append_blocks(ft.additional_layers, derive_seed(ft.seed, STREAM_APPEND, 0));
    let cfg = ft.train_config(&start, task);
    Ok((start, cfg))
}

/// Continues training `base` on every fold of `plan`. Each fold starts from
/// the same base weights (plus identical appended blocks).
pub fn finetune(
    base: &ModelParams,
    ft: &FinetuneConfig,
    dataset: &CohortDataset,
    plan: &FoldPlan,
    task: Task,
) -> Result<TrainRun> {
    let (start, cfg) = prepare(base, ft, dataset, task)?;
    let mut folds = Vec::with_capacity(plan.k);
    for fold in 0..plan.k {
        folds.push(run_fold(dataset, plan, fold, &cfg, start.clone(), ft.frozen_layers)?);
    }
    Ok(TrainRun { folds })
}

/// Fine-tunes on a single fold; divergence is returned as an error.
pub fn finetune_fold(
    base: &ModelParams,
    ft: &FinetuneConfig,
    dataset: &CohortDataset,
    plan: &FoldPlan,
    fold: usize,
    task: Task,
) -> Result<FoldResult> {
    let (start, cfg) = prepare(base, ft, dataset, task)?;
    fit_fold(
        dataset,
        &plan.training(fold),
        plan.validation(fold),
        &cfg,
        start,
        ft.frozen_layers,
        fold,
    )
}
