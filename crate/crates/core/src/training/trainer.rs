use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    derive_seed, head_for, lr_schedule, optimizer_step, FoldPlan, OptimizerState, PlateauTracker,
    TrainConfig, STREAM_BATCHES, STREAM_INIT,
};
use crate::dataset::{CohortDataset, Task};
use crate::error::{Error, Result};
use crate::losses::{loss_and_grads, LossInputs};
use crate::math::Mode;
use crate::metrics::concordance_index;
use crate::model::{init_params, ModelParams, Prediction};

/// One line of `history.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub fold: usize,
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub metric: String,
    pub val_metric: Option<f64>,
    pub best: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FoldStatus {
    Ok,
    /// No epoch produced an admissible validation metric; the final-epoch
    /// parameters are kept.
    NonAdmissible,
    Diverged { detail: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub status: FoldStatus,
    pub best_epoch: Option<usize>,
    pub best_metric: Option<f64>,
    /// Best-epoch parameters; `None` only for diverged folds.
    pub params: Option<ModelParams>,
    pub history: Vec<EpochRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainRun {
    pub folds: Vec<FoldResult>,
}

impl TrainRun {
    pub fn history(&self) -> impl Iterator<Item = &EpochRecord> {
        self.folds.iter().flat_map(|f| &f.history)
    }

    /// Mean of the per-fold best validation metrics that exist.
    pub fn mean_best_metric(&self) -> Option<f64> {
        let v: Vec<f64> = self.folds.iter().filter_map(|f| f.best_metric).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn models(&self) -> Vec<&ModelParams> {
        self.folds.iter().filter_map(|f| f.params.as_ref()).collect()
    }
}

fn metric_name(task: Task) -> &'static str {
    match task {
        Task::Survival => "c_index",
        Task::Classification => "accuracy",
    }
}

/// C-index (survival) or accuracy (classification) of `pred` on `data`.
/// `None` when the metric is undefined (no evaluable pairs, empty set).
pub fn task_metric(task: Task, pred: &Prediction, data: &CohortDataset) -> Result<Option<f64>> {
    if data.is_empty() {
        return Ok(None);
    }
    match task {
        Task::Survival => match concordance_index(&pred.hazards(), &data.survival) {
            Ok(c) => Ok(Some(c)),
            Err(Error::NonAdmissible(_)) => Ok(None),
            Err(e) => Err(e),
        },
        Task::Classification => {
            let hits = pred
                .predicted_classes()
                .iter()
                .zip(&data.classes)
                .filter(|(p, t)| p == t)
                .count();
            Ok(Some(hits as f64 / data.len() as f64))
        }
    }
}

fn batch_loss(
    params: &ModelParams,
    batch: &CohortDataset,
    task: Task,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, crate::math::ParamGrads)> {
    let (pred, tape) = params.forward(&batch.x, Mode::Train, rng)?;
    if !pred.output.is_finite() {
        return Err(Error::Divergence {
            layer: "head".into(),
            step: 0,
            detail: "non-finite model output".into(),
        });
    }
    let hazards;
    let inputs = match task {
        Task::Survival => {
            hazards = pred.hazards();
            LossInputs::survival(&hazards, &batch.survival)
        }
        Task::Classification => LossInputs::classification(&pred.output, &batch.classes),
    };
    loss_and_grads(params, &tape, &pred.output, &inputs, &cfg.loss_weights)
}

/// Trains `init` on `train_idx`, tracking the validation metric on
/// `val_idx` each epoch. Layers with index `< frozen` are never updated.
pub fn fit_fold(
    dataset: &CohortDataset,
    train_idx: &[usize],
    val_idx: &[usize],
    cfg: &TrainConfig,
    init: ModelParams,
    frozen: usize,
    fold: usize,
) -> Result<FoldResult> {
    cfg.validate()?;
    if dataset.n_features() != init.config.input_dim {
        return Err(Error::Shape(format!(
            "dataset has {} features, model expects {}",
            dataset.n_features(),
            init.config.input_dim
        )));
    }
    if frozen > init.encoder_depth() {
        return Err(Error::Config(format!(
            "frozen_layers {frozen} exceeds encoder depth {}",
            init.encoder_depth()
        )));
    }
    if train_idx.is_empty() {
        return Err(Error::Contract(format!("fold {fold} has no training samples")));
    }
    let mut params = init;
    params.config.dropout_p = cfg.dropout_p;
    params.config.validate()?;

    let val = dataset.subset(val_idx);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_BATCHES, fold as u64));
    let mut state = OptimizerState::new(cfg.optimizer, &params.layers);
    let mut plateau = PlateauTracker::default();
    let mut order = train_idx.to_vec();
    let mut best: Option<(usize, f64, ModelParams)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = lr_schedule(
            cfg.lr_policy,
            cfg.lr,
            epoch,
            cfg.epochs,
            plateau.reductions,
            &cfg.schedule,
        )?;
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = dataset.subset(chunk);
            let step = state.step + 1;
            let (loss, grads) = batch_loss(&params, &batch, cfg.task, cfg, &mut rng)
                .map_err(|e| match e {
                    Error::Divergence { layer, detail, .. } => Error::Divergence {
                        layer,
                        step,
                        detail: format!("fold {fold}, epoch {epoch}: {detail}"),
                    },
                    e => e,
                })?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    layer: "loss".into(),
                    step,
                    detail: format!("fold {fold}, epoch {epoch}: loss = {loss}"),
                });
            }
            optimizer_step(&mut params.layers, &grads, &mut state, lr, cfg.weight_decay, frozen)?;
            loss_sum += loss;
            batches += 1;
        }
        let metric = task_metric(cfg.task, &params.predict(&val.x)?, &val)?;
        let improved = match (metric, &best) {
            (Some(m), Some((_, b, _))) => m > *b,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if improved {
            best = Some((epoch, metric.unwrap_or_default(), params.clone()));
        }
        plateau.observe(metric, cfg.schedule.plateau_patience);
        history.push(EpochRecord {
            fold,
            epoch,
            lr,
            train_loss: loss_sum / batches as f64,
            metric: metric_name(cfg.task).into(),
            val_metric: metric,
            best: improved,
        });
    }

    Ok(match best {
        Some((epoch, m, p)) => FoldResult {
            fold,
            status: FoldStatus::Ok,
            best_epoch: Some(epoch),
            best_metric: Some(m),
            params: Some(p),
            history,
        },
        None => FoldResult {
            fold,
            status: FoldStatus::NonAdmissible,
            best_epoch: None,
            best_metric: None,
            params: Some(params),
            history,
        },
    })
}

/// Runs every fold of `plan` from a fresh initialization. A diverged fold is
/// recorded and the run continues.
pub fn train(dataset: &CohortDataset, cfg: &TrainConfig, plan: &FoldPlan) -> Result<TrainRun> {
    cfg.validate()?;
    if plan.n != dataset.len() {
        return Err(Error::Contract(format!(
            "fold plan covers {} samples, dataset has {}",
            plan.n,
            dataset.len()
        )));
    }
    let enc = cfg.encoder(dataset.n_features());
    let head = head_for(cfg.task, dataset);
    let mut folds = Vec::with_capacity(plan.k);
    for fold in 0..plan.k {
        let init = init_params(&enc, head, derive_seed(cfg.seed, STREAM_INIT, fold as u64))?;
        folds.push(run_fold(dataset, plan, fold, cfg, init, 0)?);
    }
    Ok(TrainRun { folds })
}

pub(super) fn run_fold(
    dataset: &CohortDataset,
    plan: &FoldPlan,
    fold: usize,
    cfg: &TrainConfig,
    init: ModelParams,
    frozen: usize,
) -> Result<FoldResult> {
    let train_idx = plan.training(fold);
    match fit_fold(dataset, &train_idx, plan.validation(fold), cfg, init, frozen, fold) {
        Err(e @ Error::Divergence { .. }) => Ok(FoldResult {
            fold,
            status: FoldStatus::Diverged {
                detail: e.to_string(),
            },
            best_epoch: None,
            best_metric: None,
            params: None,
            history: Vec::new(),
        }),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::SurvivalLabel;
    use crate::math::Matrix;
    use crate::training::{make_folds, LrPolicy, OptimizerKind, StratifyKey};

    fn toy(n: usize) -> CohortDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Matrix::random_normal(n, 4, 1.0, &mut rng);
        let survival = (0..n)
            .map(|i| {
                let r = x.get(i, 0) - x.get(i, 1);
                SurvivalLabel::new((-r).exp() * (1.0 + (i % 7) as f64 / 10.0), i % 4 != 0)
            })
            .collect();
        CohortDataset::new(
            x,
            (0..n).map(|i| format!("s{i}")).collect(),
            vec!["TCGA-ACC".into(); n],
            survival,
            vec![0; n],
        )
        .unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            hidden_widths: vec![8, 4],
            epochs: 5,
            batch_size: 16,
            lr: 1e-2,
            dropout_p: 0.0,
            lr_policy: LrPolicy::Linear,
            optimizer: OptimizerKind::Adam,
            seed: 3,
            ..TrainConfig::new(Task::Survival)
        }
    }

    #[test]
    fn history_has_one_record_per_epoch_and_fold() {
        let d = toy(60);
        let plan = make_folds(60, 3, 1, StratifyKey::None, None).unwrap();
        let run = train(&d, &small_cfg(), &plan).unwrap();
        assert_eq!(run.history().count(), 15);
        assert!(run.folds.iter().all(|f| f.status == FoldStatus::Ok));
        for f in &run.folds {
            let best = f.best_epoch.unwrap();
            assert_eq!(f.history[best].val_metric, f.best_metric);
        }
    }

    #[test]
    fn fixed_seed_reproduces_run() {
        let d = toy(40);
        let plan = make_folds(40, 2, 1, StratifyKey::None, None).unwrap();
        let cfg = TrainConfig { dropout_p: 0.1, ..small_cfg() };
        assert_eq!(train(&d, &cfg, &plan).unwrap(), train(&d, &cfg, &plan).unwrap());
    }

    #[test]
    fn censored_validation_fold_is_flagged() {
        let mut d = toy(20);
        for i in 0..10 {
            d.survival[i].event = false;
        }
        let train_idx: Vec<usize> = (10..20).collect();
        let val_idx: Vec<usize> = (0..10).collect();
        let init = init_params(&small_cfg().encoder(4), crate::model::HeadKind::Survival, 1).unwrap();
        let r = fit_fold(&d, &train_idx, &val_idx, &small_cfg(), init, 0, 0).unwrap();
        assert_eq!(r.status, FoldStatus::NonAdmissible);
        assert!(r.params.is_some());
    }

    #[test]
    fn divergence_is_caught_per_fold() {
        let d = toy(30);
        let plan = make_folds(30, 2, 1, StratifyKey::None, None).unwrap();
        let cfg = TrainConfig {
            lr: 1e300,
            optimizer: OptimizerKind::Sgd,
            lr_policy: LrPolicy::Exp,
            ..small_cfg()
        };
        let run = train(&d, &cfg, &plan).unwrap();
        assert!(run
            .folds
            .iter()
            .all(|f| matches!(f.status, FoldStatus::Diverged { .. })));
    }
}
