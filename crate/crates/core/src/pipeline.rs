//! End-to-end commands over a [`RunConfig`]. Each writes its files under
//! `out_dir` and returns a JSON summary.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dataset::{CohortDataset, Task};
use crate::error::{Error, Result};
use crate::io::checkpoint::{
    checkpoint_paths, load_checkpoint, quantize, save_checkpoint, CheckpointMeta,
};
use crate::io::config::{EvalOn, RunConfig, SpaceKind};
use crate::io::design::load_dataset;
use crate::io::report::{confusion_csv, km_csv, versioned, write_history};
use crate::io::{atomic_write, ingest, read_json, synth, write_json, SCHEMA_VERSION};
use crate::losses::SurvivalLabel;
use crate::metrics::{
    classification_report, concordance_index, km_estimator, logrank_test, stratify_percentile,
    ClassificationReport, KmCurve, RiskGroup,
};
use crate::model::{init_params, ModelParams};
use crate::preprocess::CANCER_TYPES;
use crate::training::{
    self, derive_seed, ensemble_predict, evaluate_ensemble, finetune_fold, fit_fold,
    holdout_split, make_folds, random_search, EnsembleReport, FoldPlan, FoldStatus, StratifyKey,
    TrainRun, STREAM_FOLDS, STREAM_INIT, STREAM_SPLIT,
};

pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const SPLIT_FILE: &str = "split.json";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const KM_FILE: &str = "km.csv";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const SEARCH_FILE: &str = "search_report.json";

/// Sample ids on each side of the holdout split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub schema_version: u32,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Holdout split, the cross-validation plan over the training side, and
/// the training subset itself.
pub struct Protocol {
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub train_data: CohortDataset,
    pub test_data: CohortDataset,
    pub plan: FoldPlan,
}

fn strata(task: Task, d: &CohortDataset) -> (StratifyKey, Vec<usize>) {
    match task {
        Task::Survival => (StratifyKey::Event, d.events().into_iter().map(usize::from).collect()),
        Task::Classification => (StratifyKey::Class, d.classes.clone()),
    }
}

pub fn protocol(cfg: &RunConfig, data: &CohortDataset) -> Result<Protocol> {
    let (key, s) = strata(cfg.task, data);
    let (train_idx, test_idx) = holdout_split(
        data.len(),
        cfg.test_fraction,
        derive_seed(cfg.seed, STREAM_SPLIT, 0),
        Some(&s),
    )?;
    let train_data = data.subset(&train_idx);
    let (_, ts) = strata(cfg.task, &train_data);
    let plan = make_folds(
        train_data.len(),
        cfg.folds,
        derive_seed(cfg.seed, STREAM_FOLDS, 0),
        key,
        Some(&ts),
    )?;
    Ok(Protocol {
        test_data: data.subset(&test_idx),
        train_idx,
        test_idx,
        train_data,
        plan,
    })
}

fn check_task(data: &CohortDataset, task: Task) -> Result<()> {
    if task == Task::Survival && !data.survival.iter().any(|l| l.event) {
        return Err(Error::NonAdmissible("dataset has no observed events".into()));
    }
    Ok(())
}

pub fn synth_command(cfg: &RunConfig) -> Result<Value> {
    let spec = &cfg.synth;
    let data = synth::write_synth(spec, &cfg.out_dir)?;
    let events = data.survival.iter().filter(|l| l.event).count();
    let mut summary = json!({
        "command": "synth",
        "out_dir": cfg.out_dir,
        "mode": spec.mode,
        "n_samples": spec.n_samples,
        "n_features": spec.n_features(),
        "events": events,
    });
    if spec.mode == Task::Survival {
        let c = concordance_index(&data.risk, &data.survival)?;
        summary["oracle_c_index"] = json!(c);
    }
    Ok(summary)
}

pub fn ingest_command(cfg: &RunConfig) -> Result<Value> {
    let ing = ingest::ingest_to(cfg.data_dir()?, &cfg.out_dir, &cfg.preprocess)?;
    let m = &ing.manifest;
    Ok(json!({
        "command": "ingest",
        "out_dir": cfg.out_dir,
        "n_samples": m.n_samples,
        "n_features": m.n_features,
        "cancers": m.cancers,
        "blocks": m.blocks.iter().map(|b| json!({"modality": b.modality, "offset": b.offset, "width": b.width})).collect::<Vec<_>>(),
        "dropped_features": m.dropped.iter().map(|d| d.features.len()).sum::<usize>(),
    }))
}

fn fold_summary(run: &TrainRun) -> Vec<Value> {
    run.folds
        .iter()
        .map(|f| {
            json!({
                "fold": f.fold,
                "status": f.status,
                "best_epoch": f.best_epoch,
                "best_metric": f.best_metric,
            })
        })
        .collect()
}

/// Writes checkpoints, history, split and the run report; returns the
/// report (which is also the command summary).
fn write_run(
    cfg: &RunConfig,
    command: &str,
    p: &Protocol,
    run: &TrainRun,
    train_cfg: &training::TrainConfig,
    full: &CohortDataset,
) -> Result<Value> {
    let out = &cfg.out_dir;
    let ck_dir = out.join(CHECKPOINT_DIR);
    let mut models = Vec::new();
    for f in &run.folds {
        let Some(params) = &f.params else { continue };
        let q = quantize(params);
        let mut meta = CheckpointMeta::new(&q, cfg.task, cfg.seed, Some(f.fold));
        if let Some(m) = f.best_metric {
            meta.metrics.insert(format!("val_{}", metric_name(cfg.task)), m);
        }
        if let Some(e) = f.best_epoch {
            meta.metrics.insert("best_epoch".into(), e as f64);
        }
        meta.train_config = Some(train_cfg.clone());
        save_checkpoint(&ck_dir.join(format!("fold_{:02}.snmo", f.fold)), &q, &meta)?;
        models.push(q);
    }
    let history: Vec<_> = run.history().collect();
    write_history(&out.join(HISTORY_FILE), &history)?;
    let split = Split {
        schema_version: SCHEMA_VERSION,
        train: p.train_idx.iter().map(|&i| full.sample_ids[i].clone()).collect(),
        test: p.test_idx.iter().map(|&i| full.sample_ids[i].clone()).collect(),
    };
    write_json(&out.join(SPLIT_FILE), &split)?;

    let refs: Vec<&ModelParams> = models.iter().collect();
    let test: Option<EnsembleReport> = if refs.is_empty() || p.test_data.is_empty() {
        None
    } else {
        Some(evaluate_ensemble(&refs, &p.test_data, cfg.task)?.0)
    };
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "task": cfg.task,
        "metric": metric_name(cfg.task),
        "n_samples": full.len(),
        "n_train": p.train_idx.len(),
        "n_test": p.test_idx.len(),
        "folds": fold_summary(run),
        "diverged_folds": run.folds.iter().filter(|f| matches!(f.status, FoldStatus::Diverged { .. })).count(),
        "mean_val_metric": run.mean_best_metric(),
        "test": test,
        "plan_warnings": p.plan.warnings,
        "config": {
            "train": train_cfg,
            "folds": cfg.folds,
            "test_fraction": cfg.test_fraction,
            "seed": cfg.seed,
        },
    });
    write_json(&out.join(format!("{command}_report.json")), &report)?;
    Ok(report)
}

fn metric_name(task: Task) -> &'static str {
    match task {
        Task::Survival => "c_index",
        Task::Classification => "accuracy",
    }
}

pub fn train_command(cfg: &RunConfig) -> Result<Value> {
    let (data, _) = load_dataset(cfg.data_dir()?)?;
    check_task(&data, cfg.task)?;
    let p = protocol(cfg, &data)?;
    let run = training::train(&p.train_data, &cfg.train, &p.plan)?;
    write_run(cfg, "train", &p, &run, &cfg.train, &data)
}

fn load_models(path: &Path) -> Result<Vec<(PathBuf, ModelParams, CheckpointMeta)>> {
    checkpoint_paths(path)?
        .into_iter()
        .map(|p| load_checkpoint(&p).map(|(m, meta)| (p, m, meta)))
        .collect()
}

pub fn finetune_command(cfg: &RunConfig, base: &Path) -> Result<Value> {
    let (params, meta) = load_checkpoint(base)?;
    if meta.task != cfg.task {
        return Err(Error::Contract(format!(
            "checkpoint was trained for {}, run is {}",
            meta.task.name(),
            cfg.task.name()
        )));
    }
    let (data, _) = load_dataset(cfg.data_dir()?)?;
    check_task(&data, cfg.task)?;
    let p = protocol(cfg, &data)?;
    let run = training::finetune(&params, &cfg.finetune, &p.train_data, &p.plan, cfg.task)?;
    let mut start = params.clone();
    start.append_blocks(cfg.finetune.additional_layers, 0);
    let tc = cfg.finetune.train_config(&start, cfg.task);
    write_run(cfg, "finetune", &p, &run, &tc, &data)
}

/// Samples to evaluate on: all, or the test side of the run that produced
/// `checkpoint` (its `split.json` is looked up next to it and one level up).
fn eval_subset(cfg: &RunConfig, data: &CohortDataset, checkpoint: &Path) -> Result<CohortDataset> {
    if cfg.eval_on == EvalOn::All {
        return Ok(data.clone());
    }
    let start = if checkpoint.is_dir() {
        checkpoint.to_path_buf()
    } else {
        checkpoint.parent().map(Path::to_path_buf).unwrap_or_default()
    };
    let split_path = [start.join(SPLIT_FILE), start.join("..").join(SPLIT_FILE)]
        .into_iter()
        .find(|p| p.exists())
        .ok_or_else(|| Error::Config(format!("eval_on = test but no {SPLIT_FILE} near {}", checkpoint.display())))?;
    let split: Split = read_json(&split_path)?;
    let idx = split
        .test
        .iter()
        .map(|id| {
            data.sample_ids
                .iter()
                .position(|s| s == id)
                .ok_or_else(|| Error::Alignment(format!("split sample `{id}` not in dataset")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(data.subset(&idx))
}

/// Risk groups, Kaplan-Meier curves and pairwise log-rank tests.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurvivalAnalysis {
    pub c_index: Option<f64>,
    pub cut_percentiles: [f64; 2],
    pub cut_values: [f64; 2],
    pub group_sizes: [usize; 3],
    pub degenerate: bool,
    pub warnings: Vec<String>,
    pub pairwise: Vec<PairwiseLogrank>,
    #[serde(skip)]
    pub curves: Vec<(RiskGroup, KmCurve)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairwiseLogrank {
    pub a: RiskGroup,
    pub b: RiskGroup,
    pub chi2: Option<f64>,
    pub p_value: Option<f64>,
}

impl SurvivalAnalysis {
    pub fn p_value(&self, a: RiskGroup, b: RiskGroup) -> Option<f64> {
        self.pairwise.iter().find(|p| p.a == a && p.b == b).and_then(|p| p.p_value)
    }

    pub fn km_csv(&self) -> String {
        let rows: Vec<(&str, &KmCurve)> = self.curves.iter().map(|(g, c)| (g.name(), c)).collect();
        km_csv(&rows)
    }
}

pub fn survival_analysis(
    hazards: &[f64],
    labels: &[SurvivalLabel],
    cuts: [f64; 2],
) -> Result<SurvivalAnalysis> {
    let c_index = match concordance_index(hazards, labels) {
        Ok(c) => Some(c),
        Err(Error::NonAdmissible(_)) => None,
        Err(e) => return Err(e),
    };
    let groups = stratify_percentile(hazards, cuts)?;
    let members: Vec<Vec<SurvivalLabel>> = RiskGroup::ALL
        .iter()
        .map(|&g| groups.members(g).into_iter().map(|i| labels[i]).collect())
        .collect();
    let mut curves = Vec::new();
    for (g, m) in RiskGroup::ALL.iter().zip(&members) {
        if !m.is_empty() {
            curves.push((*g, km_estimator(m)?));
        }
    }
    let mut pairwise = Vec::new();
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let r = match logrank_test(&members[a], &members[b]) {
            Ok(r) => Some(r),
            Err(Error::Undefined(_)) => None,
            Err(e) => return Err(e),
        };
        pairwise.push(PairwiseLogrank {
            a: RiskGroup::ALL[a],
            b: RiskGroup::ALL[b],
            chi2: r.as_ref().map(|r| r.chi2),
            p_value: r.as_ref().map(|r| r.p_value),
        });
    }
    Ok(SurvivalAnalysis {
        c_index,
        cut_percentiles: groups.cut_percentiles,
        cut_values: groups.cut_values,
        group_sizes: groups.sizes(),
        degenerate: groups.degenerate,
        warnings: groups.warnings,
        pairwise,
        curves,
    })
}

fn class_rows(report: &ClassificationReport) -> Vec<Value> {
    report
        .per_class
        .iter()
        .map(|c| {
            json!({
                "class": CANCER_TYPES.get(c.class).copied().unwrap_or("?"),
                "precision": c.precision,
                "recall": c.recall,
                "f1": c.f1,
                "support": c.support,
                "no_support": c.no_support,
            })
        })
        .collect()
}

/// Shared body of `evaluate`, `ensemble` and `stratify`.
fn assess(cfg: &RunConfig, checkpoints: &Path, command: &str) -> Result<Value> {
    let loaded = load_models(checkpoints)?;
    let (full, _) = load_dataset(cfg.data_dir()?)?;
    let data = eval_subset(cfg, &full, checkpoints)?;
    if data.is_empty() {
        return Err(Error::Contract("no samples to evaluate".into()));
    }
    let task = loaded[0].2.task;
    if task != cfg.task {
        return Err(Error::Contract(format!(
            "checkpoints were trained for {}, run is {}",
            task.name(),
            cfg.task.name()
        )));
    }
    let models: Vec<&ModelParams> = loaded.iter().map(|(_, m, _)| m).collect();
    let out = &cfg.out_dir;
    let mut summary = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "task": task,
        "n_models": models.len(),
        "n_samples": data.len(),
    });
    if models.len() > 1 {
        let (ens, _) = evaluate_ensemble(&models, &data, task)?;
        summary["per_model"] = json!(ens.per_model);
        summary["mean_per_model"] = json!(ens.mean_per_model);
    }
    let pred = ensemble_predict(&models, &data.x)?;
    match task {
        Task::Survival => {
            let a = survival_analysis(&pred.hazards(), &data.survival, cfg.cuts)?;
            atomic_write(&out.join(KM_FILE), a.km_csv().as_bytes())?;
            summary["c_index"] = json!(a.c_index);
            summary["logrank_p"] = json!(a.p_value(RiskGroup::Low, RiskGroup::High));
            summary["stratification"] = serde_json::to_value(&a)?;
            if command == "stratify" {
                let mut tsv = String::from("sample_id\thazard\tgroup\n");
                let groups = stratify_percentile(&pred.hazards(), cfg.cuts)?;
                for ((id, h), g) in data.sample_ids.iter().zip(pred.hazards()).zip(&groups.assignment) {
                    tsv.push_str(&format!("{id}\t{h}\t{}\n", g.name()));
                }
                atomic_write(&out.join("risk_groups.tsv"), tsv.as_bytes())?;
            }
        }
        Task::Classification => {
            let report = classification_report(
                &pred.predicted_classes(),
                &data.classes,
                data.n_classes,
            )?;
            let names: Vec<&str> = CANCER_TYPES.iter().take(data.n_classes).copied().collect();
            atomic_write(&out.join(CONFUSION_FILE), confusion_csv(&report, &names).as_bytes())?;
            summary["accuracy"] = json!(report.accuracy);
            summary["macro_f1"] = json!(report.macro_f1);
            summary["weighted_f1"] = json!(report.weighted_f1);
            summary["per_class"] = json!(class_rows(&report));
        }
    }
    write_json(&out.join(format!("{command}_report.json")), &versioned(&summary)?)?;
    Ok(summary)
}

pub fn evaluate_command(cfg: &RunConfig, checkpoint: &Path) -> Result<Value> {
    assess(cfg, checkpoint, "evaluate")
}

pub fn ensemble_command(cfg: &RunConfig, checkpoints: &Path) -> Result<Value> {
    assess(cfg, checkpoints, "ensemble")
}

pub fn stratify_command(cfg: &RunConfig, checkpoints: &Path) -> Result<Value> {
    if cfg.task != Task::Survival {
        return Err(Error::Config("stratify requires task = survival".into()));
    }
    assess(cfg, checkpoints, "stratify")
}

/// Random search; every trial trains on fold 0 of the protocol. With the
/// fine-tuning space a base checkpoint is required.
pub fn hpsearch_command(cfg: &RunConfig, base: Option<&Path>) -> Result<Value> {
    let (data, _) = load_dataset(cfg.data_dir()?)?;
    check_task(&data, cfg.task)?;
    let p = protocol(cfg, &data)?;
    let base = match (cfg.search_space, base) {
        (SpaceKind::Finetuning, Some(b)) => Some(load_checkpoint(b)?.0),
        (SpaceKind::Finetuning, None) => {
            return Err(Error::Config("finetuning search needs --checkpoint".into()))
        }
        (SpaceKind::Training, _) => None,
    };
    let head = training::head_for(cfg.task, &p.train_data);
    let report = random_search(&cfg.search, cfg.n_trials, cfg.seed, |id, s| {
        let result = match &base {
            Some(b) => {
                let ft = s.apply_finetune(&cfg.finetune);
                finetune_fold(b, &ft, &p.train_data, &p.plan, 0, cfg.task)
            }
            None => {
                let tc = s.apply_train(&cfg.train);
                let init = init_params(
                    &tc.encoder(p.train_data.n_features()),
                    head,
                    derive_seed(cfg.seed, STREAM_INIT, id as u64),
                )?;
                fit_fold(
                    &p.train_data,
                    &p.plan.training(0),
                    p.plan.validation(0),
                    &tc,
                    init,
                    0,
                    0,
                )
            }
        };
        result.map(|r| r.best_metric)
    })?;
    write_json(&cfg.out_dir.join(SEARCH_FILE), &report)?;
    let best = report.best();
    Ok(json!({
        "command": "hpsearch",
        "n_trials": report.trials.len(),
        "space": cfg.search_space,
        "metric": metric_name(cfg.task),
        "best_trial": best.map(|t| t.id),
        "best_objective": best.and_then(|t| t.objective),
        "best_params": best.map(|t| &t.params),
    }))
}
