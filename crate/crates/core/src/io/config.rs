//! Run configuration: flat `key = value` lines, `#` starts a comment.
//!
//! Precedence is command-line override > config file > built-in default.
//! Unknown keys are rejected. See [`KEYS`] for every key and its default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::synth::SyntheticSpec;
use crate::dataset::Task;
use crate::error::{Error, Result};
use crate::math::Activation;
use crate::metrics::DEFAULT_CUTS;
use crate::preprocess::{Modality, PreprocessConfig};
use crate::training::{FinetuneConfig, SearchSpace, TrainConfig};

/// `(key, default, description)` for every accepted key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("data_dir", "", "input directory (cohort TSVs for ingest, ingested dataset otherwise)"),
    ("out_dir", "out", "output directory"),
    ("task", "survival", "survival | classification"),
    ("seed", "0", "master seed"),
    ("quasi_constant_tol", "0.998", "modal-value frequency at or above which a feature is dropped"),
    ("variance_threshold", "0.25", "population variance at or below which a feature is dropped"),
    ("variance_threshold.<modality>", "", "per-modality variance threshold"),
    ("expression_floor", "7", "gene expression kept iff its max is strictly above this"),
    ("include_clinical", "true", "append age/gender/race(/stage) columns"),
    ("include_stage", "task == survival", "include the stage column"),
    ("hidden_widths", "1024,512,256,128,48,48,48", "encoder widths"),
    ("activation", "selu", "selu | elu"),
    ("lr", "0.001", "learning rate"),
    ("weight_decay", "0.0001", "weight decay"),
    ("dropout", "0.1", "alpha-dropout probability"),
    ("batch_size", "64", "mini-batch size"),
    ("epochs", "50", "epochs per fold"),
    ("optimizer", "adam", "sgd | adam | rmsprop | adamw"),
    ("lr_policy", "cosine", "linear | exp | step | plateau | cosine"),
    ("exp_gamma", "0.95", "decay factor of the exp policy"),
    ("step_factor", "0.1", "factor of the step policy"),
    ("plateau_factor", "0.5", "factor of the plateau policy"),
    ("plateau_patience", "5", "epochs without improvement before a plateau reduction"),
    ("lambda_cox", "1 (survival) / 0", "Cox loss weight"),
    ("lambda_ce", "0 (survival) / 1", "cross-entropy weight"),
    ("lambda_reg", "0.0001", "L1 weight"),
    ("folds", "10", "cross-validation folds"),
    ("test_fraction", "0.2", "held-out test fraction"),
    ("ft_preset", "paper-ft", "fine-tune preset applied before other ft_ keys"),
    ("frozen_layers", "0", "encoder layers frozen from the input side"),
    ("additional_layers", "0", "blocks appended before the head"),
    ("ft_lr", "4e-5", "fine-tune learning rate"),
    ("ft_weight_decay", "0.35", "fine-tune weight decay"),
    ("ft_dropout", "0.35", "fine-tune dropout"),
    ("ft_epochs", "10", "fine-tune epochs"),
    ("ft_batch_size", "16", "fine-tune batch size"),
    ("ft_optimizer", "adamw", "fine-tune optimizer"),
    ("ft_lr_policy", "linear", "fine-tune lr policy"),
    ("n_trials", "10", "random-search trials"),
    ("search_space", "training", "training | finetuning"),
    ("search_epochs", "", "override of the epoch choices"),
    ("search_batch_sizes", "", "override of the batch-size choices"),
    ("search_hidden_layers", "", "override of the depth choices"),
    ("search_hidden_neurons", "", "override of the width choices"),
    ("eval_on", "all", "all | test (samples listed in the run's split.json)"),
    ("cuts", "33,66", "risk-group percentile cuts"),
    ("synth_n_samples", "2000", "synthetic samples"),
    ("synth_modalities", "dna_methylation:200,mirna_expression:200,protein_expression:100", "modality:width list"),
    ("synth_nonzero", "20", "nonzero true weights"),
    ("synth_hazard_scale", "1", "risk scale"),
    ("synth_censoring_rate", "0.3", "target censored fraction"),
    ("synth_n_classes", "33", "classes (classification mode)"),
    ("synth_separation", "6", "class-mean separation in standard deviations"),
    ("synth_n_cancers", "2", "cohorts (survival mode)"),
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalOn {
    #[default]
    All,
    Test,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    #[default]
    Training,
    Finetuning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub task: Task,
    pub seed: u64,
    pub preprocess: PreprocessConfig,
    pub train: TrainConfig,
    pub folds: usize,
    pub test_fraction: f64,
    pub finetune: FinetuneConfig,
    pub n_trials: usize,
    pub search_space: SpaceKind,
    pub search: SearchSpace,
    pub eval_on: EvalOn,
    pub cuts: [f64; 2],
    pub synth: SyntheticSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::resolve(BTreeMap::new()).expect("defaults are valid")
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{v}` for `{key}`"))),
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_modalities(key: &str, v: &str) -> Result<Vec<(Modality, usize)>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (m, w) = item
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("`{key}` entries are modality:width")))?;
            let m: Modality = m
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("unknown modality `{m}` in `{key}`")))?;
            Ok((m, parse(key, w)?))
        })
        .collect()
}

/// Parses `key = value` lines into a map; later duplicates win.
pub fn parse_config_text(text: &str, origin: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Malformed {
            path: origin.to_path_buf(),
            line: i + 1,
            msg: format!("expected `key = value`, found `{line}`"),
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

impl RunConfig {
    /// Defaults, then `file`, then `overrides`.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut map = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                parse_config_text(&text, p)?
            }
            None => BTreeMap::new(),
        };
        for (k, v) in overrides {
            map.insert(k.clone(), v.clone());
        }
        Self::resolve(map)
    }

    /// Builds a configuration from a complete key map.
    pub fn resolve(map: BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| map.get(k).map(String::as_str);
        let task: Task = get("task").map_or(Ok(Task::Survival), |v| v.parse())?;
        let seed: u64 = get("seed").map_or(Ok(0), |v| parse("seed", v))?;
        let mut cfg = RunConfig {
            data_dir: None,
            out_dir: PathBuf::from("out"),
            task,
            seed,
            preprocess: PreprocessConfig {
                include_stage: task == Task::Survival,
                ..PreprocessConfig::default()
            },
            train: TrainConfig {
                seed,
                ..TrainConfig::new(task)
            },
            folds: 10,
            test_fraction: 0.2,
            finetune: FinetuneConfig {
                seed,
                ..FinetuneConfig::ft_preset()
            },
            n_trials: 10,
            search_space: SpaceKind::Training,
            search: SearchSpace::training(),
            eval_on: EvalOn::All,
            cuts: DEFAULT_CUTS,
            synth: SyntheticSpec {
                mode: task,
                seed,
                ..SyntheticSpec::default()
            },
        };
        if let Some(p) = get("ft_preset") {
            cfg.finetune = FinetuneConfig {
                seed,
                ..FinetuneConfig::preset(p)?
            };
        }
        if let Some(s) = get("search_space") {
            cfg.search_space = match s {
                "training" => SpaceKind::Training,
                "finetuning" => SpaceKind::Finetuning,
                o => return Err(Error::Config(format!("unknown search_space `{o}`"))),
            };
            if cfg.search_space == SpaceKind::Finetuning {
                cfg.search = SearchSpace::finetuning();
            }
        }
        for (k, v) in &map {
            if matches!(k.as_str(), "task" | "seed" | "ft_preset" | "search_space") {
                continue;
            }
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let t = &mut self.train;
        let f = &mut self.finetune;
        let s = &mut self.synth;
        match key {
            "data_dir" => self.data_dir = Some(PathBuf::from(v)),
            "out_dir" => self.out_dir = PathBuf::from(v),
            "quasi_constant_tol" => self.preprocess.quasi_constant_tol = parse(key, v)?,
            "variance_threshold" => self.preprocess.variance_threshold = parse(key, v)?,
            "expression_floor" => self.preprocess.expression_floor = parse(key, v)?,
            "include_clinical" => self.preprocess.include_clinical = parse_bool(key, v)?,
            "include_stage" => self.preprocess.include_stage = parse_bool(key, v)?,
            "hidden_widths" => t.hidden_widths = parse_list(key, v)?,
            "activation" => t.activation = parse::<Activation>(key, v)?,
            "lr" => t.lr = parse(key, v)?,
            "weight_decay" => t.weight_decay = parse(key, v)?,
            "dropout" => t.dropout_p = parse(key, v)?,
            "batch_size" => t.batch_size = parse(key, v)?,
            "epochs" => t.epochs = parse(key, v)?,
            "optimizer" => t.optimizer = v.parse()?,
            "lr_policy" => t.lr_policy = v.parse()?,
            "exp_gamma" => t.schedule.exp_gamma = parse(key, v)?,
            "step_factor" => t.schedule.step_factor = parse(key, v)?,
            "plateau_factor" => t.schedule.plateau_factor = parse(key, v)?,
            "plateau_patience" => t.schedule.plateau_patience = parse(key, v)?,
            "lambda_cox" => t.loss_weights.cox = parse(key, v)?,
            "lambda_ce" => t.loss_weights.ce = parse(key, v)?,
            "lambda_reg" => t.loss_weights.reg = parse(key, v)?,
            "folds" => self.folds = parse(key, v)?,
            "test_fraction" => self.test_fraction = parse(key, v)?,
            "frozen_layers" => f.frozen_layers = parse(key, v)?,
            "additional_layers" => f.additional_layers = parse(key, v)?,
            "ft_lr" => f.lr = parse(key, v)?,
            "ft_weight_decay" => f.weight_decay = parse(key, v)?,
            "ft_dropout" => f.dropout_p = parse(key, v)?,
            "ft_epochs" => f.epochs = parse(key, v)?,
            "ft_batch_size" => f.batch_size = parse(key, v)?,
            "ft_optimizer" => f.optimizer = v.parse()?,
            "ft_lr_policy" => f.lr_policy = v.parse()?,
            "n_trials" => self.n_trials = parse(key, v)?,
            "search_epochs" => self.search.epochs = parse_list(key, v)?,
            "search_batch_sizes" => self.search.batch_sizes = parse_list(key, v)?,
            "search_hidden_layers" => self.search.hidden_layers = parse_list(key, v)?,
            "search_hidden_neurons" => self.search.hidden_neurons = parse_list(key, v)?,
            "eval_on" => {
                self.eval_on = match v {
                    "all" => EvalOn::All,
                    "test" => EvalOn::Test,
                    o => return Err(Error::Config(format!("unknown eval_on `{o}`"))),
                }
            }
            "cuts" => {
                let c: Vec<f64> = parse_list(key, v)?;
                if c.len() != 2 {
                    return Err(Error::Config("`cuts` needs exactly two percentiles".into()));
                }
                self.cuts = [c[0], c[1]];
            }
            "synth_n_samples" => s.n_samples = parse(key, v)?,
            "synth_modalities" => s.modalities = parse_modalities(key, v)?,
            "synth_nonzero" => s.nonzero = parse(key, v)?,
            "synth_hazard_scale" => s.hazard_scale = parse(key, v)?,
            "synth_censoring_rate" => s.censoring_rate = parse(key, v)?,
            "synth_n_classes" => s.n_classes = parse(key, v)?,
            "synth_separation" => s.separation = parse(key, v)?,
            "synth_n_cancers" => s.n_cancers = parse(key, v)?,
            other => match other.strip_prefix("variance_threshold.") {
                Some(m) => {
                    let m: Modality = m
                        .parse()
                        .map_err(|_| Error::Config(format!("unknown modality in `{other}`")))?;
                    self.preprocess.variance_overrides.insert(m, parse(key, v)?);
                }
                None => return Err(Error::Config(format!("unknown config key `{other}`"))),
            },
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        self.train.validate()?;
        self.search.validate()?;
        if self.folds < 2 {
            return Err(Error::Config(format!("folds = {}; need >= 2", self.folds)));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::Config(format!(
                "test_fraction {} outside [0, 1)",
                self.test_fraction
            )));
        }
        if !(0.0 < self.cuts[0] && self.cuts[0] < self.cuts[1] && self.cuts[1] < 100.0) {
            return Err(Error::Config(format!("cuts {:?} must satisfy 0 < a < b < 100", self.cuts)));
        }
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be >= 1".into()));
        }
        Ok(())
    }

    pub fn data_dir(&self) -> Result<&Path> {
        self.data_dir
            .as_deref()
            .ok_or_else(|| Error::Config("no data directory given (--data or data_dir)".into()))
    }
}
