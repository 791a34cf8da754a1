use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrPolicy {
    Linear,
    Exp,
    Step,
    Plateau,
    Cosine,
}

impl LrPolicy {
    pub const ALL: [LrPolicy; 5] = [
        LrPolicy::Linear,
        LrPolicy::Exp,
        LrPolicy::Step,
        LrPolicy::Plateau,
        LrPolicy::Cosine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LrPolicy::Linear => "linear",
            LrPolicy::Exp => "exp",
            LrPolicy::Step => "step",
            LrPolicy::Plateau => "plateau",
            LrPolicy::Cosine => "cosine",
        }
    }
}

impl std::str::FromStr for LrPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LrPolicy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown lr policy `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub exp_gamma: f64,
    pub step_factor: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            exp_gamma: 0.95,
            step_factor: 0.1,
            plateau_factor: 0.5,
            plateau_patience: 5,
        }
    }
}

/// Learning rate for `epoch` (0-based). `plateau_reductions` is the number
/// of plateau reductions triggered so far and only matters for `Plateau`.
pub fn lr_schedule(
    policy: LrPolicy,
    base_lr: f64,
    epoch: usize,
    total_epochs: usize,
    plateau_reductions: u32,
    params: &ScheduleParams,
) -> Result<f64> {
    if total_epochs == 0 || epoch >= total_epochs {
        return Err(Error::Contract(format!(
            "epoch {epoch} outside [0, {total_epochs})"
        )));
    }
    let frac = epoch as f64 / total_epochs as f64;
    Ok(match policy {
        LrPolicy::Linear => base_lr * (1.0 - frac),
        LrPolicy::Exp => base_lr * params.exp_gamma.powi(epoch as i32),
        LrPolicy::Step => {
            let every = (total_epochs / 3).max(1);
            base_lr * params.step_factor.powi((epoch / every) as i32)
        }
        LrPolicy::Plateau => base_lr * params.plateau_factor.powi(plateau_reductions as i32),
        LrPolicy::Cosine => base_lr * (1.0 + (std::f64::consts::PI * frac).cos()) / 2.0,
    })
}

/// Counts epochs without improvement of a higher-is-better metric.
#[derive(Clone, Debug, Default)]
pub struct PlateauTracker {
    best: Option<f64>,
    stale: usize,
    pub reductions: u32,
}

impl PlateauTracker {
    pub fn observe(&mut self, metric: Option<f64>, patience: usize) {
        match (metric, self.best) {
            (Some(m), Some(b)) if m <= b => self.stale += 1,
            (Some(m), _) => {
                self.best = Some(m);
                self.stale = 0;
            }
            (None, _) => self.stale += 1,
        }
        if self.stale >= patience {
            self.reductions += 1;
            self.stale = 0;
        }
    }
}
