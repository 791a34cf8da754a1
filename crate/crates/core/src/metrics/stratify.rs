use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskGroup {
    Low,
    Intermediate,
    High,
}

impl RiskGroup {
    pub const ALL: [RiskGroup; 3] = [RiskGroup::Low, RiskGroup::Intermediate, RiskGroup::High];

    pub fn name(self) -> &'static str {
        match self {
            RiskGroup::Low => "low",
            RiskGroup::Intermediate => "intermediate",
            RiskGroup::High => "high",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskGroups {
    pub assignment: Vec<RiskGroup>,
    /// Hazard values at the two percentile cuts.
    pub cut_values: [f64; 2],
    pub cut_percentiles: [f64; 2],
    pub degenerate: bool,
    pub warnings: Vec<String>,
}

impl RiskGroups {
    pub fn members(&self, g: RiskGroup) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == g)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn sizes(&self) -> [usize; 3] {
        let mut s = [0; 3];
        for g in &self.assignment {
            s[*g as usize] += 1;
        }
        s
    }
}

/// Linear-interpolation quantile (`q` in percent) of an unsorted sample.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, q)
}

fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Assigns low (≤ first cut), intermediate (≤ second cut) or high.
pub fn stratify_percentile(hazard: &[f64], cuts: [f64; 2]) -> Result<RiskGroups> {
    if hazard.len() < 3 {
        return Err(Error::Contract(format!(
            "stratification needs at least 3 samples, got {}",
            hazard.len()
        )));
    }
    if !(0.0..=100.0).contains(&cuts[0]) || !(cuts[0]..=100.0).contains(&cuts[1]) {
        return Err(Error::Config(format!("invalid percentile cuts {cuts:?}")));
    }
    let mut sorted = hazard.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = percentile_sorted(&sorted, cuts[0]);
    let hi = percentile_sorted(&sorted, cuts[1]);
    let assignment: Vec<RiskGroup> = hazard
        .iter()
        .map(|&h| {
            if h <= lo {
                RiskGroup::Low
            } else if h <= hi {
                RiskGroup::Intermediate
            } else {
                RiskGroup::High
            }
        })
        .collect();
    let mut groups = RiskGroups {
        assignment,
        cut_values: [lo, hi],
        cut_percentiles: cuts,
        degenerate: false,
        warnings: Vec::new(),
    };
    let sizes = groups.sizes();
    if sizes.contains(&0) {
        groups.degenerate = true;
        groups.warnings.push(format!(
            "degenerate stratification: group sizes {sizes:?} (hazard ties span the cuts)"
        ));
    }
    Ok(groups)
}
