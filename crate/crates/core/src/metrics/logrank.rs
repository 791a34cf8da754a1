use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::SurvivalLabel;

/// How the two-group statistic is formed from the observed/expected table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogrankMethod {
    /// `Σ_g (O_g − E_g)² / E_g` over both groups.
    #[default]
    ObservedExpected,
    /// Textbook statistic `(O_a − E_a)² / V` with hypergeometric variance.
    /// Not the default; kept for comparison.
    Hypergeometric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogrankResult {
    pub chi2: f64,
    pub p_value: f64,
    pub observed: [f64; 2],
    pub expected: [f64; 2],
}

/// Upper tail of chi-square with one degree of freedom.
pub fn chi2_sf_1df(chi2: f64) -> f64 {
    libm::erfc((chi2 / 2.0).sqrt())
}

pub fn logrank_test(group_a: &[SurvivalLabel], group_b: &[SurvivalLabel]) -> Result<LogrankResult> {
    logrank_test_with(group_a, group_b, LogrankMethod::ObservedExpected)
}

pub fn logrank_test_with(
    group_a: &[SurvivalLabel],
    group_b: &[SurvivalLabel],
    method: LogrankMethod,
) -> Result<LogrankResult> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(Error::Undefined("log-rank test needs two non-empty groups".into()));
    }
    let mut pooled: Vec<(f64, bool, usize)> = group_a
        .iter()
        .map(|l| (l.time, l.event, 0))
        .chain(group_b.iter().map(|l| (l.time, l.event, 1)))
        .collect();
    if !pooled.iter().any(|p| p.1) {
        return Err(Error::Undefined("log-rank test with no events".into()));
    }
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut at_risk = [group_a.len() as f64, group_b.len() as f64];
    let mut observed = [0.0; 2];
    let mut expected = [0.0; 2];
    let mut variance = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let t = pooled[i].0;
        let mut deaths = [0.0; 2];
        let mut leaving = [0.0; 2];
        while i < pooled.len() && pooled[i].0 == t {
            let g = pooled[i].2;
            if pooled[i].1 {
                deaths[g] += 1.0;
            }
            leaving[g] += 1.0;
            i += 1;
        }
        let d = deaths[0] + deaths[1];
        if d > 0.0 {
            let n = at_risk[0] + at_risk[1];
            for g in 0..2 {
                observed[g] += deaths[g];
                expected[g] += at_risk[g] * d / n;
            }
            if n > 1.0 {
                variance += at_risk[0] * at_risk[1] * d * (n - d) / (n * n * (n - 1.0));
            }
        }
        at_risk[0] -= leaving[0];
        at_risk[1] -= leaving[1];
    }

    let chi2 = match method {
        LogrankMethod::ObservedExpected => (0..2)
            .filter(|&g| expected[g] > 0.0)
            .map(|g| (observed[g] - expected[g]).powi(2) / expected[g])
            .sum(),
        LogrankMethod::Hypergeometric => {
            if variance <= 0.0 {
                0.0
            } else {
                (observed[0] - expected[0]).powi(2) / variance
            }
        }
    };
    Ok(LogrankResult {
        chi2,
        p_value: chi2_sf_1df(chi2),
        observed,
        expected,
    })
}
