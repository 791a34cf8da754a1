use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::SurvivalLabel;

const Z_95: f64 = 1.959_963_984_540_054;

/// Product-limit survival estimate with Greenwood 95% bands.
///
/// Row 0 is the origin (time 0, S = 1); each following row is a distinct
/// observed time. Times with censoring only reduce the risk set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
    pub censored: Vec<usize>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
}

impl KmCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Right-continuous step value S(t).
    pub fn survival_at(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&x| x <= t);
        if idx == 0 {
            1.0
        } else {
            self.survival[idx - 1]
        }
    }
}

pub fn km_estimator(labels: &[SurvivalLabel]) -> Result<KmCurve> {
    if labels.is_empty() {
        return Err(Error::Contract("Kaplan-Meier on an empty batch".into()));
    }
    let mut sorted: Vec<SurvivalLabel> = labels.to_vec();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));

    let n = sorted.len();
    let mut curve = KmCurve {
        times: vec![0.0],
        survival: vec![1.0],
        at_risk: vec![n],
        events: vec![0],
        censored: vec![0],
        ci_low: vec![1.0],
        ci_high: vec![1.0],
    };
    let mut s = 1.0;
    let mut greenwood = 0.0;
    let mut at_risk = n;
    let mut i = 0;
    while i < n {
        let t = sorted[i].time;
        let mut d = 0;
        let mut c = 0;
        while i < n && sorted[i].time == t {
            if sorted[i].event {
                d += 1;
            } else {
                c += 1;
            }
            i += 1;
        }
        if d > 0 {
            s *= (at_risk - d) as f64 / at_risk as f64;
            if at_risk > d {
                greenwood += d as f64 / (at_risk as f64 * (at_risk - d) as f64);
            }
        }
        let (lo, hi) = if s > 0.0 {
            let se = s * greenwood.sqrt();
            ((s - Z_95 * se).clamp(0.0, 1.0), (s + Z_95 * se).clamp(0.0, 1.0))
        } else {
            (0.0, 0.0)
        };
        curve.times.push(t);
        curve.survival.push(s);
        curve.at_risk.push(at_risk);
        curve.events.push(d);
        curve.censored.push(c);
        curve.ci_low.push(lo);
        curve.ci_high.push(hi);
        at_risk -= d + c;
    }
    Ok(curve)
}
