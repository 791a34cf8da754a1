use crate::error::{Error, Result};
use crate::losses::SurvivalLabel;

/// Harrell's concordance index for hazards (higher hazard = earlier event).
///
/// A pair is evaluable when the sample with the earlier time had an event,
/// or when both times are equal and exactly one of the two had an event (the
/// event sample counts as earlier). Equal-time pairs where both had events
/// are not evaluable. Hazard ties score one half.
pub fn concordance_index(hazard: &[f64], labels: &[SurvivalLabel]) -> Result<f64> {
    let counts = concordance_counts(hazard, labels)?;
    if counts.evaluable == 0 {
        return Err(Error::NonAdmissible(
            "no evaluable pairs for the concordance index (e.g. all samples censored)".into(),
        ));
    }
    Ok(counts.score())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConcordanceCounts {
    pub concordant: u64,
    pub tied: u64,
    pub evaluable: u64,
}

impl ConcordanceCounts {
    pub fn score(&self) -> f64 {
        (self.concordant as f64 + 0.5 * self.tied as f64) / self.evaluable as f64
    }
}

pub fn concordance_counts(hazard: &[f64], labels: &[SurvivalLabel]) -> Result<ConcordanceCounts> {
    if hazard.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} hazards for {} labels",
            hazard.len(),
            labels.len()
        )));
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| labels[a].time.total_cmp(&labels[b].time));

    let mut counts = ConcordanceCounts::default();
    for (pos, &i) in order.iter().enumerate() {
        if !labels[i].event {
            continue;
        }
        let ti = labels[i].time;
        // Samples before `pos` with the same time: only censored ones count.
        for &j in order[..pos].iter().rev() {
            if labels[j].time != ti {
                break;
            }
            if !labels[j].event {
                tally(&mut counts, hazard[i], hazard[j]);
            }
        }
        for &j in &order[pos + 1..] {
            if labels[j].time == ti && labels[j].event {
                continue;
            }
            tally(&mut counts, hazard[i], hazard[j]);
        }
    }
    Ok(counts)
}

#[inline]
fn tally(c: &mut ConcordanceCounts, earlier: f64, later: f64) {
    c.evaluable += 1;
    if earlier > later {
        c.concordant += 1;
    } else if earlier == later {
        c.tied += 1;
    }
}
