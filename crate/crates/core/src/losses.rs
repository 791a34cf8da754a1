//! Training objective: `λ_c·L_cox + λ_ce·L_ce + λ_r·L_reg`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{GradTape, Matrix, ParamGrads};
use crate::model::ModelParams;

/// Observed time `min(T_s, T_c)` and event indicator (`true` = event observed).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalLabel {
    pub time: f64,
    pub event: bool,
}

impl SurvivalLabel {
    pub fn new(time: f64, event: bool) -> Self {
        Self { time, event }
    }
}

pub fn labels_from(times: &[f64], events: &[bool]) -> Vec<SurvivalLabel> {
    times
        .iter()
        .zip(events)
        .map(|(&t, &e)| SurvivalLabel::new(t, e))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub cox: f64,
    pub ce: f64,
    pub reg: f64,
}

impl LossWeights {
    pub fn survival() -> Self {
        Self {
            cox: 1.0,
            ce: 0.0,
            reg: 1e-4,
        }
    }

    pub fn classification() -> Self {
        Self {
            cox: 0.0,
            ce: 1.0,
            reg: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.cox, self.ce, self.reg]
            .iter()
            .any(|w| !w.is_finite() || *w < 0.0)
        {
            return Err(Error::Config(format!("loss weights must be non-negative: {self:?}")));
        }
        if self.cox <= 0.0 && self.ce <= 0.0 {
            return Err(Error::Config(
                "at least one of lambda_cox, lambda_ce must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn check_batch(theta: &[f64], labels: &[SurvivalLabel]) -> Result<()> {
    if theta.is_empty() {
        return Err(Error::Contract("cox loss on an empty batch".into()));
    }
    if theta.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} hazards for {} labels",
            theta.len(),
            labels.len()
        )));
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::Contract("non-finite hazard".into()));
    }
    Ok(())
}

/// Indices grouped by equal time, groups in descending time order.
fn time_groups_desc(labels: &[SurvivalLabel]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| labels[b].time.total_cmp(&labels[a].time).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if labels[g[0]].time == labels[i].time => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Running log-sum-exp that never exponentiates a positive number.
#[derive(Clone, Copy)]
struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl LogSumExp {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    fn push(&mut self, v: f64) {
        if v > self.max {
            self.scaled = self.scaled * (self.max - v).exp() + 1.0;
            self.max = v;
        } else {
            self.scaled += (v - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        self.max + self.scaled.ln()
    }
}

/// `log Σ_{j: t_j ≥ t_i} e^{θ_j}` for every sample.
fn risk_set_lse(theta: &[f64], labels: &[SurvivalLabel]) -> Vec<f64> {
    let mut out = vec![0.0; theta.len()];
    let mut acc = LogSumExp::new();
    for group in time_groups_desc(labels) {
        for &j in &group {
            acc.push(theta[j]);
        }
        let v = acc.value();
        for &i in &group {
            out[i] = v;
        }
    }
    out
}

/// Negative Cox partial log-likelihood averaged over the batch size.
/// Risk sets use `t_j ≥ t_i`, so tied times share each other's risk sets.
pub fn cox_loss(theta: &[f64], labels: &[SurvivalLabel]) -> Result<f64> {
    check_batch(theta, labels)?;
    let lse = risk_set_lse(theta, labels);
    let total: f64 = labels
        .iter()
        .enumerate()
        .filter(|(_, l)| l.event)
        .map(|(i, _)| theta[i] - lse[i])
        .sum();
    Ok(-total / theta.len() as f64)
}

/// ∂L_cox/∂θ_k = −(1/N)·[δ_k − Σ_{i: t_i ≤ t_k, δ_i} e^{θ_k − lse_i}].
pub fn cox_loss_grad(theta: &[f64], labels: &[SurvivalLabel]) -> Result<Vec<f64>> {
    check_batch(theta, labels)?;
    let n = theta.len() as f64;
    let lse = risk_set_lse(theta, labels);
    let mut groups = time_groups_desc(labels);
    groups.reverse();
    let mut grad = vec![0.0; theta.len()];
    // log Σ_{i: t_i ≤ t, δ_i} e^{−lse_i}, accumulated in ascending time
    let mut acc = LogSumExp::new();
    for group in groups {
        for &i in &group {
            if labels[i].event {
                acc.push(-lse[i]);
            }
        }
        let log_c = acc.value();
        for &k in &group {
            let delta = if labels[k].event { 1.0 } else { 0.0 };
            let share = if log_c == f64::NEG_INFINITY {
                0.0
            } else {
                (theta[k] + log_c).exp()
            };
            grad[k] = -(delta - share) / n;
        }
    }
    Ok(grad)
}

/// `−(1/N) Σ log p_{n, y_n}` on log-probabilities.
pub fn cross_entropy(log_probs: &Matrix, labels: &[usize]) -> Result<f64> {
    check_classes(log_probs, labels)?;
    if labels.is_empty() {
        return Err(Error::Contract("cross entropy on an empty batch".into()));
    }
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(n, &y)| log_probs.get(n, y))
        .sum();
    Ok(-total / labels.len() as f64)
}

/// Gradient with respect to the log-probabilities.
pub fn cross_entropy_grad(log_probs: &Matrix, labels: &[usize]) -> Result<Matrix> {
    check_classes(log_probs, labels)?;
    let n = labels.len() as f64;
    let mut g = Matrix::zeros(log_probs.rows(), log_probs.cols());
    for (r, &y) in labels.iter().enumerate() {
        g.set(r, y, -1.0 / n);
    }
    Ok(g)
}

fn check_classes(log_probs: &Matrix, labels: &[usize]) -> Result<()> {
    if log_probs.rows() != labels.len() {
        return Err(Error::Contract(format!(
            "{} prediction rows for {} labels",
            log_probs.rows(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= log_probs.cols()) {
        return Err(Error::Contract(format!(
            "class label {bad} out of range [0, {})",
            log_probs.cols()
        )));
    }
    Ok(())
}

/// Σ|w| over every weight matrix; biases are not penalized.
pub fn l1_reg(params: &ModelParams) -> f64 {
    params
        .layers
        .iter()
        .flat_map(|l| l.weight.data())
        .map(|w| w.abs())
        .sum()
}

/// Subgradient of [`l1_reg`]: sign(w), 0 at w == 0.
pub fn l1_reg_grad(params: &ModelParams) -> Vec<Matrix> {
    params
        .layers
        .iter()
        .map(|l| {
            l.weight.map(|w| {
                if w > 0.0 {
                    1.0
                } else if w < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            })
        })
        .collect()
}

/// Whatever the active head produced, plus the matching targets.
#[derive(Clone, Copy, Debug, Default)]
pub struct LossInputs<'a> {
    pub hazards: Option<&'a [f64]>,
    pub survival: Option<&'a [SurvivalLabel]>,
    pub log_probs: Option<&'a Matrix>,
    pub classes: Option<&'a [usize]>,
}

impl<'a> LossInputs<'a> {
    pub fn survival(hazards: &'a [f64], labels: &'a [SurvivalLabel]) -> Self {
        Self {
            hazards: Some(hazards),
            survival: Some(labels),
            ..Self::default()
        }
    }

    pub fn classification(log_probs: &'a Matrix, classes: &'a [usize]) -> Self {
        Self {
            log_probs: Some(log_probs),
            classes: Some(classes),
            ..Self::default()
        }
    }

    fn cox_inputs(&self) -> Result<(&'a [f64], &'a [SurvivalLabel])> {
        match (self.hazards, self.survival) {
            (Some(h), Some(s)) => Ok((h, s)),
            _ => Err(Error::Contract(
                "lambda_cox > 0 but hazards or survival labels are absent".into(),
            )),
        }
    }

    fn ce_inputs(&self) -> Result<(&'a Matrix, &'a [usize])> {
        match (self.log_probs, self.classes) {
            (Some(p), Some(c)) => Ok((p, c)),
            _ => Err(Error::Contract(
                "lambda_ce > 0 but log-probabilities or class labels are absent".into(),
            )),
        }
    }
}

/// Weighted sum of the components; a component with zero weight is never
/// evaluated.
pub fn combined_loss(
    inputs: &LossInputs<'_>,
    weights: &LossWeights,
    params: Option<&ModelParams>,
) -> Result<f64> {
    let mut total = 0.0;
    if weights.cox > 0.0 {
        let (h, s) = inputs.cox_inputs()?;
        total += weights.cox * cox_loss(h, s)?;
    }
    if weights.ce > 0.0 {
        let (p, c) = inputs.ce_inputs()?;
        total += weights.ce * cross_entropy(p, c)?;
    }
    if weights.reg > 0.0 {
        let params = params
            .ok_or_else(|| Error::Contract("lambda_reg > 0 but no parameters given".into()))?;
        total += weights.reg * l1_reg(params);
    }
    Ok(total)
}

/// Loss value and parameter gradients for one recorded forward pass.
pub fn loss_and_grads(
    params: &ModelParams,
    tape: &GradTape,
    output: &Matrix,
    inputs: &LossInputs<'_>,
    weights: &LossWeights,
) -> Result<(f64, ParamGrads)> {
    let loss = combined_loss(inputs, weights, Some(params))?;
    let mut out_grad = Matrix::zeros(output.rows(), output.cols());
    if weights.cox > 0.0 {
        let (h, s) = inputs.cox_inputs()?;
        if output.cols() != 1 {
            return Err(Error::Contract("cox loss requires a survival head".into()));
        }
        for (g, d) in out_grad.data_mut().iter_mut().zip(cox_loss_grad(h, s)?) {
            *g += weights.cox * d;
        }
    }
    if weights.ce > 0.0 {
        let (p, c) = inputs.ce_inputs()?;
        let d = cross_entropy_grad(p, c)?;
        out_grad.check_same_shape(&d, "cross entropy gradient")?;
        for (g, d) in out_grad.data_mut().iter_mut().zip(d.data()) {
            *g += weights.ce * d;
        }
    }
    let mut grads = params.backward(tape, &out_grad)?;
    if weights.reg > 0.0 {
        for (slot, sign) in grads.layers.iter_mut().zip(l1_reg_grad(params)) {
            for (g, s) in slot.weight.data_mut().iter_mut().zip(sign.data()) {
                *g += weights.reg * s;
            }
        }
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, EncoderConfig, HeadKind};

    /// Direct O(N²) evaluation of the Cox loss formula.
    fn cox_direct(theta: &[f64], labels: &[SurvivalLabel]) -> f64 {
        let n = theta.len();
        let mut total = 0.0;
        for i in 0..n {
            if !labels[i].event {
                continue;
            }
            let s: f64 = (0..n)
                .filter(|&j| labels[j].time >= labels[i].time)
                .map(|j| theta[j].exp())
                .sum();
            total += theta[i] - s.ln();
        }
        -total / n as f64
    }

    #[test]
    fn cox_two_sample_value() {
        let labels = labels_from(&[1.0, 2.0], &[true, false]);
        let l = cox_loss(&[1.0, 0.0], &labels).unwrap();
        let expected = -0.5 * (1.0 - (1.0f64.exp() + 1.0).ln());
        assert!((l - expected).abs() < 1e-12, "{l}");
        assert!((l - cox_direct(&[1.0, 0.0], &labels)).abs() < 1e-15);
    }

    #[test]
    fn cox_all_censored_is_zero() {
        let labels = labels_from(&[1.0, 2.0, 3.0], &[false; 3]);
        assert_eq!(cox_loss(&[0.3, -1.0, 2.0], &labels).unwrap(), 0.0);
        let g = cox_loss_grad(&[0.3, -1.0, 2.0], &labels).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cox_single_event_is_zero() {
        let labels = [SurvivalLabel::new(4.0, true)];
        assert_eq!(cox_loss(&[17.3], &labels).unwrap(), 0.0);
    }

    #[test]
    fn cox_empty_batch_rejected() {
        assert!(matches!(cox_loss(&[], &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn cox_large_hazards_stay_finite() {
        let labels = labels_from(&[1.0, 2.0, 3.0], &[true, true, false]);
        let theta = [800.0, -900.0, 750.0];
        assert!(cox_loss(&theta, &labels).unwrap().is_finite());
        assert!(cox_loss_grad(&theta, &labels).unwrap().iter().all(|g| g.is_finite()));
    }

    #[test]
    fn cox_grad_matches_finite_differences() {
        let labels = labels_from(&[1.0, 2.0], &[true, false]);
        let theta = [1.0, 0.0];
        let g = cox_loss_grad(&theta, &labels).unwrap();
        let h = 1e-5;
        for k in 0..2 {
            let mut p = theta;
            let mut m = theta;
            p[k] += h;
            m[k] -= h;
            let fd = (cox_loss(&p, &labels).unwrap() - cox_loss(&m, &labels).unwrap()) / (2.0 * h);
            assert!((g[k] - fd).abs() <= 1e-6 * fd.abs().max(1e-3), "{k}: {} vs {fd}", g[k]);
        }
    }

    #[test]
    fn cox_grad_sums_to_zero_for_shared_risk_set() {
        // One risk set, all events: gradient is a centred softmax.
        let labels = labels_from(&[5.0; 4], &[true; 4]);
        let g = cox_loss_grad(&[0.1, -0.4, 2.0, 0.7], &labels).unwrap();
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_values() {
        let p = Matrix::from_rows(&[vec![0.75f64.ln(), 0.25f64.ln()]]).unwrap();
        assert!((cross_entropy(&p, &[0]).unwrap() - 0.287682).abs() < 1e-6);

        let one_hot = Matrix::from_rows(&[vec![0.0, f64::NEG_INFINITY]]).unwrap();
        assert_eq!(cross_entropy(&one_hot, &[0]).unwrap(), 0.0);

        let uniform = Matrix::filled(3, 33, (1.0f64 / 33.0).ln());
        let l = cross_entropy(&uniform, &[0, 5, 32]).unwrap();
        assert!((l - 33f64.ln()).abs() < 1e-12);
        assert!((l - 3.4965).abs() < 1e-4);
    }

    #[test]
    fn cross_entropy_label_out_of_range() {
        let p = Matrix::filled(1, 2, 0.5f64.ln());
        assert!(matches!(cross_entropy(&p, &[2]), Err(Error::Contract(_))));
    }

    fn params_with_weights(ws: &[f64]) -> ModelParams {
        let cfg = EncoderConfig::new(1, vec![ws.len()]);
        let mut p = init_params(&cfg, HeadKind::Survival, 0).unwrap();
        p.layers[0].weight = Matrix::from_vec(1, ws.len(), ws.to_vec()).unwrap();
        p.layers[0].bias = vec![9.0; ws.len()];
        p.layers[1].weight = Matrix::zeros(ws.len(), 1);
        p
    }

    #[test]
    fn l1_values() {
        let p = params_with_weights(&[1.0, -2.0, 0.5]);
        assert_eq!(l1_reg(&p), 3.5);
        let z = params_with_weights(&[0.0, 0.0, 0.0]);
        assert_eq!(l1_reg(&z), 0.0);
        let d = params_with_weights(&[2.0, -4.0, 1.0]);
        assert_eq!(l1_reg(&d), 2.0 * l1_reg(&p));
    }

    #[test]
    fn combined_reduces_to_components() {
        let labels = labels_from(&[1.0, 2.0], &[true, false]);
        let theta = [1.0, 0.0];
        let inputs = LossInputs::survival(&theta, &labels);
        let cox_only = LossWeights { cox: 1.0, ce: 0.0, reg: 0.0 };
        assert_eq!(
            combined_loss(&inputs, &cox_only, None).unwrap(),
            cox_loss(&theta, &labels).unwrap()
        );

        let lp = Matrix::from_rows(&[vec![0.75f64.ln(), 0.25f64.ln()]]).unwrap();
        let ce_only = LossWeights { cox: 0.0, ce: 1.0, reg: 0.0 };
        let inputs_ce = LossInputs::classification(&lp, &[0]);
        assert_eq!(
            combined_loss(&inputs_ce, &ce_only, None).unwrap(),
            cross_entropy(&lp, &[0]).unwrap()
        );

        let p = params_with_weights(&[0.5]);
        let w = LossWeights { cox: 1.0, ce: 0.0, reg: 2.0 };
        let v = combined_loss(&inputs, &w, Some(&p)).unwrap();
        let expected = -0.5 * (1.0 - (1.0f64.exp() + 1.0).ln()) + 2.0 * 0.5;
        assert!((v - expected).abs() < 1e-12, "{v}");
    }

    #[test]
    fn combined_missing_inputs_is_contract_error() {
        let lp = Matrix::filled(1, 2, 0.5f64.ln());
        let inputs = LossInputs::classification(&lp, &[0]);
        let w = LossWeights { cox: 1.0, ce: 0.0, reg: 0.0 };
        assert!(matches!(combined_loss(&inputs, &w, None), Err(Error::Contract(_))));
    }

    #[test]
    fn weights_validation() {
        assert!(LossWeights::survival().validate().is_ok());
        assert!(LossWeights { cox: 0.0, ce: 0.0, reg: 1.0 }.validate().is_err());
        assert!(LossWeights { cox: -1.0, ce: 1.0, reg: 0.0 }.validate().is_err());
    }

    mod props {
        use proptest::prelude::*;

        use super::*;

        fn batch() -> impl Strategy<Value = (Vec<f64>, Vec<SurvivalLabel>)> {
            (1usize..25).prop_flat_map(|n| {
                (
                    proptest::collection::vec(-5.0f64..5.0, n),
                    proptest::collection::vec((0u8..6, any::<bool>()), n),
                )
                    .prop_map(|(theta, raw)| {
                        let labels = raw
                            .into_iter()
                            .map(|(t, e)| SurvivalLabel::new(f64::from(t), e))
                            .collect();
                        (theta, labels)
                    })
            })
        }

        proptest! {
            #[test]
            fn matches_direct_formula((theta, labels) in batch()) {
                let fast = cox_loss(&theta, &labels).unwrap();
                let slow = cox_direct(&theta, &labels);
                prop_assert!((fast - slow).abs() < 1e-10);
            }

            #[test]
            fn shift_invariant((theta, labels) in batch(), c in -10.0f64..10.0) {
                let shifted: Vec<f64> = theta.iter().map(|t| t + c).collect();
                let a = cox_loss(&theta, &labels).unwrap();
                let b = cox_loss(&shifted, &labels).unwrap();
                prop_assert!((a - b).abs() < 1e-9);
            }

            #[test]
            fn permutation_invariant((theta, labels) in batch(), rot in 0usize..25) {
                let n = theta.len();
                let r = rot % n;
                let mut t2 = theta.clone();
                let mut l2 = labels.clone();
                t2.rotate_left(r);
                l2.rotate_left(r);
                let a = cox_loss(&theta, &labels).unwrap();
                let b = cox_loss(&t2, &l2).unwrap();
                prop_assert!((a - b).abs() < 1e-10);
            }

            #[test]
            fn gradient_matches_finite_differences((theta, labels) in batch()) {
                let g = cox_loss_grad(&theta, &labels).unwrap();
                let h = 1e-5;
                for k in 0..theta.len() {
                    let mut p = theta.clone();
                    let mut m = theta.clone();
                    p[k] += h;
                    m[k] -= h;
                    let fd = (cox_direct(&p, &labels) - cox_direct(&m, &labels)) / (2.0 * h);
                    prop_assert!((g[k] - fd).abs() <= 1e-6 * fd.abs().max(1e-3));
                }
            }
        }
    }
}
