use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Linear, ParamGrads};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;
pub const RMSPROP_ALPHA: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
    Rmsprop,
    Adamw,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 4] = [
        OptimizerKind::Adam,
        OptimizerKind::Sgd,
        OptimizerKind::Rmsprop,
        OptimizerKind::Adamw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
            OptimizerKind::Rmsprop => "rmsprop",
            OptimizerKind::Adamw => "adamw",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown optimizer `{s}`")))
    }
}

/// Moment buffers, one pair per parameter tensor.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub step: usize,
    first: Vec<Linear>,
    second: Vec<Linear>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, layers: &[Linear]) -> Self {
        Self {
            kind,
            step: 0,
            first: layers.iter().map(Linear::zeros_like).collect(),
            second: layers.iter().map(Linear::zeros_like).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Hyper {
    kind: OptimizerKind,
    lr: f64,
    weight_decay: f64,
    bias1: f64,
    bias2: f64,
}

fn update(h: Hyper, p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]) {
    for i in 0..p.len() {
        match h.kind {
            OptimizerKind::Sgd => {
                let gi = g[i] + h.weight_decay * p[i];
                p[i] -= h.lr * gi;
            }
            OptimizerKind::Adam | OptimizerKind::Adamw => {
                let gi = if h.kind == OptimizerKind::Adam {
                    g[i] + h.weight_decay * p[i]
                } else {
                    p[i] -= h.lr * h.weight_decay * p[i];
                    g[i]
                };
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * gi;
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * gi * gi;
                let m_hat = m[i] / h.bias1;
                let v_hat = v[i] / h.bias2;
                p[i] -= h.lr * m_hat / (v_hat.sqrt() + EPS);
            }
            OptimizerKind::Rmsprop => {
                let gi = g[i] + h.weight_decay * p[i];
                v[i] = RMSPROP_ALPHA * v[i] + (1.0 - RMSPROP_ALPHA) * gi * gi;
                p[i] -= h.lr * gi / (v[i].sqrt() + EPS);
            }
        }
    }
}

/// One update of every layer at index ≥ `frozen`. Frozen layers are not
/// touched (no gradient step, no weight decay).
pub fn optimizer_step(
    layers: &mut [Linear],
    grads: &ParamGrads,
    state: &mut OptimizerState,
    lr: f64,
    weight_decay: f64,
    frozen: usize,
) -> Result<()> {
    if grads.layers.len() != layers.len() || state.first.len() != layers.len() {
        return Err(Error::Shape(format!(
            "{} gradient tensors for {} layers",
            grads.layers.len(),
            layers.len()
        )));
    }
    for (i, (l, g)) in layers.iter().zip(&grads.layers).enumerate() {
        if l.weight.shape() != g.weight.shape() || l.bias.len() != g.bias.len() {
            return Err(Error::Shape(format!("gradient shape mismatch at layer {i}")));
        }
        if i >= frozen
            && g
                .weight
                .data()
                .iter()
                .chain(&g.bias)
                .any(|v| !v.is_finite())
        {
            return Err(Error::Divergence {
                layer: format!("layer {i}"),
                step: state.step + 1,
                detail: "non-finite gradient".into(),
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let h = Hyper {
        kind: state.kind,
        lr,
        weight_decay,
        bias1: 1.0 - BETA1.powi(t),
        bias2: 1.0 - BETA2.powi(t),
    };
    for (i, layer) in layers.iter_mut().enumerate().skip(frozen) {
        let g = &grads.layers[i];
        let (m, v) = (&mut state.first[i], &mut state.second[i]);
        update(h, layer.weight.data_mut(), g.weight.data(), m.weight.data_mut(), v.weight.data_mut());
        update(h, &mut layer.bias, &g.bias, &mut m.bias, &mut v.bias);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Matrix;

    fn scalar_layer(w: f64) -> Vec<Linear> {
        vec![Linear {
            weight: Matrix::from_vec(1, 1, vec![w]).unwrap(),
            bias: vec![0.0],
        }]
    }

    fn grads(g: f64) -> ParamGrads {
        ParamGrads {
            layers: scalar_layer(g)
                .into_iter()
                .map(|mut l| {
                    l.bias = vec![0.0];
                    l
                })
                .collect(),
            input: Matrix::zeros(0, 0),
        }
    }

    #[test]
    fn sgd_definitional_step() {
        let mut p = scalar_layer(1.0);
        let mut st = OptimizerState::new(OptimizerKind::Sgd, &p);
        optimizer_step(&mut p, &grads(1.0), &mut st, 0.1, 0.0, 0).unwrap();
        assert!((p[0].weight.get(0, 0) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        for kind in [OptimizerKind::Adam, OptimizerKind::Adamw] {
            for g in [3.0, -0.02] {
                let mut p = scalar_layer(0.5);
                let mut st = OptimizerState::new(kind, &p);
                optimizer_step(&mut p, &grads(g), &mut st, 1e-3, 0.0, 0).unwrap();
                let delta = p[0].weight.get(0, 0) - 0.5;
                assert!(delta.signum() == -g.signum());
                assert!((delta.abs() - 1e-3).abs() < 1e-8, "{kind:?} {delta}");
            }
        }
    }

    #[test]
    fn zero_grad_zero_decay_is_noop() {
        for kind in OptimizerKind::ALL {
            let mut p = scalar_layer(0.7);
            let mut st = OptimizerState::new(kind, &p);
            optimizer_step(&mut p, &grads(0.0), &mut st, 0.1, 0.0, 0).unwrap();
            assert_eq!(p[0].weight.get(0, 0), 0.7);
        }
    }

    #[test]
    fn nan_gradient_aborts() {
        let mut p = scalar_layer(0.7);
        let mut st = OptimizerState::new(OptimizerKind::Adam, &p);
        let err = optimizer_step(&mut p, &grads(f64::NAN), &mut st, 0.1, 0.0, 0).unwrap_err();
        assert!(matches!(err, Error::Divergence { step: 1, .. }));
    }

    #[test]
    fn frozen_layers_untouched() {
        let mut p = scalar_layer(0.7);
        let mut st = OptimizerState::new(OptimizerKind::Sgd, &p);
        optimizer_step(&mut p, &grads(5.0), &mut st, 0.1, 0.5, 1).unwrap();
        assert_eq!(p[0].weight.get(0, 0), 0.7);
    }

    #[test]
    fn decoupled_decay_differs_from_coupled() {
        let mut a = scalar_layer(1.0);
        let mut b = scalar_layer(1.0);
        let mut sa = OptimizerState::new(OptimizerKind::Adam, &a);
        let mut sb = OptimizerState::new(OptimizerKind::Adamw, &b);
        for _ in 0..3 {
            optimizer_step(&mut a, &grads(0.1), &mut sa, 0.01, 0.1, 0).unwrap();
            optimizer_step(&mut b, &grads(0.1), &mut sb, 0.01, 0.1, 0).unwrap();
        }
        assert_ne!(a[0].weight.get(0, 0), b[0].weight.get(0, 0));
    }
}
