use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::Result;

/// SELU constants. `neg_saturation` is the value SELU approaches as x → −∞.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActivationConstants {
    pub lambda: f64,
    pub alpha: f64,
}

impl Default for ActivationConstants {
    fn default() -> Self {
        Self {
            lambda: 1.05071,
            alpha: 1.6733,
        }
    }
}

impl ActivationConstants {
    pub fn neg_saturation(&self) -> f64 {
        -self.lambda * self.alpha
    }
}

/// Hidden-block nonlinearity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Selu,
    /// Plain ELU with alpha = 1.
    Elu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Selu => "selu",
            Activation::Elu => "elu",
        }
    }

    pub fn forward(self, x: &Matrix, c: ActivationConstants) -> Matrix {
        match self {
            Activation::Selu => selu(x, c),
            Activation::Elu => elu(x),
        }
    }

    pub fn backward(self, x: &Matrix, upstream: &Matrix, c: ActivationConstants) -> Result<Matrix> {
        match self {
            Activation::Selu => selu_backward(x, upstream, c),
            Activation::Elu => elu_backward(x, upstream),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "selu" => Ok(Activation::Selu),
            "elu" => Ok(Activation::Elu),
            other => Err(crate::Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

#[inline]
pub fn selu_scalar(x: f64, c: ActivationConstants) -> f64 {
    if x > 0.0 {
        c.lambda * x
    } else {
        c.lambda * c.alpha * x.exp_m1()
    }
}

/// Derivative of SELU; x == 0 takes the left branch.
#[inline]
pub fn selu_grad_scalar(x: f64, c: ActivationConstants) -> f64 {
    if x > 0.0 {
        c.lambda
    } else {
        c.lambda * c.alpha * x.exp()
    }
}

pub fn selu(x: &Matrix, c: ActivationConstants) -> Matrix {
    x.map(|v| selu_scalar(v, c))
}

pub fn selu_backward(x: &Matrix, upstream: &Matrix, c: ActivationConstants) -> Result<Matrix> {
    x.check_same_shape(upstream, "selu_backward")?;
    let mut out = upstream.clone();
    for (g, &v) in out.data_mut().iter_mut().zip(x.data()) {
        *g *= selu_grad_scalar(v, c);
    }
    Ok(out)
}

pub fn elu(x: &Matrix) -> Matrix {
    x.map(|v| if v > 0.0 { v } else { v.exp_m1() })
}

pub fn elu_backward(x: &Matrix, upstream: &Matrix) -> Result<Matrix> {
    x.check_same_shape(upstream, "elu_backward")?;
    let mut out = upstream.clone();
    for (g, &v) in out.data_mut().iter_mut().zip(x.data()) {
        if v <= 0.0 {
            *g *= v.exp();
        }
    }
    Ok(out)
}

/// Row-wise log-softmax with max subtraction.
pub fn log_softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
    out
}

/// Gradient through log-softmax given the output log-probabilities:
/// dz = g − softmax(z)·Σg per row.
pub fn log_softmax_backward(log_probs: &Matrix, upstream: &Matrix) -> Result<Matrix> {
    log_probs.check_same_shape(upstream, "log_softmax_backward")?;
    let mut out = upstream.clone();
    for r in 0..out.rows() {
        let total: f64 = upstream.row(r).iter().sum();
        for (g, lp) in out.row_mut(r).iter_mut().zip(log_probs.row(r)) {
            *g -= lp.exp() * total;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_vec(1, 1, vec![v]).unwrap()
    }

    #[test]
    fn selu_values() {
        let c = ActivationConstants::default();
        assert_eq!(selu(&scalar(0.0), c).get(0, 0), 0.0);
        assert!((selu(&scalar(1.0), c).get(0, 0) - 1.05071).abs() < 1e-12);
        assert!((selu(&scalar(-30.0), c).get(0, 0) + 1.75815).abs() < 1e-4);
    }

    #[test]
    fn selu_derivative_values() {
        let c = ActivationConstants::default();
        let one = scalar(1.0);
        assert!((selu_backward(&one, &one, c).unwrap().get(0, 0) - 1.05071).abs() < 1e-12);
        let g0 = selu_backward(&scalar(0.0), &one, c).unwrap().get(0, 0);
        assert!((g0 - 1.758153).abs() < 1e-6);
        let z = selu_backward(&scalar(-0.7), &scalar(0.0), c).unwrap().get(0, 0);
        assert_eq!(z, 0.0);
    }

    #[test]
    fn selu_backward_rejects_shape_mismatch() {
        let c = ActivationConstants::default();
        assert!(selu_backward(&Matrix::zeros(2, 2), &Matrix::zeros(2, 3), c).is_err());
    }

    #[test]
    fn selu_is_continuous_at_zero() {
        let c = ActivationConstants::default();
        let left = selu_scalar(-1e-12, c);
        let right = selu_scalar(1e-12, c);
        assert!((left - right).abs() < 1e-11);
    }

    #[test]
    fn elu_matches_definition() {
        let x = Matrix::from_vec(1, 3, vec![-1.0, 0.0, 2.0]).unwrap();
        let y = elu(&x);
        assert!((y.get(0, 0) - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
        assert_eq!(y.get(0, 1), 0.0);
        assert_eq!(y.get(0, 2), 2.0);
    }

    #[test]
    fn log_softmax_rows_normalize() {
        let x = Matrix::from_rows(&[vec![1000.0, 0.0, -5.0], vec![0.1, 0.2, 0.3]]).unwrap();
        let lp = log_softmax(&x);
        for r in 0..2 {
            let s: f64 = lp.row(r).iter().map(|v| v.exp()).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
