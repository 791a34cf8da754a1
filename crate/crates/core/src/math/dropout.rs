//! Alpha dropout for self-normalizing networks.
//!
//! Dropped units are set to the SELU negative saturation `α′ = −λα` instead of
//! zero, and an affine correction `y = a·z + b` restores zero mean and unit
//! variance for standard-normal inputs:
//!
//! ```text
//! a = (q + α′²·q·(1 − q))^(−1/2),   b = −a·(1 − q)·α′,   q = 1 − p
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ActivationConstants, Matrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// Affine correction coefficients for a given drop probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaDropoutCoeffs {
    pub a: f64,
    pub b: f64,
    pub dropped_value: f64,
}

impl AlphaDropoutCoeffs {
    pub fn new(p: f64, c: ActivationConstants) -> Result<Self> {
        check_probability(p)?;
        let q = 1.0 - p;
        let alpha_p = c.neg_saturation();
        let a = (q + alpha_p * alpha_p * q * (1.0 - q)).powf(-0.5);
        let b = -a * (1.0 - q) * alpha_p;
        Ok(Self {
            a,
            b,
            dropped_value: alpha_p,
        })
    }
}

pub fn check_probability(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Parameter(format!(
            "dropout probability {p} outside [0, 1)"
        )));
    }
    Ok(())
}

/// Keep/drop decisions for one dropout application; `true` means kept.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask {
    pub keep: Vec<bool>,
    /// Multiplier applied to the upstream gradient of kept units.
    pub scale: f64,
}

impl DropoutMask {
    pub fn all_keep(len: usize) -> Self {
        Self {
            keep: vec![true; len],
            scale: 1.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.keep.iter().all(|&k| k)
    }

    pub fn backward(&self, upstream: &Matrix) -> Result<Matrix> {
        if upstream.data().len() != self.keep.len() {
            return Err(Error::Shape(format!(
                "dropout mask of {} entries vs gradient of {}",
                self.keep.len(),
                upstream.data().len()
            )));
        }
        let mut out = upstream.clone();
        for (g, &k) in out.data_mut().iter_mut().zip(&self.keep) {
            *g = if k { *g * self.scale } else { 0.0 };
        }
        Ok(out)
    }
}

pub fn alpha_dropout<R: Rng + ?Sized>(
    x: &Matrix,
    p: f64,
    mode: Mode,
    rng: &mut R,
    c: ActivationConstants,
) -> Result<(Matrix, DropoutMask)> {
    check_probability(p)?;
    let n = x.data().len();
    if mode == Mode::Eval || p == 0.0 {
        return Ok((x.clone(), DropoutMask::all_keep(n)));
    }
    let coeffs = AlphaDropoutCoeffs::new(p, c)?;
    let q = 1.0 - p;
    let mut out = x.clone();
    let mut keep = Vec::with_capacity(n);
    for v in out.data_mut().iter_mut() {
        let k = rng.random::<f64>() < q;
        let z = if k { *v } else { coeffs.dropped_value };
        *v = coeffs.a * z + coeffs.b;
        keep.push(k);
    }
    Ok((
        out,
        DropoutMask {
            keep,
            scale: coeffs.a,
        },
    ))
}
