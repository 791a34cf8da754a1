//! Dense numeric kernel: matrices, SELU / alpha-dropout primitives and
//! reverse-mode gradients for stacked affine layers.

pub mod activation;
pub mod dropout;
mod matrix;
pub mod tape;

pub use activation::{selu, selu_backward, Activation, ActivationConstants};
pub use dropout::{alpha_dropout, AlphaDropoutCoeffs, DropoutMask, Mode};
pub use matrix::Matrix;
pub use tape::{backward, linear_forward, GradTape, Linear, ParamGrads};

use rand::Rng;

/// LeCun-normal initialised layer: weights ~ N(0, 1/fan_in), zero bias.
pub fn lecun_normal<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Linear {
    let std = 1.0 / (n_in as f64).sqrt();
    Linear {
        weight: Matrix::random_normal(n_in, n_out, std, rng),
        bias: vec![0.0; n_out],
    }
}
