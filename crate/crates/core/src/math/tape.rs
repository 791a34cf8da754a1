//! Reverse-mode gradients for stacks of affine layers and pointwise ops.

use super::{activation, Activation, ActivationConstants, DropoutMask, Matrix};
use crate::error::{Error, Result};

/// Affine map `x·W + b` with `W` stored as `n_in × n_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn n_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn n_out(&self) -> usize {
        self.weight.cols()
    }

    pub fn param_count(&self) -> usize {
        self.weight.data().len() + self.bias.len()
    }

    pub fn zeros_like(&self) -> Linear {
        Linear {
            weight: Matrix::zeros(self.n_in(), self.n_out()),
            bias: vec![0.0; self.n_out()],
        }
    }
}

#[derive(Clone, Debug)]
enum TapeOp {
    Linear { layer: usize, input: Matrix },
    Activation { kind: Activation, consts: ActivationConstants, pre: Matrix },
    Dropout { mask: DropoutMask },
    LogSoftmax { output: Matrix },
}

/// Ordered record of forward caches. A disabled tape records nothing.
#[derive(Clone, Debug, Default)]
pub struct GradTape {
    enabled: bool,
    ops: Vec<TapeOp>,
}

impl GradTape {
    pub fn new() -> Self {
        Self {
            enabled: true,
            ops: Vec::new(),
        }
    }

    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ops: Vec::new(),
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn dropout_masks(&self) -> impl Iterator<Item = &DropoutMask> {
        self.ops.iter().filter_map(|op| match op {
            TapeOp::Dropout { mask } => Some(mask),
            _ => None,
        })
    }

    fn push(&mut self, op: TapeOp) {
        if self.enabled {
            self.ops.push(op);
        }
    }

    pub fn record_activation(&mut self, kind: Activation, consts: ActivationConstants, pre: &Matrix) {
        if self.enabled {
            self.push(TapeOp::Activation {
                kind,
                consts,
                pre: pre.clone(),
            });
        }
    }

    pub fn record_dropout(&mut self, mask: DropoutMask) {
        if !mask.is_identity() {
            self.push(TapeOp::Dropout { mask });
        }
    }

    pub fn record_log_softmax(&mut self, output: &Matrix) {
        if self.enabled {
            self.push(TapeOp::LogSoftmax {
                output: output.clone(),
            });
        }
    }
}

/// `x·W + b`, caching `x` on the tape under `layer_index`.
pub fn linear_forward(
    x: &Matrix,
    layer: &Linear,
    layer_index: usize,
    tape: &mut GradTape,
) -> Result<Matrix> {
    if x.cols() != layer.n_in() {
        return Err(Error::Shape(format!(
            "layer {layer_index} expects {} inputs, batch has {}",
            layer.n_in(),
            x.cols()
        )));
    }
    let mut out = x.matmul(&layer.weight)?;
    out.add_row_vector(&layer.bias)?;
    if tape.enabled {
        tape.push(TapeOp::Linear {
            layer: layer_index,
            input: x.clone(),
        });
    }
    Ok(out)
}

/// Gradients for every layer plus the network input.
#[derive(Clone, Debug)]
pub struct ParamGrads {
    pub layers: Vec<Linear>,
    pub input: Matrix,
}

impl ParamGrads {
    pub fn zeros_for(layers: &[Linear]) -> Self {
        Self {
            layers: layers.iter().map(Linear::zeros_like).collect(),
            input: Matrix::zeros(0, 0),
        }
    }
}

/// Replays the tape in reverse. `loss_grad` is ∂L/∂(final output).
pub fn backward(tape: &GradTape, layers: &[Linear], loss_grad: &Matrix) -> Result<ParamGrads> {
    if !tape.enabled {
        return Err(Error::Contract("backward called on a disabled tape".into()));
    }
    let mut grads = ParamGrads::zeros_for(layers);
    let mut g = loss_grad.clone();
    for op in tape.ops.iter().rev() {
        g = match op {
            TapeOp::LogSoftmax { output } => activation::log_softmax_backward(output, &g)?,
            TapeOp::Dropout { mask } => mask.backward(&g)?,
            TapeOp::Activation { kind, consts, pre } => kind.backward(pre, &g, *consts)?,
            TapeOp::Linear { layer, input } => {
                let params = layers.get(*layer).ok_or_else(|| {
                    Error::Contract(format!("tape references missing layer {layer}"))
                })?;
                if g.cols() != params.n_out() || g.rows() != input.rows() {
                    return Err(Error::Shape(format!(
                        "gradient {}x{} does not match layer {layer} output {}x{}",
                        g.rows(),
                        g.cols(),
                        input.rows(),
                        params.n_out()
                    )));
                }
                let slot = &mut grads.layers[*layer];
                let dw = input.t_matmul(&g)?;
                for (acc, v) in slot.weight.data_mut().iter_mut().zip(dw.data()) {
                    *acc += v;
                }
                for (acc, v) in slot.bias.iter_mut().zip(g.col_sums()) {
                    *acc += v;
                }
                g.matmul_t(&params.weight)?
            }
        };
    }
    grads.input = g;
    Ok(grads)
}
