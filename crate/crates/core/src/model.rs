//! Self-normalizing encoder with swappable survival / classification heads.
//!
//! Each hidden block is `linear → activation → alpha dropout`; the output of
//! the last block is the patient embedding. The survival head maps the
//! embedding to a single hazard θ (larger θ means higher risk), the
//! classification head to per-class log-probabilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{
    self, activation, alpha_dropout, lecun_normal, linear_forward, Activation,
    ActivationConstants, GradTape, Linear, Matrix, Mode, ParamGrads,
};

pub const DEFAULT_HIDDEN_WIDTHS: [usize; 7] = [1024, 512, 256, 128, 48, 48, 48];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub dropout_p: f64,
    #[serde(default)]
    pub activation: Activation,
}

impl EncoderConfig {
    pub fn new(input_dim: usize, hidden_widths: Vec<usize>) -> Self {
        Self {
            input_dim,
            hidden_widths,
            dropout_p: 0.0,
            activation: Activation::Selu,
        }
    }

    pub fn full_size(input_dim: usize) -> Self {
        Self::new(input_dim, DEFAULT_HIDDEN_WIDTHS.to_vec())
    }

    pub fn with_dropout(mut self, p: f64) -> Self {
        self.dropout_p = p;
        self
    }

    pub fn embedding_dim(&self) -> usize {
        self.hidden_widths.last().copied().unwrap_or(0)
    }

    pub fn depth(&self) -> usize {
        self.hidden_widths.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_widths.is_empty() {
            return Err(Error::Config("hidden_widths must be non-empty".into()));
        }
        if self.input_dim == 0 || self.hidden_widths.contains(&0) {
            return Err(Error::Config("zero-width layer in encoder config".into()));
        }
        math::dropout::check_probability(self.dropout_p)
            .map_err(|_| Error::Config(format!("dropout_p {} outside [0, 1)", self.dropout_p)))
    }

    /// `(n_in, n_out)` for every encoder layer followed by the head.
    pub fn layer_shapes(&self, head: HeadKind) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_widths.len() + 1);
        let mut prev = self.input_dim;
        for &w in &self.hidden_widths {
            shapes.push((prev, w));
            prev = w;
        }
        shapes.push((prev, head.output_dim()));
        shapes
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HeadKind {
    Survival,
    Classification { classes: usize },
}

impl HeadKind {
    pub fn output_dim(self) -> usize {
        match self {
            HeadKind::Survival => 1,
            HeadKind::Classification { classes } => classes,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            HeadKind::Survival => 0,
            HeadKind::Classification { .. } => 1,
        }
    }
}

/// Total scalar parameters (weights plus biases) including the head.
pub fn param_count(cfg: &EncoderConfig, head: HeadKind) -> Result<usize> {
    cfg.validate()?;
    if head.output_dim() == 0 {
        return Err(Error::Config("head has zero outputs".into()));
    }
    Ok(cfg
        .layer_shapes(head)
        .iter()
        .map(|&(i, o)| i * o + o)
        .sum())
}

/// Parameters of the encoder alone.
pub fn encoder_param_count(cfg: &EncoderConfig) -> Result<usize> {
    Ok(param_count(cfg, HeadKind::Survival)? - (cfg.embedding_dim() + 1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: EncoderConfig,
    pub head: HeadKind,
    /// Encoder layers in input order, then the head layer.
    pub layers: Vec<Linear>,
    pub consts: ActivationConstants,
}

/// Model outputs for one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// `N×1` hazards or `N×C` log-probabilities.
    pub output: Matrix,
    pub embedding: Matrix,
}

impl Prediction {
    /// Hazard per sample; only meaningful for the survival head.
    pub fn hazards(&self) -> Vec<f64> {
        self.output.column(0)
    }

    /// Argmax class per row of the log-probabilities.
    pub fn predicted_classes(&self) -> Vec<usize> {
        (0..self.output.rows())
            .map(|r| {
                let row = self.output.row(r);
                let mut best = 0;
                for (c, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

pub fn init_params(cfg: &EncoderConfig, head: HeadKind, seed: u64) -> Result<ModelParams> {
    cfg.validate()?;
    if head.output_dim() == 0 {
        return Err(Error::Config("head has zero outputs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = cfg
        .layer_shapes(head)
        .into_iter()
        .map(|(i, o)| lecun_normal(i, o, &mut rng))
        .collect();
    Ok(ModelParams {
        config: cfg.clone(),
        head,
        layers,
        consts: ActivationConstants::default(),
    })
}

impl ModelParams {
    pub fn encoder_depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn head_layer(&self) -> &Linear {
        self.layers.last().expect("model has a head layer")
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Linear::param_count).sum()
    }

    pub fn check_consistent(&self) -> Result<()> {
        let shapes = self.config.layer_shapes(self.head);
        if shapes.len() != self.layers.len() {
            return Err(Error::Shape(format!(
                "config implies {} layers, params hold {}",
                shapes.len(),
                self.layers.len()
            )));
        }
        for (i, (l, (n_in, n_out))) in self.layers.iter().zip(shapes).enumerate() {
            if l.n_in() != n_in || l.n_out() != n_out || l.bias.len() != n_out {
                return Err(Error::Shape(format!(
                    "layer {i} is {}x{}, config expects {n_in}x{n_out}",
                    l.n_in(),
                    l.n_out()
                )));
            }
        }
        Ok(())
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.config.input_dim {
            return Err(Error::Shape(format!(
                "batch has {} columns, model expects {}",
                batch.cols(),
                self.config.input_dim
            )));
        }
        Ok(())
    }

    fn encode<R: Rng + ?Sized>(
        &self,
        batch: &Matrix,
        mode: Mode,
        rng: &mut R,
        tape: &mut GradTape,
    ) -> Result<Matrix> {
        self.check_input(batch)?;
        let act = self.config.activation;
        let mut h = batch.clone();
        for (i, layer) in self.layers[..self.encoder_depth()].iter().enumerate() {
            let z = linear_forward(&h, layer, i, tape)?;
            let a = act.forward(&z, self.consts);
            tape.record_activation(act, self.consts, &z);
            let (d, mask) = alpha_dropout(&a, self.config.dropout_p, mode, rng, self.consts)?;
            tape.record_dropout(mask);
            h = d;
        }
        Ok(h)
    }

    fn apply_head(&self, embedding: &Matrix, tape: &mut GradTape) -> Result<Matrix> {
        let idx = self.encoder_depth();
        let z = linear_forward(embedding, self.head_layer(), idx, tape)?;
        Ok(match self.head {
            HeadKind::Survival => z,
            HeadKind::Classification { .. } => {
                let lp = activation::log_softmax(&z);
                tape.record_log_softmax(&lp);
                lp
            }
        })
    }

    /// Forward pass recording a tape for [`ModelParams::backward`].
    pub fn forward<R: Rng + ?Sized>(
        &self,
        batch: &Matrix,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Prediction, GradTape)> {
        let mut tape = GradTape::new();
        let embedding = self.encode(batch, mode, rng, &mut tape)?;
        let output = self.apply_head(&embedding, &mut tape)?;
        Ok((Prediction { output, embedding }, tape))
    }

    /// Eval-mode forward without recording.
    pub fn predict(&self, batch: &Matrix) -> Result<Prediction> {
        let mut tape = GradTape::disabled();
        let mut rng = NoRng;
        let embedding = self.encode(batch, Mode::Eval, &mut rng, &mut tape)?;
        let output = self.apply_head(&embedding, &mut tape)?;
        Ok(Prediction { output, embedding })
    }

    /// 48-dim (embedding_dim) patient embeddings, eval mode.
    pub fn embed(&self, batch: &Matrix) -> Result<Matrix> {
        let mut tape = GradTape::disabled();
        self.encode(batch, Mode::Eval, &mut NoRng, &mut tape)
    }

    /// Head applied to precomputed embeddings.
    pub fn head_forward(&self, embedding: &Matrix) -> Result<Matrix> {
        if embedding.cols() != self.config.embedding_dim() {
            return Err(Error::Shape(format!(
                "embedding has {} columns, head expects {}",
                embedding.cols(),
                self.config.embedding_dim()
            )));
        }
        self.apply_head(embedding, &mut GradTape::disabled())
    }

    /// Gradients given ∂L/∂output (hazards or log-probabilities).
    pub fn backward(&self, tape: &GradTape, output_grad: &Matrix) -> Result<ParamGrads> {
        math::backward(tape, &self.layers, output_grad)
    }

    /// Appends `count` fresh square blocks of width `embedding_dim` before the
    /// head. The head layer keeps its parameters.
    pub fn append_blocks(&mut self, count: usize, seed: u64) {
        let width = self.config.embedding_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head = self.layers.pop().expect("model has a head layer");
        for _ in 0..count {
            self.layers.push(lecun_normal(width, width, &mut rng));
            self.config.hidden_widths.push(width);
        }
        self.layers.push(head);
    }
}

/// Eval mode never samples; this stands in where an RNG is required.
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("eval-mode forward does not draw random numbers")
    }

    fn next_u64(&mut self) -> u64 {
        unreachable!("eval-mode forward does not draw random numbers")
    }

    fn fill_bytes(&mut self, _dst: &mut [u8]) {
        unreachable!("eval-mode forward does not draw random numbers")
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn eval_output_ignores_rng_and_dropout(
            seed in any::<u64>(),
            p in 0.0f64..0.9,
            widths in proptest::collection::vec(1usize..12, 1..4),
        ) {
            let cfg = EncoderConfig::new(5, widths);
            let a = init_params(&cfg, HeadKind::Survival, seed).unwrap();
            let mut b = a.clone();
            b.config.dropout_p = p;
            let x = Matrix::random_normal(6, 5, 1.0, &mut ChaCha8Rng::seed_from_u64(seed ^ 1));
            let (pa, _) = a.forward(&x, Mode::Eval, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            let (pb, _) = b.forward(&x, Mode::Eval, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
            prop_assert_eq!(&pa, &pb);
            prop_assert_eq!(pa, b.predict(&x).unwrap());
        }

        #[test]
        fn train_forward_and_gradients_repeat_bitwise(seed in any::<u64>()) {
            let cfg = EncoderConfig::new(4, vec![7, 3]).with_dropout(0.3);
            let p = init_params(&cfg, HeadKind::Survival, seed).unwrap();
            let x = Matrix::random_normal(5, 4, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
            let run = || {
                let (pred, tape) = p.forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                let g = p.backward(&tape, &Matrix::filled(5, 1, 1.0)).unwrap();
                (pred, g.layers)
            };
            prop_assert_eq!(run(), run());
        }
    }
}
