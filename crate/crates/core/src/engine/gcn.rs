//! Two-layer graph convolutional network:
//! `logits = Â · (relu(Â · X · W1 + b1) ∘ M_h) · W2 + b2`
//! where `M_h` is an optional hidden-activation mask.

use rand::{Rng, RngCore};

use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::graph::SparseMatrix;
use crate::mask::NodeMask;

use super::tape::{Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GcnConfig {
    pub hidden: usize,
    pub bias: bool,
}

impl Default for GcnConfig {
    fn default() -> Self {
        GcnConfig {
            hidden: 16,
            bias: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
    pub bias: bool,
}

fn glorot_uniform<R: RngCore + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..limit))
        .collect();
    Matrix::from_vec(fan_in, fan_out, data).expect("length matches by construction")
}

impl Model {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: RngCore + ?Sized>(
        feature_dim: usize,
        num_classes: usize,
        cfg: GcnConfig,
        rng: &mut R,
    ) -> Result<Model> {
        if cfg.hidden == 0 || feature_dim == 0 || num_classes == 0 {
            return Err(Error::InvalidConfig(format!(
                "model needs positive sizes, got features={feature_dim} hidden={} classes={num_classes}",
                cfg.hidden
            )));
        }
        Ok(Model {
            w1: glorot_uniform(feature_dim, cfg.hidden, rng),
            b1: Matrix::zeros(1, cfg.hidden),
            w2: glorot_uniform(cfg.hidden, num_classes, rng),
            b2: Matrix::zeros(1, num_classes),
            bias: cfg.bias,
        })
    }

    pub fn hidden(&self) -> usize {
        self.w1.cols()
    }

    /// Trainable parameters in a fixed order: `w1, b1, w2, b2` (biases only
    /// when enabled).
    pub fn params(&self) -> Vec<&Matrix> {
        if self.bias {
            vec![&self.w1, &self.b1, &self.w2, &self.b2]
        } else {
            vec![&self.w1, &self.w2]
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        if self.bias {
            vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
        } else {
            vec![&mut self.w1, &mut self.w2]
        }
    }

    /// Records the forward pass on `tape`. Returns the parameter handles (in
    /// [`Model::params`] order) and the logits.
    pub fn forward<'a>(
        &'a self,
        tape: &mut Tape<'a>,
        op: &'a SparseMatrix,
        x: &'a Matrix,
        hidden_keep: Option<&'a Matrix>,
    ) -> Result<(Vec<Var>, Var)> {
        if x.cols() != self.w1.rows() {
            return Err(Error::DimensionMismatch {
                context: "feature width vs first layer",
                expected: self.w1.rows(),
                actual: x.cols(),
            });
        }
        let xv = tape.input_ref(x)?;
        let w1 = tape.input_ref(&self.w1)?;
        let w2 = tape.input_ref(&self.w2)?;
        let (b1, b2) = if self.bias {
            (
                Some(tape.input_ref(&self.b1)?),
                Some(tape.input_ref(&self.b2)?),
            )
        } else {
            (None, None)
        };

        let xw = tape.matmul(xv, w1)?;
        let mut h = tape.spmm(op, xw)?;
        if let Some(b1) = b1 {
            h = tape.add_bias(h, b1)?;
        }
        h = tape.relu(h)?;
        if let Some(keep) = hidden_keep {
            h = tape.scale(h, keep)?;
        }
        let hw = tape.matmul(h, w2)?;
        let mut logits = tape.spmm(op, hw)?;
        if let Some(b2) = b2 {
            logits = tape.add_bias(logits, b2)?;
        }

        let params = match (b1, b2) {
            (Some(b1), Some(b2)) => vec![w1, b1, w2, b2],
            _ => vec![w1, w2],
        };
        Ok((params, logits))
    }

    /// Logits without recording gradients.
    pub fn predict(&self, op: &SparseMatrix, x: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let (_, logits) = self.forward(&mut tape, op, x, None)?;
        Ok(tape.value(logits).clone())
    }

    /// Loss over `loss_mask` and its gradient for every parameter, in
    /// [`Model::params`] order.
    pub fn loss_and_grads(
        &self,
        op: &SparseMatrix,
        x: &Matrix,
        hidden_keep: Option<&Matrix>,
        labels: &[usize],
        loss_mask: &NodeMask,
    ) -> Result<(f64, Vec<Matrix>)> {
        let mut tape = Tape::new();
        let (params, logits) = self.forward(&mut tape, op, x, hidden_keep)?;
        let loss = tape.cross_entropy(logits, labels, loss_mask)?;
        let mut grads = tape.backward(loss)?;
        let value = tape.value(loss)[(0, 0)];
        let param_grads = params
            .into_iter()
            .zip(self.params())
            .map(|(v, p)| {
                grads
                    .take(v)
                    .unwrap_or_else(|| Matrix::zeros(p.rows(), p.cols()))
            })
            .collect();
        Ok((value, param_grads))
    }
}
