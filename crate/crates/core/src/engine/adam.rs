//! Adam with bias correction and coupled L2 weight decay (the decay term is
//! added to the gradient before the moment updates).

use crate::dense::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for a fixed list of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    cfg: AdamConfig,
    /// Per-parameter weight decay.
    weight_decay: Vec<f64>,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    step: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &[&Matrix], weight_decay: Vec<f64>) -> Result<Adam> {
        if weight_decay.len() != params.len() {
            return Err(Error::DimensionMismatch {
                context: "weight decay entries vs parameters",
                expected: params.len(),
                actual: weight_decay.len(),
            });
        }
        if !(cfg.lr > 0.0) || !(0.0..1.0).contains(&cfg.beta1) || !(0.0..1.0).contains(&cfg.beta2) {
            return Err(Error::InvalidConfig(format!("bad Adam settings {cfg:?}")));
        }
        let zeros = |p: &&Matrix| Matrix::zeros(p.rows(), p.cols());
        Ok(Adam {
            cfg,
            weight_decay,
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
            step: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[Matrix]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                context: "optimizer parameter count",
                expected: self.m.len(),
                actual: params.len().min(grads.len()),
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            p.check_same_shape(g, "gradient shape")?;
            p.check_same_shape(m, "moment shape")?;
        }

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.cfg;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            let decay = self.weight_decay[i];
            let m = self.m[i].as_mut_slice();
            let v = self.v[i].as_mut_slice();
            for (((w, &g), m), v) in p
                .as_mut_slice()
                .iter_mut()
                .zip(grads[i].as_slice())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                let g = g + decay * *w;
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            if !p.is_finite() {
                return Err(Error::NumericFault("adam step"));
            }
        }
        Ok(())
    }
}
