//! A reverse-mode tape covering exactly the operations the two-layer GCN
//! needs. Values are recorded eagerly; [`Tape::backward`] walks the records
//! in reverse and accumulates adjoints.

use std::borrow::Cow;

use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::graph::SparseMatrix;
use crate::mask::NodeMask;

use super::loss::{log_softmax_row, masked_cross_entropy};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op<'a> {
    Input,
    Spmm(&'a SparseMatrix, Var),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Relu(Var),
    Scale(Var, &'a Matrix),
    CrossEntropy {
        logits: Var,
        labels: &'a [usize],
        mask: &'a NodeMask,
    },
}

struct Record<'a> {
    value: Cow<'a, Matrix>,
    op: Op<'a>,
}

#[derive(Default)]
pub struct Tape<'a> {
    records: Vec<Record<'a>>,
}

/// Adjoints of every recorded value.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix> {
        self.grads[v.0].take()
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: Matrix, op: Op<'a>, name: &'static str) -> Result<Var> {
        let value = value.finite_or(name)?;
        self.records.push(Record {
            value: Cow::Owned(value),
            op,
        });
        Ok(Var(self.records.len() - 1))
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.records[v.0].value
    }

    /// Records a leaf (parameter or constant input).
    pub fn input(&mut self, value: Matrix) -> Result<Var> {
        self.push(value, Op::Input, "input")
    }

    /// Records a borrowed leaf.
    pub fn input_ref(&mut self, value: &'a Matrix) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NumericFault("input"));
        }
        self.records.push(Record {
            value: Cow::Borrowed(value),
            op: Op::Input,
        });
        Ok(Var(self.records.len() - 1))
    }

    pub fn spmm(&mut self, op: &'a SparseMatrix, x: Var) -> Result<Var> {
        let value = op.spmm(self.value(x))?;
        self.push(value, Op::Spmm(op, x), "spmm")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push(value, Op::MatMul(a, b), "matmul")
    }

    /// Adds the `1 × cols` row `bias` to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let b = self.value(bias);
        let xv = self.value(x);
        if b.rows() != 1 || b.cols() != xv.cols() {
            return Err(Error::DimensionMismatch {
                context: "bias width",
                expected: xv.cols(),
                actual: b.cols(),
            });
        }
        let mut value = xv.clone();
        for r in 0..value.rows() {
            for (o, &bj) in value.row_mut(r).iter_mut().zip(b.as_slice()) {
                *o += bj;
            }
        }
        self.push(value, Op::AddBias(x, bias), "bias")
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(|v| v.max(0.0));
        self.push(value, Op::Relu(x), "relu")
    }

    /// Elementwise product with a constant matrix.
    pub fn scale(&mut self, x: Var, by: &'a Matrix) -> Result<Var> {
        let value = self.value(x).hadamard(by)?;
        self.push(value, Op::Scale(x, by), "scale")
    }

    /// Mean negative log-likelihood over `mask`; a `1 × 1` value.
    pub fn cross_entropy(
        &mut self,
        logits: Var,
        labels: &'a [usize],
        mask: &'a NodeMask,
    ) -> Result<Var> {
        let loss = masked_cross_entropy(self.value(logits), labels, mask)?;
        self.push(
            Matrix::filled(1, 1, loss),
            Op::CrossEntropy {
                logits,
                labels,
                mask,
            },
            "cross entropy",
        )
    }

    /// Adjoints of `output` with respect to every recorded value. `output`
    /// must be `1 × 1`.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let mut grads: Vec<Option<Matrix>> = (0..self.records.len()).map(|_| None).collect();
        let out_shape = self.value(output).shape();
        if out_shape != (1, 1) {
            return Err(Error::DimensionMismatch {
                context: "backward needs a scalar output",
                expected: 1,
                actual: out_shape.0 * out_shape.1,
            });
        }
        grads[output.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=output.0).rev() {
            let Some(upstream) = grads[idx].take() else {
                continue;
            };
            let record = &self.records[idx];
            match record.op {
                Op::Input => {}
                Op::Spmm(op, x) => {
                    accumulate(&mut grads, x, op.spmm_transpose(&upstream)?);
                }
                Op::MatMul(a, b) => {
                    let ga = upstream.matmul_t(self.value(b))?;
                    let gb = self.value(a).t_matmul(&upstream)?;
                    accumulate(&mut grads, a, ga);
                    accumulate(&mut grads, b, gb);
                }
                Op::AddBias(x, bias) => {
                    let mut gb = Matrix::zeros(1, upstream.cols());
                    for r in 0..upstream.rows() {
                        for (o, &g) in gb.as_mut_slice().iter_mut().zip(upstream.row(r)) {
                            *o += g;
                        }
                    }
                    accumulate(&mut grads, bias, gb);
                    accumulate(&mut grads, x, upstream.clone());
                }
                Op::Relu(x) => {
                    let xv = self.value(x);
                    let mut gx = upstream.clone();
                    for (g, &v) in gx.as_mut_slice().iter_mut().zip(xv.as_slice()) {
                        if v <= 0.0 {
                            *g = 0.0;
                        }
                    }
                    accumulate(&mut grads, x, gx);
                }
                Op::Scale(x, by) => {
                    accumulate(&mut grads, x, upstream.hadamard(by)?);
                }
                Op::CrossEntropy {
                    logits,
                    labels,
                    mask,
                } => {
                    let seed = upstream[(0, 0)];
                    let lv = self.value(logits);
                    let mut gl = Matrix::zeros(lv.rows(), lv.cols());
                    let scale = seed / mask.count() as f64;
                    for v in mask.iter_active() {
                        let logp = log_softmax_row(lv.row(v));
                        let row = gl.row_mut(v);
                        for (j, (g, lp)) in row.iter_mut().zip(logp).enumerate() {
                            let target = if j == labels[v] { 1.0 } else { 0.0 };
                            *g = (lp.exp() - target) * scale;
                        }
                    }
                    accumulate(&mut grads, logits, gl);
                }
            }
            grads[idx] = Some(upstream);
        }

        for g in grads.iter().flatten() {
            if !g.is_finite() {
                return Err(Error::NumericFault("backward"));
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, x) in existing.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(g),
    }
}
