use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::mask::NodeMask;

/// `log softmax` of one row, shifted by the row maximum.
pub fn log_softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|&v| v - max - log_sum).collect()
}

pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let logp = log_softmax_row(logits.row(r));
        for (o, lp) in out.row_mut(r).iter_mut().zip(logp) {
            *o = lp.exp();
        }
    }
    out
}

/// Mean of `-log softmax(logits)[label]` over the nodes in `mask`.
pub fn masked_cross_entropy(logits: &Matrix, labels: &[usize], mask: &NodeMask) -> Result<f64> {
    mask.check_len(logits.rows(), "loss mask length")?;
    if labels.len() != logits.rows() {
        return Err(Error::DimensionMismatch {
            context: "label count vs logits",
            expected: logits.rows(),
            actual: labels.len(),
        });
    }
    if mask.count() == 0 {
        return Err(Error::EmptyMask);
    }
    let mut total = 0.0;
    for v in mask.iter_active() {
        total -= log_softmax_row(logits.row(v))[labels[v]];
    }
    let loss = total / mask.count() as f64;
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NumericFault("cross entropy"))
    }
}
