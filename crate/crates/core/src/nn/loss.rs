//! Softmax and the cross-entropy loss used both for hard labels and for
//! distillation against soft targets.

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Tolerance on target row sums accepted by [`cross_entropy_loss`].
pub const TARGET_SUM_TOLERANCE: f64 = 1e-6;

/// `log Σ exp(v)` with max-subtraction. Returns `-inf` for an empty slice.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Softmax of one row, written into `out`.
pub fn softmax_into(v: &[f64], out: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, x) in out.iter_mut().zip(v) {
        *o = (x - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn softmax_vec(v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    softmax_into(v, &mut out);
    out
}

/// Row-wise softmax.
pub fn softmax(logits: &Matrix) -> Matrix {
    softmax_with_temperature(logits, 1.0)
}

/// Row-wise `softmax(z / T)`.
pub fn softmax_with_temperature(logits: &Matrix, temperature: f64) -> Matrix {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    let mut scaled = vec![0.0; logits.cols()];
    for r in 0..logits.rows() {
        for (s, z) in scaled.iter_mut().zip(logits.row(r)) {
            *s = z / temperature;
        }
        softmax_into(&scaled, out.row_mut(r));
    }
    out
}

/// Mean cross-entropy `-(1/n) Σ t·log softmax(z)` and its gradient
/// `(softmax(z) - t) / n` with respect to the logits.
///
/// Targets may be one-hot or any soft distribution; each row must be
/// nonnegative and sum to one.
pub fn cross_entropy_loss(logits: &Matrix, targets: &Matrix) -> Result<(f64, Matrix)> {
    if logits.shape() != targets.shape() {
        return Err(Error::input(format!(
            "logits {:?} and targets {:?} differ in shape",
            logits.shape(),
            targets.shape()
        )));
    }
    let n = logits.rows();
    if n == 0 {
        return Err(Error::input("cross-entropy on an empty batch"));
    }
    let inv_n = 1.0 / n as f64;
    let mut grad = Matrix::zeros(n, logits.cols());
    let mut loss = 0.0;
    for r in 0..n {
        let z = logits.row(r);
        let t = targets.row(r);
        let sum: f64 = t.iter().sum();
        if (sum - 1.0).abs() > TARGET_SUM_TOLERANCE || t.iter().any(|&v| v < 0.0) {
            return Err(Error::input(format!(
                "target row {r} is not a distribution (sum {sum})"
            )));
        }
        let lse = log_sum_exp(z);
        let g = grad.row_mut(r);
        for ((gi, &zi), &ti) in g.iter_mut().zip(z).zip(t) {
            let log_p = zi - lse;
            if ti > 0.0 {
                loss -= ti * log_p;
            }
            *gi = (log_p.exp() - ti) * inv_n;
        }
    }
    Ok((loss * inv_n, grad))
}

/// One-hot encoding of class ids.
pub fn one_hot(labels: &[usize], classes: usize) -> Matrix {
    let mut m = Matrix::zeros(labels.len(), classes);
    for (r, &y) in labels.iter().enumerate() {
        m.set(r, y, 1.0);
    }
    m
}
