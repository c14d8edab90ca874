use crate::aggregation::{common_shape, AggregatedTargets, LogitMatrix, Strategy};
use crate::error::Result;
use crate::nn::Matrix;

/// `z̄(x) = (1/M) Σᵢ fᵢ(x)` per public sample, with soft labels `softmax(z̄)`.
pub fn average_logits(logits: &[LogitMatrix]) -> Result<AggregatedTargets> {
    let (n, c) = common_shape(logits)?;
    let mut sum = Matrix::zeros(n, c);
    for l in logits {
        for (s, v) in sum.as_mut_slice().iter_mut().zip(l.values.as_slice()) {
            *s += v;
        }
    }
    let m = logits.len() as f64;
    sum.map_inplace(|v| v / m);
    Ok(AggregatedTargets::new(Strategy::Average, sum, None))
}
