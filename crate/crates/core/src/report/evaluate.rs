use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::Model;

/// Fraction of test samples whose arg-max logit equals the label. Ties go
/// to the lowest class index.
pub fn evaluate(model: &Model, test: &Dataset) -> Result<f64> {
    let labels = test.require_labels()?;
    if labels.is_empty() {
        return Err(Error::input("cannot evaluate on an empty test set"));
    }
    let logits = model.forward(test.features())?;
    Ok(accuracy(&logits.argmax_rows(), labels))
}

pub fn accuracy(predicted: &[usize], labels: &[usize]) -> f64 {
    let hits = predicted.iter().zip(labels).filter(|(p, y)| p == y).count();
    hits as f64 / labels.len() as f64
}
