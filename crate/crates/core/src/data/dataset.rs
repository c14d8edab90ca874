use crate::error::{Error, Result};
use crate::nn::{one_hot, Matrix};

/// Feature rows with optional class labels in `0..classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Option<Vec<usize>>,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Option<Vec<usize>>, classes: usize) -> Result<Self> {
        if let Some(labels) = &labels {
            if labels.len() != features.rows() {
                return Err(Error::input(format!(
                    "{} labels for {} feature rows",
                    labels.len(),
                    features.rows()
                )));
            }
            if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
                return Err(Error::input(format!("label {bad} outside 0..{classes}")));
            }
        }
        if !features.is_finite() {
            return Err(Error::input("dataset features contain non-finite values"));
        }
        Ok(Self {
            features,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::input("operation requires a labeled dataset"))
    }

    /// Rows at `indices`, in order; duplicates allowed.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            classes: self.classes,
        }
    }

    /// Same features with labels stripped.
    pub fn unlabeled(&self) -> Dataset {
        Dataset {
            features: self.features.clone(),
            labels: None,
            classes: self.classes,
        }
    }

    pub fn one_hot_targets(&self) -> Result<Matrix> {
        Ok(one_hot(self.require_labels()?, self.classes))
    }

    /// Sorted distinct labels present.
    pub fn label_set(&self) -> Result<Vec<usize>> {
        let mut seen = vec![false; self.classes];
        for &y in self.require_labels()? {
            seen[y] = true;
        }
        Ok((0..self.classes).filter(|&c| seen[c]).collect())
    }
}

/// Empirical class frequencies `p(y)` of a labeled dataset.
pub fn label_prior(dataset: &Dataset) -> Result<Vec<f64>> {
    let labels = dataset.require_labels()?;
    if labels.is_empty() {
        return Err(Error::input("label prior of an empty dataset"));
    }
    let mut counts = vec![0.0; dataset.classes()];
    for &y in labels {
        counts[y] += 1.0;
    }
    let n = labels.len() as f64;
    Ok(counts.into_iter().map(|c| c / n).collect())
}
