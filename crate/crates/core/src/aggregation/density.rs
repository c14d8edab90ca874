//! Per-client Gaussian mixture over logit space.
//!
//! One diagonal-covariance component per local class, fitted in closed form
//! from the client's labeled validation logits, with uniform mixture weights.
//! The confidence of a logit vector `f` is its log mixture density
//!
//! ```text
//! ℓ(f) = logsumexp_k [ -(C/2) log 2π - Σ_d log σ_kd - ½ Σ_d (f_d - μ_kd)² / σ²_kd ] - log K
//! ```
//!
//! evaluated entirely in log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{log_sum_exp, Matrix};

/// Lower bound applied to every per-dimension variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureDensity {
    /// Class id of each component, ascending.
    classes: Vec<usize>,
    /// `K × C` component means.
    means: Matrix,
    /// `K × C` per-dimension variances, each at least [`VARIANCE_FLOOR`].
    variances: Matrix,
    /// `-(C/2) log 2π - ½ Σ_d log σ²_kd` per component.
    #[serde(skip)]
    log_norm: Vec<f64>,
}

impl GaussianMixtureDensity {
    /// Builds a density from explicit parameters; variances are floored.
    pub fn from_parameters(classes: Vec<usize>, means: Matrix, mut variances: Matrix) -> Result<Self> {
        if means.shape() != variances.shape() || means.rows() != classes.len() || classes.is_empty() {
            return Err(Error::input(format!(
                "{} classes with means {:?} and variances {:?}",
                classes.len(),
                means.shape(),
                variances.shape()
            )));
        }
        if !means.is_finite() || !variances.is_finite() {
            return Err(Error::input("density parameters must be finite"));
        }
        variances.map_inplace(|v| v.max(VARIANCE_FLOOR));
        let mut d = Self {
            classes,
            means,
            variances,
            log_norm: Vec::new(),
        };
        d.refresh_norms();
        Ok(d)
    }

    fn refresh_norms(&mut self) {
        let dim = self.means.cols() as f64;
        self.log_norm = self
            .variances
            .iter_rows()
            .map(|var| -0.5 * dim * LN_2PI - 0.5 * var.iter().map(|v| v.ln()).sum::<f64>())
            .collect();
    }

    pub fn components(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn dim(&self) -> usize {
        self.means.cols()
    }

    pub fn means(&self) -> &Matrix {
        &self.means
    }

    pub fn variances(&self) -> &Matrix {
        &self.variances
    }

    /// Per-component log densities `log N(f; μ_k, diag σ²_k)`.
    pub fn component_log_densities(&self, f: &[f64]) -> Vec<f64> {
        (0..self.components())
            .map(|k| {
                let mu = self.means.row(k);
                let var = self.variances.row(k);
                let quad: f64 = f
                    .iter()
                    .zip(mu)
                    .zip(var)
                    .map(|((x, m), v)| (x - m) * (x - m) / v)
                    .sum();
                self.log_norm[k] - 0.5 * quad
            })
            .collect()
    }

    /// Log mixture density with uniform component weights.
    pub fn log_density(&self, f: &[f64]) -> f64 {
        log_sum_exp(&self.component_log_densities(f)) - (self.components() as f64).ln()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: GaussianMixtureDensity = serde_json::from_str(s)?;
        Self::from_parameters(raw.classes, raw.means, raw.variances)
    }
}

/// Confidence score `ℓ(f)` of a logit vector under a client's density.
pub fn confidence_score(density: &GaussianMixtureDensity, f: &[f64]) -> f64 {
    density.log_density(f)
}

/// Closed-form per-class moment fit.
///
/// Component `k` takes the mean of the validation logits labeled with the
/// k-th local class and their unbiased (n−1) per-dimension variance,
/// floored at [`VARIANCE_FLOOR`]. Every local class needs at least two
/// validation samples.
pub fn fit_logit_density(
    logits: &Matrix,
    labels: &[usize],
    local_classes: &[usize],
) -> Result<GaussianMixtureDensity> {
    if logits.rows() != labels.len() {
        return Err(Error::input(format!(
            "{} validation logits but {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    let mut classes = local_classes.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.is_empty() {
        return Err(Error::input("a client needs at least one local class"));
    }
    if let Some(&stray) = labels.iter().find(|y| classes.binary_search(y).is_err()) {
        return Err(Error::input(format!(
            "validation label {stray} is outside the local class set {classes:?}"
        )));
    }

    let dim = logits.cols();
    let k = classes.len();
    let mut means = Matrix::zeros(k, dim);
    let mut variances = Matrix::zeros(k, dim);
    for (slot, &class) in classes.iter().enumerate() {
        let rows: Vec<&[f64]> = labels
            .iter()
            .zip(logits.iter_rows())
            .filter(|(y, _)| **y == class)
            .map(|(_, r)| r)
            .collect();
        if rows.len() < 2 {
            return Err(Error::Fit {
                class,
                message: format!("{} validation samples, need at least 2", rows.len()),
            });
        }
        let n = rows.len() as f64;
        let mu = means.row_mut(slot);
        for r in &rows {
            for (m, x) in mu.iter_mut().zip(*r) {
                *m += x;
            }
        }
        mu.iter_mut().for_each(|m| *m /= n);
        let mu = means.row(slot).to_vec();
        let var = variances.row_mut(slot);
        for r in &rows {
            for ((v, x), m) in var.iter_mut().zip(*r).zip(&mu) {
                *v += (x - m) * (x - m);
            }
        }
        var.iter_mut().for_each(|v| *v /= n - 1.0);
    }
    GaussianMixtureDensity::from_parameters(classes, means, variances)
}
