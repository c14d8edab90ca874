//! Adam optimizer with bias-corrected moment estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::model::Gradients;
use crate::nn::{Matrix, Model};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate >= 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// Moment pair for one layer: weights shaped like the layer, biases as `1 × out`.
#[derive(Debug, Clone, PartialEq)]
struct Moments {
    weights: Matrix,
    biases: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Moments>,
    second: Vec<Moments>,
}

impl OptimizerState {
    pub fn new(model: &Model, config: AdamConfig) -> Self {
        let zeros: Vec<Moments> = model
            .layers()
            .iter()
            .map(|l| Moments {
                weights: Matrix::zeros(l.weights.rows(), l.weights.cols()),
                biases: Matrix::zeros(1, l.biases.len()),
            })
            .collect();
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Accumulator shapes, per layer: (weights, biases).
    pub fn moment_shapes(&self) -> Vec<((usize, usize), (usize, usize))> {
        self.first
            .iter()
            .map(|m| (m.weights.shape(), m.biases.shape()))
            .collect()
    }

    /// Applies one Adam update to `model`.
    pub fn apply(&mut self, model: &mut Model, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != model.layers().len() || self.first.len() != model.layers().len() {
            return Err(Error::input("gradient/optimizer layout does not match the model"));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for (((layer, g), m), v) in model
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            if layer.weights.shape() != g.weights.shape() || m.weights.shape() != g.weights.shape() {
                return Err(Error::input("gradient shape does not match the model"));
            }
            update(
                layer.weights.as_mut_slice(),
                g.weights.as_slice(),
                m.weights.as_mut_slice(),
                v.weights.as_mut_slice(),
                (lr, b1, b2, eps, c1, c2),
            );
            update(
                &mut layer.biases,
                &g.biases,
                m.biases.as_mut_slice(),
                v.biases.as_mut_slice(),
                (lr, b1, b2, eps, c1, c2),
            );
        }
        Ok(())
    }
}

#[inline]
fn update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    (lr, b1, b2, eps, c1, c2): (f64, f64, f64, f64, f64, f64),
) {
    for (((p, &g), mi), vi) in params.iter_mut().zip(grads).zip(m).zip(v) {
        *mi = b1 * *mi + (1.0 - b1) * g;
        *vi = b2 * *vi + (1.0 - b2) * g * g;
        let m_hat = *mi / c1;
        let v_hat = *vi / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Computes the loss on `(inputs, targets)`, then takes one Adam step.
/// The returned loss is measured before the update.
pub fn backward_and_step(
    model: &mut Model,
    inputs: &Matrix,
    targets: &Matrix,
    opt: &mut OptimizerState,
) -> Result<f64> {
    let (loss, grads) = model.loss_and_gradients(inputs, targets)?;
    opt.apply(model, &grads)?;
    Ok(loss)
}
