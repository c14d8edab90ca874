//! Fully connected classifier with hand-derived backpropagation.
//!
//! Weights are stored row-major with shape `(out_dim, in_dim)`. Hidden layers
//! apply the model's activation; the output layer is linear and produces raw
//! logits.

use std::io::{Read, Write};

use rand::distr::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::loss::cross_entropy_loss;
use crate::nn::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation value.
    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
        }
    }

    fn tag(self) -> u32 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
        }
    }

    fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// Shape (out_dim, in_dim).
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl Dense {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weights: Matrix::zeros(out_dim, in_dim),
            biases: vec![0.0; out_dim],
        }
    }

    fn forward(&self, inputs: &Matrix) -> Matrix {
        let mut out = inputs.matmul_transposed(&self.weights);
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(&self.biases) {
                *o += b;
            }
        }
        out
    }
}

/// Parameter gradients, laid out exactly like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    /// Flattened in the same order as [`Model::flat_parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.biases);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    sizes: Vec<usize>,
    layers: Vec<Dense>,
    activation: Activation,
}

impl Model {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        let mut model = Self::zeros(sizes, activation)?;
        for layer in &mut model.layers {
            let (fan_out, fan_in) = layer.weights.shape();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit)
                .map_err(|e| Error::config(format!("weight init range: {e}")))?;
            for w in layer.weights.as_mut_slice() {
                *w = dist.sample(rng);
            }
        }
        Ok(model)
    }

    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::config("a model needs at least input and output sizes"));
        }
        if sizes.contains(&0) {
            return Err(Error::config(format!("layer sizes must be positive: {sizes:?}")));
        }
        let layers = sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Self {
            sizes: sizes.to_vec(),
            layers,
            activation,
        })
    }

    /// Builds a model from explicit layers; adjacent dimensions must chain.
    pub fn from_layers(layers: Vec<Dense>, activation: Activation) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::config("a model needs at least one layer"))?;
        let mut sizes = vec![first.weights.cols()];
        for (i, l) in layers.iter().enumerate() {
            if l.weights.cols() != *sizes.last().unwrap() || l.biases.len() != l.weights.rows() {
                return Err(Error::config(format!("layer {i} does not chain with its predecessor")));
            }
            sizes.push(l.weights.rows());
        }
        Ok(Self {
            sizes,
            layers,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn check_inputs(&self, inputs: &Matrix) -> Result<()> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::config(format!(
                "input has {} features but the model expects {}",
                inputs.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Raw logits for each input row.
    pub fn forward(&self, inputs: &Matrix) -> Result<Matrix> {
        self.check_inputs(inputs)?;
        let last = self.layers.len() - 1;
        let mut h = self.layers[0].forward(inputs);
        if last > 0 {
            h.map_inplace(|x| self.activation.apply(x));
        }
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            h = layer.forward(&h);
            if i < last {
                h.map_inplace(|x| self.activation.apply(x));
            }
        }
        Ok(h)
    }

    /// Cross-entropy loss and parameter gradients on one batch.
    pub fn loss_and_gradients(&self, inputs: &Matrix, targets: &Matrix) -> Result<(f64, Gradients)> {
        self.check_inputs(inputs)?;
        let last = self.layers.len() - 1;
        // layer inputs (post-activation) and hidden pre-activations
        let mut acts: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        let mut pres: Vec<Matrix> = Vec::with_capacity(last);
        let mut h = inputs.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&h);
            acts.push(h);
            if i < last {
                let mut a = z.clone();
                a.map_inplace(|x| self.activation.apply(x));
                pres.push(z);
                h = a;
            } else {
                h = z;
            }
        }
        let (loss, mut delta) = cross_entropy_loss(&h, targets)?;

        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let weights = delta.transpose_matmul(&acts[i]);
            let biases = delta.column_sums();
            if i > 0 {
                let mut back = delta.matmul(&self.layers[i].weights);
                let pre = &pres[i - 1];
                for (b, p) in back.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                    *b *= self.activation.derivative(*p);
                }
                delta = back;
            }
            grads.push(Dense { weights, biases });
        }
        grads.reverse();
        Ok((loss, Gradients { layers: grads }))
    }

    /// All parameters in layer order: weights (row-major) then biases.
    pub fn flat_parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_flat_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::input(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                params.len()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let w = l.weights.as_mut_slice();
            w.copy_from_slice(&params[offset..offset + w.len()]);
            offset += w.len();
            let b = &mut l.biases;
            let n = b.len();
            b.copy_from_slice(&params[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Writes the checkpoint format documented in the README:
    /// `"FLMD"`, u32 version, u32 activation tag, u32 size count, u64 sizes,
    /// then each layer's weights and biases as little-endian f64.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&self.activation.tag().to_le_bytes())?;
        w.write_all(&(self.sizes.len() as u32).to_le_bytes())?;
        for &s in &self.sizes {
            w.write_all(&(s as u64).to_le_bytes())?;
        }
        for v in self.flat_parameters() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: R, source: &str) -> Result<Self> {
        let mut reader = crate::io::ByteReader::new(r, source);
        let magic = reader.bytes::<4>()?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(reader.format_error(0, "bad checkpoint magic"));
        }
        let version = reader.u32_le()?;
        if version != CHECKPOINT_VERSION {
            return Err(reader.format_error(4, format!("unsupported version {version}")));
        }
        let tag = reader.u32_le()?;
        let activation =
            Activation::from_tag(tag).ok_or_else(|| reader.format_error(8, format!("unknown activation tag {tag}")))?;
        let count = reader.u32_le()? as usize;
        if !(2..=64).contains(&count) {
            return Err(reader.format_error(12, format!("implausible layer count {count}")));
        }
        let mut sizes = Vec::with_capacity(count);
        for _ in 0..count {
            sizes.push(reader.u64_le()? as usize);
        }
        let mut model = Model::zeros(&sizes, activation)?;
        let mut params = Vec::with_capacity(model.parameter_count());
        for _ in 0..model.parameter_count() {
            let v = reader.f64_le()?;
            if !v.is_finite() {
                return Err(reader.format_error(reader.offset() - 8, "non-finite parameter"));
            }
            params.push(v);
        }
        model.set_flat_parameters(&params)?;
        Ok(model)
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"FLMD";
const CHECKPOINT_VERSION: u32 = 1;
