//! Gaussian-blob classification data: a desk-scale stand-in for image
//! benchmarks with the same label-shift structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::io::derive_seed;
use crate::nn::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub classes: usize,
    pub dim: usize,
    /// Minimum pairwise distance between class means, in noise standard deviations.
    pub separation: f64,
    pub seed: u64,
}

/// Fixed class means; draw as many independent samples from them as needed.
#[derive(Debug, Clone, PartialEq)]
pub struct Blobs {
    means: Matrix,
}

impl Blobs {
    pub fn new(spec: &BlobSpec) -> Result<Self> {
        if spec.classes < 2 || spec.dim < 1 {
            return Err(Error::config(format!(
                "synthetic data needs classes >= 2 and dim >= 1 (got {} and {})",
                spec.classes, spec.dim
            )));
        }
        if !(spec.separation >= 0.0 && spec.separation.is_finite()) {
            return Err(Error::config("separation must be a finite nonnegative number"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[0xB10B]));
        let (c, d, s) = (spec.classes, spec.dim, spec.separation);
        let mut means = Matrix::zeros(c, d);
        if d >= c {
            // scaled simplex corners: every pair sits exactly `s` apart
            let r = s / std::f64::consts::SQRT_2;
            for k in 0..c {
                means.set(k, k, r);
            }
        } else {
            // rejection sampling in a box that grows until the means fit
            let mut half = s * (c as f64).powf(1.0 / d as f64);
            let mut placed = 0;
            let mut failures = 0;
            while placed < c {
                let cand: Vec<f64> = (0..d).map(|_| rng.random_range(-half..=half)).collect();
                let ok = (0..placed).all(|j| {
                    means
                        .row(j)
                        .iter()
                        .zip(&cand)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        >= s * s
                });
                if ok {
                    means.row_mut(placed).copy_from_slice(&cand);
                    placed += 1;
                } else {
                    failures += 1;
                    if failures % 200 == 0 {
                        half *= 1.1;
                    }
                }
            }
        }
        Ok(Self { means })
    }

    pub fn classes(&self) -> usize {
        self.means.rows()
    }

    pub fn means(&self) -> &Matrix {
        &self.means
    }

    /// `per_class` unit-variance isotropic samples around each mean, grouped by class.
    pub fn sample(&self, per_class: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, d) = self.means.shape();
        let mut data = Vec::with_capacity(c * per_class * d);
        let mut labels = Vec::with_capacity(c * per_class);
        for k in 0..c {
            let mu = self.means.row(k);
            for _ in 0..per_class {
                data.extend(mu.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)));
                labels.push(k);
            }
        }
        let features = Matrix::from_vec(c * per_class, d, data).expect("finite gaussian draws");
        Dataset::new(features, Some(labels), c).expect("labels in range")
    }
}

/// `classes` Gaussian blobs with `per_class` samples each. `per_class = 0`
/// yields a valid empty dataset; callers detect it with [`Dataset::is_empty`].
pub fn generate_synthetic(spec: &BlobSpec, per_class: usize) -> Result<Dataset> {
    let blobs = Blobs::new(spec)?;
    Ok(blobs.sample(per_class, derive_seed(spec.seed, &[0x5A3])))
}
