use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::optim::{backward_and_step, OptimizerState};
use crate::nn::{Matrix, Model};

/// Runs `epochs` passes of mini-batch Adam over `(inputs, targets)`.
///
/// Each epoch visits the samples in a fresh permutation drawn from a
/// ChaCha8 stream seeded with `seed`, so identical arguments give identical
/// parameters. Returns the mean pre-update batch loss of each epoch.
pub fn train_epochs(
    model: &mut Model,
    opt: &mut OptimizerState,
    inputs: &Matrix,
    targets: &Matrix,
    epochs: usize,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = inputs.rows();
    if n == 0 {
        return Err(Error::input("cannot train on an empty dataset"));
    }
    if targets.rows() != n {
        return Err(Error::input(format!(
            "{n} inputs but {} target rows",
            targets.rows()
        )));
    }
    if targets.cols() != model.output_dim() {
        return Err(Error::config(format!(
            "targets have {} classes, model outputs {}",
            targets.cols(),
            model.output_dim()
        )));
    }
    if batch_size == 0 {
        return Err(Error::config("batch size must be positive"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut losses = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(batch_size) {
            let x = inputs.select_rows(chunk);
            let t = targets.select_rows(chunk);
            total += backward_and_step(model, &x, &t, opt)?;
            batches += 1;
        }
        losses.push(total / batches as f64);
    }
    Ok(losses)
}
