use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::FederationData;
use crate::error::{Error, Result};
use crate::federation::FederationConfig;
use crate::io::derive_seed;
use crate::nn::{train_epochs, Model, OptimizerState};
use crate::report::evaluate;

const STREAM_REFERENCE: u64 = 0x5EF;

/// Fully informed reference: one client-architecture model trained on
/// `|private| + |public|` labeled samples drawn class-balanced over all
/// classes, for as many epochs as a client sees in the whole federation.
/// Returns its test accuracy.
pub fn train_reference(data: &FederationData, cfg: &FederationConfig) -> Result<f64> {
    cfg.validate()?;
    let pool = data.reference_pool();
    let labels = pool.require_labels()?;
    let classes = data.classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::config(format!("reference pool has no samples of class {c}")));
    }
    let budget = data.spec.private_size + data.public().len();
    if budget == 0 {
        return Err(Error::config("reference budget is zero"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_REFERENCE]));
    let picks: Vec<usize> = (0..budget)
        .map(|i| {
            let class_pool = &by_class[i % classes];
            class_pool[rng.random_range(0..class_pool.len())]
        })
        .collect();
    let train = pool.subset(&picks);

    let sizes = cfg.layer_sizes(data.dim(), classes);
    let mut model = Model::new(&sizes, cfg.activation, &mut rng)?;
    let mut opt = OptimizerState::new(&model, cfg.adam);
    train_epochs(
        &mut model,
        &mut opt,
        train.features(),
        &train.one_hot_targets()?,
        cfg.total_client_epochs(),
        cfg.batch_size,
        derive_seed(cfg.seed, &[STREAM_REFERENCE, 1]),
    )?;
    evaluate(&model, data.test())
}
