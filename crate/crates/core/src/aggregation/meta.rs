//! Learned aggregator over concatenated client logits.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aggregation::{common_shape, AggregatedTargets, LogitMatrix, Strategy};
use crate::error::{Error, Result};
use crate::io::derive_seed;
use crate::nn::{one_hot, train_epochs, Activation, AdamConfig, Matrix, Model, OptimizerState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetaTrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MetaTrainConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            epochs: 50,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// `A: ℝ^{M·C} → ℝ^C` plus the client order used to build its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaAggregator {
    pub model: Model,
    /// Ascending client ids; block `j` of `h(x)` holds client `client_order[j]`.
    pub client_order: Vec<usize>,
    pub classes: usize,
    #[serde(skip)]
    optimizer: Option<OptimizerState>,
    #[serde(skip)]
    rounds_trained: u64,
}

impl MetaAggregator {
    /// Wraps an existing model; its input width must be `clients × classes`.
    pub fn from_model(model: Model, client_order: Vec<usize>, classes: usize) -> Result<Self> {
        if model.input_dim() != client_order.len() * classes || model.output_dim() != classes {
            return Err(Error::config(format!(
                "aggregator shape {:?} does not fit {} clients × {classes} classes",
                model.layer_sizes(),
                client_order.len()
            )));
        }
        Ok(Self {
            model,
            client_order,
            classes,
            optimizer: None,
            rounds_trained: 0,
        })
    }

    pub fn clients(&self) -> usize {
        self.client_order.len()
    }

    /// Continues training on fresh meta-set logits, keeping the current
    /// parameters and optimizer moments.
    pub fn refresh(&mut self, logits: &[LogitMatrix], labels: &[usize], cfg: &MetaTrainConfig) -> Result<()> {
        check_clients(self, logits)?;
        let features = build_meta_features(logits, &self.client_order)?;
        if features.rows() == 0 {
            return Err(Error::config("the meta set is empty"));
        }
        if labels.len() != features.rows() {
            return Err(Error::input(format!(
                "{} meta labels for {} samples",
                labels.len(),
                features.rows()
            )));
        }
        if labels.iter().any(|&y| y >= self.classes) {
            return Err(Error::input("meta label out of range"));
        }
        let targets = one_hot(labels, self.classes);
        let config = AdamConfig::default().with_learning_rate(cfg.learning_rate);
        let model = &mut self.model;
        let opt = self
            .optimizer
            .get_or_insert_with(|| OptimizerState::new(model, config));
        train_epochs(
            model,
            opt,
            &features,
            &targets,
            cfg.epochs,
            cfg.batch_size,
            derive_seed(cfg.seed, &[0x3E7A, self.rounds_trained]),
        )?;
        self.rounds_trained += 1;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: MetaAggregator = serde_json::from_str(s)?;
        Self::from_model(raw.model, raw.client_order, raw.classes)
    }
}

fn check_clients(agg: &MetaAggregator, logits: &[LogitMatrix]) -> Result<()> {
    let given: BTreeSet<usize> = logits.iter().map(|l| l.client_id).collect();
    let trained: BTreeSet<usize> = agg.client_order.iter().copied().collect();
    if given != trained || logits.len() != agg.clients() {
        return Err(Error::config(format!(
            "meta aggregator was trained for clients {:?} but received {:?}; \
             its input width is fixed, so the whole aggregator must be retrained when clients change",
            agg.client_order,
            logits.iter().map(|l| l.client_id).collect::<Vec<_>>()
        )));
    }
    Ok(())
}

/// `h(x) = [f_{o₁}(x), …, f_{o_M}(x)]` following `order`.
pub fn build_meta_features(logits: &[LogitMatrix], order: &[usize]) -> Result<Matrix> {
    let (n, c) = common_shape(logits)?;
    if order.len() != logits.len() {
        return Err(Error::input(format!(
            "client order lists {} clients, {} sent logits",
            order.len(),
            logits.len()
        )));
    }
    let blocks: Vec<&LogitMatrix> = order
        .iter()
        .map(|id| {
            logits
                .iter()
                .find(|l| l.client_id == *id)
                .ok_or_else(|| Error::input(format!("client order names client {id}, which sent no logits")))
        })
        .collect::<Result<_>>()?;
    let width = c * blocks.len();
    let mut h = Matrix::zeros(n, width);
    for x in 0..n {
        let row = h.row_mut(x);
        for (j, b) in blocks.iter().enumerate() {
            row[j * c..(j + 1) * c].copy_from_slice(b.values.row(x));
        }
    }
    Ok(h)
}

/// Trains `M·C → hidden → C` with cross-entropy on `(h(x), y)` pairs from
/// the labeled meta set.
pub fn train_meta_aggregator(
    logits: &[LogitMatrix],
    labels: &[usize],
    classes: usize,
    cfg: &MetaTrainConfig,
) -> Result<MetaAggregator> {
    if labels.is_empty() || logits.iter().any(|l| l.samples() == 0) {
        return Err(Error::config("the meta set is empty"));
    }
    let (_, c) = common_shape(logits)?;
    if c != classes {
        return Err(Error::input(format!("logits have {c} classes, expected {classes}")));
    }
    let mut order: Vec<usize> = logits.iter().map(|l| l.client_id).collect();
    order.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0x3E7A]));
    let model = Model::new(
        &[order.len() * classes, cfg.hidden, classes],
        Activation::Relu,
        &mut rng,
    )?;
    let mut agg = MetaAggregator::from_model(model, order, classes)?;
    agg.refresh(logits, labels, cfg)?;
    Ok(agg)
}

/// Scores `A(h(x))` for every public sample; soft labels are their softmax.
pub fn meta_aggregate(agg: &MetaAggregator, logits: &[LogitMatrix]) -> Result<AggregatedTargets> {
    check_clients(agg, logits)?;
    let h = build_meta_features(logits, &agg.client_order)?;
    let scores = agg.model.forward(&h)?;
    Ok(AggregatedTargets::new(Strategy::Meta, scores, None))
}
