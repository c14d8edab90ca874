//! The communication round loop.
//!
//! Each round: every client trains on its private data, uploads its logits
//! on the public set, the server aggregates them once, and every client is
//! then refined on the public set against the aggregated soft targets.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{
    average_logits, fit_logit_density, meta_aggregate, train_meta_aggregator, uwa_aggregate_with,
    AggregatedTargets, GaussianMixtureDensity, LogitMatrix, MetaAggregator, MetaTrainConfig, Strategy,
};
use crate::data::FederationData;
use crate::error::{Error, Result};
use crate::federation::config::{FederationConfig, MetaRefresh};
use crate::io::derive_seed;
use crate::nn::{train_epochs, Model, OptimizerState};
use crate::report::evaluate;

const STREAM_INIT: u64 = 0x1417;
const STREAM_LOCAL: u64 = 0x10CA;
const STREAM_DISTILL: u64 = 0xD157;

/// Bytes per transmitted scalar (f64 logits and weights).
pub const BYTES_PER_SCALAR: u64 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub id: usize,
    pub model: Model,
    pub optimizer: OptimizerState,
    pub classes: Vec<usize>,
    /// Logit density over the client's validation set (UWA only).
    pub density: Option<GaussianMixtureDensity>,
}

impl ClientState {
    pub fn new(id: usize, classes: Vec<usize>, sizes: &[usize], cfg: &FederationConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_INIT, id as u64]));
        let model = Model::new(sizes, cfg.activation, &mut rng)?;
        let optimizer = OptimizerState::new(&model, cfg.adam);
        Ok(Self {
            id,
            model,
            optimizer,
            classes,
            density: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub client_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Logits uploaded on the public set: `M × |D_pub| × C × 8`.
    pub uplink_bytes: u64,
    /// Extra logits uploaded on the meta set (meta strategy only).
    pub meta_uplink_bytes: u64,
    /// What shipping every client's weights once would cost: `params × 8 × M`.
    pub weight_baseline_bytes: u64,
    pub wall_seconds: f64,
}

/// Everything produced by one round besides the updated clients.
#[derive(Debug, Clone)]
pub struct RoundOutput {
    pub metrics: RoundMetrics,
    pub public_logits: Vec<LogitMatrix>,
    pub targets: AggregatedTargets,
}

fn for_each_client<T, F>(clients: &mut [ClientState], parallel: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ClientState) -> Result<T> + Sync + Send,
{
    if parallel {
        clients.par_iter_mut().map(f).collect()
    } else {
        clients.iter_mut().map(f).collect()
    }
}

fn meta_config(cfg: &FederationConfig) -> MetaTrainConfig {
    MetaTrainConfig {
        seed: derive_seed(cfg.seed, &[cfg.meta.seed]),
        ..cfg.meta.clone()
    }
}

/// Runs round `round` (1-based). On error every client and the meta
/// aggregator are restored to their state before the round.
pub fn run_round(
    clients: &mut [ClientState],
    data: &FederationData,
    cfg: &FederationConfig,
    round: usize,
    meta: &mut Option<MetaAggregator>,
) -> Result<RoundOutput> {
    let snapshot = clients.to_vec();
    let meta_snapshot = meta.clone();
    let result = round_body(clients, data, cfg, round, meta);
    if result.is_err() {
        clients.clone_from_slice(&snapshot);
        *meta = meta_snapshot;
    }
    result
}

fn round_body(
    clients: &mut [ClientState],
    data: &FederationData,
    cfg: &FederationConfig,
    round: usize,
    meta: &mut Option<MetaAggregator>,
) -> Result<RoundOutput> {
    let started = Instant::now();
    let (local_epochs, distill_epochs) = cfg.epochs_for_round(round);
    let classes = data.classes();

    for_each_client(clients, cfg.parallel, |c| {
        let private = &data.private()[c.id];
        let targets = private.one_hot_targets()?;
        train_epochs(
            &mut c.model,
            &mut c.optimizer,
            private.features(),
            &targets,
            local_epochs,
            cfg.batch_size,
            derive_seed(cfg.seed, &[STREAM_LOCAL, c.id as u64, round as u64]),
        )?;
        if cfg.strategy == Strategy::Uwa {
            let val = &data.validation()[c.id];
            let logits = c.model.forward(val.features())?;
            c.density = Some(fit_logit_density(&logits, val.require_labels()?, &c.classes)?);
        }
        Ok(())
    })?;

    let public_logits = clients
        .iter()
        .map(|c| LogitMatrix::new(c.id, c.model.forward(data.public().features())?))
        .collect::<Result<Vec<_>>>()?;

    let mut meta_uplink = 0u64;
    let targets = match cfg.strategy {
        Strategy::Average => average_logits(&public_logits)?,
        Strategy::Uwa => {
            let densities: BTreeMap<usize, GaussianMixtureDensity> = clients
                .iter()
                .map(|c| {
                    c.density
                        .clone()
                        .map(|d| (c.id, d))
                        .ok_or_else(|| Error::input(format!("client {} has no fitted density", c.id)))
                })
                .collect::<Result<_>>()?;
            uwa_aggregate_with(&public_logits, &densities, cfg.missing_clients)?
        }
        Strategy::Meta => {
            let needs_training = meta.is_none() || cfg.meta_refresh == MetaRefresh::EveryRound;
            if needs_training {
                let meta_set = data.meta();
                let labels = meta_set.require_labels()?;
                let meta_logits = clients
                    .iter()
                    .map(|c| LogitMatrix::new(c.id, c.model.forward(meta_set.features())?))
                    .collect::<Result<Vec<_>>>()?;
                meta_uplink = meta_logits.iter().map(|l| l.payload_bytes() as u64).sum();
                match meta.as_mut() {
                    Some(agg) => agg.refresh(&meta_logits, labels, &meta_config(cfg))?,
                    None => {
                        *meta = Some(train_meta_aggregator(&meta_logits, labels, classes, &meta_config(cfg))?)
                    }
                }
            }
            meta_aggregate(meta.as_ref().expect("trained above"), &public_logits)?
        }
    };
    let targets = targets.with_temperature(cfg.temperature)?;

    let soft = &targets.soft_labels;
    for_each_client(clients, cfg.parallel, |c| {
        train_epochs(
            &mut c.model,
            &mut c.optimizer,
            data.public().features(),
            soft,
            distill_epochs,
            cfg.batch_size,
            derive_seed(cfg.seed, &[STREAM_DISTILL, c.id as u64, round as u64]),
        )
        .map(drop)
    })?;

    let client_accuracy = clients
        .iter()
        .map(|c| evaluate(&c.model, data.test()))
        .collect::<Result<Vec<_>>>()?;
    let mean_accuracy = client_accuracy.iter().sum::<f64>() / client_accuracy.len() as f64;
    let m = clients.len() as u64;
    let params = clients.first().map_or(0, |c| c.model.parameter_count()) as u64;
    let metrics = RoundMetrics {
        round,
        client_accuracy,
        mean_accuracy,
        uplink_bytes: m * (data.public().len() * classes) as u64 * BYTES_PER_SCALAR,
        meta_uplink_bytes: meta_uplink,
        weight_baseline_bytes: params * BYTES_PER_SCALAR * m,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(RoundOutput {
        metrics,
        public_logits,
        targets,
    })
}

/// Final state of a federation run.
#[derive(Debug, Clone)]
pub struct FederationOutcome {
    pub rounds: Vec<RoundMetrics>,
    pub clients: Vec<ClientState>,
    pub meta: Option<MetaAggregator>,
    /// Public-set logits uploaded in the last round.
    pub last_public_logits: Vec<LogitMatrix>,
}

/// Fresh clients for `data`, one per private set, ids `0..M`.
pub fn init_clients(data: &FederationData, cfg: &FederationConfig) -> Result<Vec<ClientState>> {
    let sizes = cfg.layer_sizes(data.dim(), data.classes());
    data.client_classes()
        .iter()
        .enumerate()
        .map(|(id, classes)| ClientState::new(id, classes.clone(), &sizes, cfg))
        .collect()
}

fn preflight(data: &FederationData, cfg: &FederationConfig) -> Result<()> {
    cfg.validate()?;
    if data.clients() == 0 {
        return Err(Error::config("the federation has no clients"));
    }
    if data.public().is_empty() {
        return Err(Error::config("the public set is empty"));
    }
    if data.private().iter().any(|d| d.is_empty()) {
        return Err(Error::config("every client needs private training data"));
    }
    match cfg.strategy {
        Strategy::Uwa => {
            for (i, (val, classes)) in data.validation().iter().zip(data.client_classes()).enumerate() {
                let labels = val.require_labels()?;
                for &c in classes {
                    let n = labels.iter().filter(|&&y| y == c).count();
                    if n < 2 {
                        return Err(Error::config(format!(
                            "client {i} has {n} validation samples of class {c}; UWA needs at least 2"
                        )));
                    }
                }
            }
        }
        Strategy::Meta => {
            if data.meta().is_empty() {
                return Err(Error::config("meta strategy needs a nonempty meta set"));
            }
        }
        Strategy::Average => {}
    }
    Ok(())
}

/// Runs all configured rounds from freshly initialized clients.
pub fn run_federation(data: &FederationData, cfg: &FederationConfig) -> Result<FederationOutcome> {
    preflight(data, cfg)?;
    let mut clients = init_clients(data, cfg)?;
    let mut meta = None;
    let mut rounds = Vec::with_capacity(cfg.rounds);
    let mut last_public_logits = Vec::new();
    for r in 1..=cfg.rounds {
        let out = run_round(&mut clients, data, cfg, r, &mut meta)?;
        rounds.push(out.metrics);
        last_public_logits = out.public_logits;
    }
    Ok(FederationOutcome {
        rounds,
        clients,
        meta,
        last_public_logits,
    })
}

