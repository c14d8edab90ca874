use serde::{Deserialize, Serialize};

use crate::aggregation::{MetaTrainConfig, MissingClients, Strategy};
use crate::error::{Error, Result};
use crate::nn::{Activation, AdamConfig};

/// When the meta aggregator is (re)trained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetaRefresh {
    /// Train once, after the first round's local training.
    Once,
    /// Train after round one, then keep training on each round's meta-set logits.
    #[default]
    EveryRound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FederationConfig {
    pub rounds: usize,
    pub first_local_epochs: usize,
    pub first_distill_epochs: usize,
    pub local_epochs: usize,
    pub distill_epochs: usize,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub adam: AdamConfig,
    pub strategy: Strategy,
    pub temperature: f64,
    pub seed: u64,
    pub meta: MetaTrainConfig,
    pub meta_refresh: MetaRefresh,
    /// UWA only: renormalize over present clients instead of failing.
    pub missing_clients: MissingClients,
    /// Train clients on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            rounds: 10,
            first_local_epochs: 10,
            first_distill_epochs: 10,
            local_epochs: 1,
            distill_epochs: 1,
            batch_size: 64,
            hidden: vec![64, 64],
            activation: Activation::Relu,
            adam: AdamConfig::default(),
            strategy: Strategy::Average,
            temperature: 1.0,
            seed: 0,
            meta: MetaTrainConfig::default(),
            meta_refresh: MetaRefresh::EveryRound,
            missing_clients: MissingClients::Error,
            parallel: true,
        }
    }
}

impl FederationConfig {
    /// The longer schedule used for harder data: 20/20 epochs in round one, 5/5 after.
    pub fn long_schedule() -> Self {
        Self {
            first_local_epochs: 20,
            first_distill_epochs: 20,
            local_epochs: 5,
            distill_epochs: 5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(Error::config("rounds must be at least 1"));
        }
        if self.batch_size == 0 || self.meta.batch_size == 0 {
            return Err(Error::config("batch sizes must be positive"));
        }
        if self.hidden.contains(&0) || self.meta.hidden == 0 {
            return Err(Error::config("hidden layer widths must be positive"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::config("temperature must be positive"));
        }
        if !(self.meta.learning_rate >= 0.0 && self.meta.learning_rate.is_finite()) {
            return Err(Error::config("meta learning_rate must be nonnegative"));
        }
        self.adam.validate()
    }

    /// `(local, distill)` epochs for a 1-based round index.
    pub fn epochs_for_round(&self, round: usize) -> (usize, usize) {
        if round <= 1 {
            (self.first_local_epochs, self.first_distill_epochs)
        } else {
            (self.local_epochs, self.distill_epochs)
        }
    }

    /// Total passes one client makes over its data across all rounds.
    pub fn total_client_epochs(&self) -> usize {
        let (l1, d1) = self.epochs_for_round(1);
        l1 + d1 + (self.rounds - 1) * (self.local_epochs + self.distill_epochs)
    }

    pub fn layer_sizes(&self, input: usize, classes: usize) -> Vec<usize> {
        let mut sizes = vec![input];
        sizes.extend_from_slice(&self.hidden);
        sizes.push(classes);
        sizes
    }
}
