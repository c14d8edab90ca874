//! Server-side logit aggregation.
//!
//! Every client evaluates its model on the shared public set and uploads a
//! [`LogitMatrix`]. The server turns the M matrices into one set of soft
//! targets with one of three strategies:
//!
//! - [`average_logits`]: plain mean of the client logits.
//! - [`uwa_aggregate`]: per-sample confidence weights from each client's
//!   Gaussian mixture density over its own logits.
//! - [`meta_aggregate`]: a small network trained on concatenated logits.

mod average;
mod density;
mod logits;
mod meta;
mod uwa;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{softmax_with_temperature, Matrix};

pub use average::average_logits;
pub use density::{confidence_score, fit_logit_density, GaussianMixtureDensity, VARIANCE_FLOOR};
pub use logits::LogitMatrix;
pub use meta::{build_meta_features, meta_aggregate, train_meta_aggregator, MetaAggregator, MetaTrainConfig};
pub use uwa::{client_weights, uwa_aggregate, uwa_aggregate_with, MissingClients};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Average,
    Uwa,
    Meta,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Average, Strategy::Uwa, Strategy::Meta];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Average => "average",
            Strategy::Uwa => "uwa",
            Strategy::Meta => "meta",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "average" | "avg" => Ok(Strategy::Average),
            "uwa" => Ok(Strategy::Uwa),
            "meta" | "mm" => Ok(Strategy::Meta),
            other => Err(Error::config(format!(
                "unknown strategy `{other}` (expected average, uwa or meta)"
            ))),
        }
    }
}

/// Aggregated logits (or aggregator scores) and the soft labels derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedTargets {
    pub strategy: Strategy,
    /// `z(x)` per public sample (for `meta`, the scores `A(h(x))`).
    pub values: Matrix,
    /// `softmax(values / temperature)`.
    pub soft_labels: Matrix,
    pub temperature: f64,
    /// Per-sample client weights (`n × M`), UWA only.
    pub weights: Option<Matrix>,
}

impl AggregatedTargets {
    pub(crate) fn new(strategy: Strategy, values: Matrix, weights: Option<Matrix>) -> Self {
        let soft_labels = softmax_with_temperature(&values, 1.0);
        Self {
            strategy,
            values,
            soft_labels,
            temperature: 1.0,
            weights,
        }
    }

    /// Recomputes the soft labels at temperature `t`.
    pub fn with_temperature(mut self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::config(format!("temperature must be positive, got {t}")));
        }
        self.soft_labels = softmax_with_temperature(&self.values, t);
        self.temperature = t;
        Ok(self)
    }

    /// Row-wise argmax of the aggregated values, ties to the lowest class.
    pub fn predicted_classes(&self) -> Vec<usize> {
        self.values.argmax_rows()
    }
}

/// Shape checks shared by all strategies; returns `(n, C)`.
pub(crate) fn common_shape(logits: &[LogitMatrix]) -> Result<(usize, usize)> {
    let first = logits
        .first()
        .ok_or_else(|| Error::input("aggregation needs at least one client"))?;
    let shape = first.values.shape();
    for l in logits {
        if l.values.shape() != shape {
            return Err(Error::input(format!(
                "client {} logits have shape {:?}, expected {:?}",
                l.client_id,
                l.values.shape(),
                shape
            )));
        }
    }
    let mut ids: Vec<usize> = logits.iter().map(|l| l.client_id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::input("duplicate client id among logit matrices"));
    }
    Ok(shape)
}
