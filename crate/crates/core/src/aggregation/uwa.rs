use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::aggregation::{common_shape, AggregatedTargets, GaussianMixtureDensity, LogitMatrix, Strategy};
use crate::error::{Error, Result};
use crate::nn::loss::softmax_into;
use crate::nn::Matrix;

/// What to do when a client with a fitted density sent no logits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingClients {
    #[default]
    Error,
    /// Normalize the weights over the clients that are present.
    Renormalize,
}

/// Per-sample client weights `wᵢ(x) = softmax_i ℓᵢ(x)`, as an `n × M`
/// matrix whose columns follow the order of `logits`.
pub fn client_weights(
    logits: &[LogitMatrix],
    densities: &BTreeMap<usize, GaussianMixtureDensity>,
) -> Result<Matrix> {
    let (n, c) = common_shape(logits)?;
    let mut chosen = Vec::with_capacity(logits.len());
    for l in logits {
        let d = densities.get(&l.client_id).ok_or_else(|| {
            Error::input(format!("no fitted density for client {}", l.client_id))
        })?;
        if d.dim() != c {
            return Err(Error::input(format!(
                "density for client {} is over {} dimensions, logits have {c}",
                l.client_id,
                d.dim()
            )));
        }
        chosen.push(d);
    }
    let m = logits.len();
    let mut weights = Matrix::zeros(n, m);
    let mut scores = vec![0.0; m];
    for x in 0..n {
        for (s, (l, d)) in scores.iter_mut().zip(logits.iter().zip(&chosen)) {
            *s = d.log_density(l.values.row(x));
        }
        if scores.iter().all(|s| *s == f64::NEG_INFINITY) {
            // every client finds the input impossible; fall back to uniform
            scores.iter_mut().for_each(|s| *s = 0.0);
        }
        softmax_into(&scores, weights.row_mut(x));
    }
    Ok(weights)
}

/// Uncertainty-weighted averaging: `z(x) = Σᵢ wᵢ(x) fᵢ(x)`, strict about
/// missing clients.
pub fn uwa_aggregate(
    logits: &[LogitMatrix],
    densities: &BTreeMap<usize, GaussianMixtureDensity>,
) -> Result<AggregatedTargets> {
    uwa_aggregate_with(logits, densities, MissingClients::Error)
}

pub fn uwa_aggregate_with(
    logits: &[LogitMatrix],
    densities: &BTreeMap<usize, GaussianMixtureDensity>,
    missing: MissingClients,
) -> Result<AggregatedTargets> {
    if missing == MissingClients::Error {
        if let Some(absent) = densities
            .keys()
            .find(|id| !logits.iter().any(|l| l.client_id == **id))
        {
            return Err(Error::input(format!(
                "client {absent} has a density but sent no logits (missing-client renormalization is off)"
            )));
        }
    }
    let weights = client_weights(logits, densities)?;
    let (n, c) = common_shape(logits)?;
    let mut z = Matrix::zeros(n, c);
    for x in 0..n {
        let w = weights.row(x);
        let out = z.row_mut(x);
        for (wi, l) in w.iter().zip(logits) {
            for (o, f) in out.iter_mut().zip(l.values.row(x)) {
                *o += wi * f;
            }
        }
    }
    Ok(AggregatedTargets::new(Strategy::Uwa, z, Some(weights)))
}
