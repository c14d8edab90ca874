use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{generate_synthetic, load_idx, BlobSpec, Dataset};
use crate::error::Result;

/// Where the labeled pool comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic(SyntheticSource),
    Idx(IdxSource),
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticSource::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSource {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub separation: f64,
    pub seed: u64,
}

impl Default for SyntheticSource {
    fn default() -> Self {
        Self {
            classes: 10,
            dim: 20,
            per_class: 600,
            separation: 4.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdxSource {
    pub images: PathBuf,
    pub labels: PathBuf,
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Synthetic(s) => generate_synthetic(
                &BlobSpec {
                    classes: s.classes,
                    dim: s.dim,
                    separation: s.separation,
                    seed: s.seed,
                },
                s.per_class,
            ),
            DatasetSource::Idx(s) => load_idx(&s.images, &s.labels),
        }
    }
}
