//! Datasets, loaders and the label-shift federation partition.

pub mod dataset;
pub mod idx;
pub mod partition;
pub mod source;
pub mod synthetic;

pub use dataset::{label_prior, Dataset};
pub use idx::load_idx;
pub use partition::{partition, FederationData, FederationManifest, PartitionSpec};
pub use source::{DatasetSource, IdxSource, SyntheticSource};
pub use synthetic::{generate_synthetic, BlobSpec, Blobs};
