//! Label-shift partition: every client sees exactly `k` classes.
//!
//! Per class, the labeled pool is shuffled and split into a held-out test
//! quota, a public quota (labels hidden), and the remaining private pool.
//! Private sets are drawn with replacement from the private pools of the
//! client's classes, so clients sharing a class may share samples.

use std::collections::BTreeSet;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::io::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionSpec {
    pub clients: usize,
    pub classes_per_client: usize,
    /// Samples drawn per client, before the validation split.
    pub private_size: usize,
    pub public_size: usize,
    pub meta_size: usize,
    pub test_size: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Require the union of client class sets to cover every class.
    pub require_coverage: bool,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        Self {
            clients: 5,
            classes_per_client: 2,
            private_size: 1000,
            public_size: 500,
            meta_size: 300,
            test_size: 1000,
            validation_fraction: 0.1,
            seed: 0,
            require_coverage: true,
        }
    }
}

impl PartitionSpec {
    pub fn validate(&self, classes: usize) -> Result<()> {
        let k = self.classes_per_client;
        if self.clients < 1 {
            return Err(Error::config("clients must be at least 1"));
        }
        if k < 1 || k > classes {
            return Err(Error::config(format!(
                "classes_per_client must be in 1..={classes}, got {k}"
            )));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::config(format!(
                "validation_fraction must be in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if self.require_coverage && self.clients * k < classes {
            return Err(Error::config(format!(
                "{} clients with {k} classes each cannot cover {classes} classes",
                self.clients
            )));
        }
        if self.test_size == 0 {
            return Err(Error::config("test_size must be positive"));
        }
        Ok(())
    }
}

/// Everything the federation needs, produced once per (spec, seed).
#[derive(Debug, Clone, PartialEq)]
pub struct FederationData {
    pub spec: PartitionSpec,
    classes: usize,
    client_classes: Vec<Vec<usize>>,
    private: Vec<Dataset>,
    validation: Vec<Dataset>,
    public: Dataset,
    public_labels: Vec<usize>,
    meta: Dataset,
    test: Dataset,
    reference_pool: Dataset,
    private_sources: Vec<Vec<usize>>,
    meta_sources: Vec<usize>,
}

impl FederationData {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn clients(&self) -> usize {
        self.private.len()
    }

    pub fn dim(&self) -> usize {
        self.public.dim()
    }

    /// Sorted class set `C_i` of each client.
    pub fn client_classes(&self) -> &[Vec<usize>] {
        &self.client_classes
    }

    /// Training part of each client's private draw.
    pub fn private(&self) -> &[Dataset] {
        &self.private
    }

    pub fn validation(&self) -> &[Dataset] {
        &self.validation
    }

    /// Unlabeled public set shared by every client.
    pub fn public(&self) -> &Dataset {
        &self.public
    }

    /// Ground truth for the public set. Evaluation only; never feed this into aggregation.
    pub fn hidden_public_labels(&self) -> &[usize] {
        &self.public_labels
    }

    pub fn meta(&self) -> &Dataset {
        &self.meta
    }

    pub fn test(&self) -> &Dataset {
        &self.test
    }

    /// Labeled union of the private pools and the public set, for the
    /// fully informed reference.
    pub fn reference_pool(&self) -> &Dataset {
        &self.reference_pool
    }

    /// Source-dataset indices of each client's private draw (training and
    /// validation), in draw order.
    pub fn private_sources(&self) -> &[Vec<usize>] {
        &self.private_sources
    }

    pub fn meta_sources(&self) -> &[usize] {
        &self.meta_sources
    }

    pub fn manifest(&self) -> FederationManifest {
        FederationManifest {
            seed: self.spec.seed,
            classes: self.classes,
            dim: self.dim(),
            clients: self.clients(),
            classes_per_client: self.spec.classes_per_client,
            client_classes: self.client_classes.clone(),
            private_sizes: self.private.iter().map(Dataset::len).collect(),
            validation_sizes: self.validation.iter().map(Dataset::len).collect(),
            public_size: self.public.len(),
            meta_size: self.meta.len(),
            test_size: self.test.len(),
        }
    }
}

/// Reproducibility record of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationManifest {
    pub seed: u64,
    pub classes: usize,
    pub dim: usize,
    pub clients: usize,
    pub classes_per_client: usize,
    pub client_classes: Vec<Vec<usize>>,
    pub private_sizes: Vec<usize>,
    pub validation_sizes: Vec<usize>,
    pub public_size: usize,
    pub meta_size: usize,
    pub test_size: usize,
}

/// Splits `total` into `parts` near-equal counts, larger ones first.
fn balanced(total: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| total / parts + usize::from(i < total % parts))
        .collect()
}

/// Uniform `k`-subsets per client, then a repair pass that swaps
/// multiply-covered classes for uncovered ones until every class is used.
pub fn assign_classes<R: Rng + ?Sized>(
    clients: usize,
    k: usize,
    classes: usize,
    require_coverage: bool,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    let mut sets: Vec<Vec<usize>> = (0..clients)
        .map(|_| index::sample(rng, classes, k).into_vec())
        .collect();
    if require_coverage && clients * k >= classes {
        loop {
            let mut cover = vec![0usize; classes];
            for s in &sets {
                for &c in s {
                    cover[c] += 1;
                }
            }
            let Some(missing) = (0..classes).find(|&c| cover[c] == 0) else {
                break;
            };
            // (client, slot) pairs holding a class that someone else also holds
            let donors: Vec<(usize, usize)> = sets
                .iter()
                .enumerate()
                .flat_map(|(i, s)| s.iter().enumerate().map(move |(j, &c)| (i, j, c)))
                .filter(|&(_, _, c)| cover[c] > 1)
                .map(|(i, j, _)| (i, j))
                .collect();
            let &(i, j) = donors
                .choose(rng)
                .expect("pigeonhole: an uncovered class implies a duplicated one");
            sets[i][j] = missing;
        }
    }
    for s in &mut sets {
        s.sort_unstable();
    }
    sets
}

/// Builds the federation split described in the module docs.
pub fn partition(dataset: &Dataset, spec: &PartitionSpec) -> Result<FederationData> {
    let labels = dataset.require_labels()?;
    let classes = dataset.classes();
    spec.validate(classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[0xDA7A]));

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    for pool in &mut by_class {
        pool.shuffle(&mut rng);
    }

    let test_quota = balanced(spec.test_size, classes);
    let public_quota = balanced(spec.public_size, classes);
    let mut test_idx = Vec::new();
    let mut public_idx = Vec::new();
    let mut private_pools: Vec<Vec<usize>> = Vec::with_capacity(classes);
    for (c, pool) in by_class.iter().enumerate() {
        let reserved = test_quota[c] + public_quota[c];
        if pool.len() <= reserved {
            return Err(Error::config(format!(
                "class {c} has {} samples; {} test + {} public leave no private pool",
                pool.len(),
                test_quota[c],
                public_quota[c]
            )));
        }
        test_idx.extend_from_slice(&pool[..test_quota[c]]);
        public_idx.extend_from_slice(&pool[test_quota[c]..reserved]);
        private_pools.push(pool[reserved..].to_vec());
    }

    let client_classes = assign_classes(
        spec.clients,
        spec.classes_per_client,
        classes,
        spec.require_coverage,
        &mut rng,
    );

    let mut private = Vec::with_capacity(spec.clients);
    let mut validation = Vec::with_capacity(spec.clients);
    let mut private_sources = Vec::with_capacity(spec.clients);
    let mut train_sources: Vec<Vec<usize>> = Vec::with_capacity(spec.clients);
    for set in &client_classes {
        let counts = balanced(spec.private_size, set.len());
        let mut train = Vec::new();
        let mut val = Vec::new();
        let mut drawn = Vec::new();
        for (&c, &n_c) in set.iter().zip(&counts) {
            if n_c < 3 {
                return Err(Error::config(format!(
                    "private_size {} gives class {c} only {n_c} samples; need 3 for a train/validation split",
                    spec.private_size
                )));
            }
            let pool = &private_pools[c];
            let draws: Vec<usize> = (0..n_c).map(|_| pool[rng.random_range(0..pool.len())]).collect();
            let n_val = ((spec.validation_fraction * n_c as f64).round() as usize).clamp(2, n_c - 1);
            val.extend_from_slice(&draws[..n_val]);
            train.extend_from_slice(&draws[n_val..]);
            drawn.extend_from_slice(&draws);
        }
        private.push(dataset.subset(&train));
        validation.push(dataset.subset(&val));
        private_sources.push(drawn);
        train_sources.push(train);
    }

    // meta set: class-balanced draw from the union of the clients' private training samples
    let union: BTreeSet<usize> = train_sources.iter().flatten().copied().collect();
    let mut union_by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for &i in &union {
        union_by_class[labels[i]].push(i);
    }
    let present: Vec<usize> = (0..classes).filter(|&c| !union_by_class[c].is_empty()).collect();
    let mut meta_sources = Vec::with_capacity(spec.meta_size);
    if !present.is_empty() {
        for (&c, &n_c) in present.iter().zip(&balanced(spec.meta_size, present.len())) {
            let pool = &mut union_by_class[c];
            pool.shuffle(&mut rng);
            if n_c <= pool.len() {
                meta_sources.extend_from_slice(&pool[..n_c]);
            } else {
                meta_sources.extend((0..n_c).map(|_| pool[rng.random_range(0..pool.len())]));
            }
        }
    }

    let public_full = dataset.subset(&public_idx);
    let public_labels = public_full.require_labels()?.to_vec();
    let mut reference_idx: Vec<usize> = private_pools.concat();
    reference_idx.extend_from_slice(&public_idx);

    Ok(FederationData {
        spec: spec.clone(),
        classes,
        client_classes,
        private,
        validation,
        public: public_full.unlabeled(),
        public_labels,
        meta: dataset.subset(&meta_sources),
        test: dataset.subset(&test_idx),
        reference_pool: dataset.subset(&reference_idx),
        private_sources,
        meta_sources,
    })
}
