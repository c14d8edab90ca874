//! Cartesian sweep over strategy × k × seed.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregation::{GaussianMixtureDensity, Strategy};
use crate::app::config::ExperimentConfig;
use crate::data::{partition, Dataset, FederationData};
use crate::error::{Error, Result};
use crate::federation::{run_federation, train_reference, FederationOutcome};
use crate::report::{emit_report, CellConfig, ExperimentReport, ReportPaths};

/// A density dump tagged with its owner, as read by `aggregate-file`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientDensityFile {
    pub client_id: usize,
    pub density: GaussianMixtureDensity,
}

impl ClientDensityFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: ClientDensityFile = serde_json::from_str(&text)?;
        let d = raw.density;
        Ok(Self {
            client_id: raw.client_id,
            density: GaussianMixtureDensity::from_parameters(
                d.classes().to_vec(),
                d.means().clone(),
                d.variances().clone(),
            )?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub strategy: Strategy,
    pub k: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub reports: Vec<ExperimentReport>,
    pub failures: Vec<CellFailure>,
    pub paths: Option<ReportPaths>,
}

impl RunSummary {
    pub fn success(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(!self.success())
    }
}

/// Runs one cell from its configuration echo, on an already-loaded pool.
pub fn run_cell_on(
    dataset: &Dataset,
    cell: &CellConfig,
    threshold: f64,
) -> Result<(ExperimentReport, FederationOutcome)> {
    let data = partition(dataset, &cell.partition)?;
    let reference = train_reference(&data, &cell.federation)?;
    run_cell_with(&data, cell, reference, threshold)
}

fn run_cell_with(
    data: &FederationData,
    cell: &CellConfig,
    reference: f64,
    threshold: f64,
) -> Result<(ExperimentReport, FederationOutcome)> {
    let outcome = run_federation(data, &cell.federation)?;
    let report = ExperimentReport::new(cell.clone(), outcome.rounds.clone(), reference, threshold)?;
    Ok((report, outcome))
}

/// Reruns a cell from a report's config echo.
pub fn reproduce(cell: &CellConfig, threshold: f64) -> Result<ExperimentReport> {
    let dataset = cell.dataset.load()?;
    Ok(run_cell_on(&dataset, cell, threshold)?.0)
}

/// Loads the dataset, runs every cell (continuing past failures) and writes
/// the reports. Dataset errors abort before any training.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary> {
    let dataset = config.dataset.load()?;
    if dataset.is_empty() {
        return Err(Error::config("the dataset is empty"));
    }
    let threshold = config.report.convergence_threshold;
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    let fail_all = |failures: &mut Vec<CellFailure>, k: usize, seed: u64, e: &Error| {
        for &strategy in &config.sweep.strategies {
            failures.push(CellFailure {
                strategy,
                k,
                seed,
                error: e.to_string(),
            });
        }
    };

    for &k in &config.sweep.k {
        for &seed in &config.sweep.seeds {
            // partition and reference depend only on (k, seed); share them across strategies
            let base = config.cell(config.sweep.strategies[0], k, seed);
            let data = match partition(&dataset, &base.partition) {
                Ok(d) => d,
                Err(e) => {
                    fail_all(&mut failures, k, seed, &e);
                    continue;
                }
            };
            let reference = match train_reference(&data, &base.federation) {
                Ok(r) => r,
                Err(e) => {
                    fail_all(&mut failures, k, seed, &e);
                    continue;
                }
            };
            for &strategy in &config.sweep.strategies {
                let cell = config.cell(strategy, k, seed);
                match run_cell_with(&data, &cell, reference, threshold) {
                    Ok((report, outcome)) => {
                        if config.output.dump_artifacts {
                            let dir = config.output.dir.join("artifacts").join(report.cell_name());
                            if let Err(e) = dump_artifacts(&dir, &outcome) {
                                failures.push(CellFailure {
                                    strategy,
                                    k,
                                    seed,
                                    error: e.to_string(),
                                });
                            }
                        }
                        reports.push(report);
                    }
                    Err(e) => failures.push(CellFailure {
                        strategy,
                        k,
                        seed,
                        error: e.to_string(),
                    }),
                }
            }
        }
    }

    let paths = if reports.is_empty() {
        None
    } else {
        Some(emit_report(&reports, &config.output.dir)?)
    };
    Ok(RunSummary {
        reports,
        failures,
        paths,
    })
}

/// Writes `client_<id>.bin` logit dumps, `density_<id>.json` (UWA) and
/// `meta_aggregator.json` (meta) for the last round of a run.
pub fn dump_artifacts(dir: &Path, outcome: &FederationOutcome) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for l in &outcome.last_public_logits {
        let path = dir.join(format!("client_{}.bin", l.client_id));
        let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
        l.write_binary(&mut w).map_err(|e| Error::io(&path, e))?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    let densities: BTreeMap<usize, &GaussianMixtureDensity> = outcome
        .clients
        .iter()
        .filter_map(|c| c.density.as_ref().map(|d| (c.id, d)))
        .collect();
    for (id, d) in densities {
        let path = dir.join(format!("density_{id}.json"));
        let body = serde_json::to_string_pretty(&ClientDensityFile {
            client_id: id,
            density: d.clone(),
        })?;
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    if let Some(meta) = &outcome.meta {
        let path = dir.join("meta_aggregator.json");
        fs::write(&path, meta.to_json()?).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
