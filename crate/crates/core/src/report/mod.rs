//! Accuracy evaluation, experiment reports and their on-disk formats.
//!
//! An output directory holds:
//!
//! - `summary.csv`: `strategy,k,M,final_accuracy,reference_accuracy,convergence_round,uplink_bytes,seed`,
//!   one row per sweep cell. `uplink_bytes` is the total over all rounds.
//! - `rounds.jsonl`: one JSON object per round per cell (cell keys plus [`RoundMetrics`]).
//! - `curves.csv`: `strategy,k,seed,round,mean_accuracy`, plot-ready.
//! - `cells/<strategy>_k<k>_seed<seed>.json`: the full [`ExperimentReport`], config echo included.

mod evaluate;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregation::Strategy;
use crate::data::{DatasetSource, PartitionSpec};
use crate::error::{Error, Result};
use crate::federation::{FederationConfig, RoundMetrics};

pub use evaluate::{accuracy, evaluate};

/// Default convergence band around the final accuracy.
pub const CONVERGENCE_THRESHOLD: f64 = 0.01;

/// Everything needed to rerun one sweep cell bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub dataset: DatasetSource,
    pub partition: PartitionSpec,
    pub federation: FederationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: CellConfig,
    pub strategy: Strategy,
    pub k: usize,
    pub clients: usize,
    pub seed: u64,
    pub rounds: Vec<RoundMetrics>,
    pub final_accuracy: f64,
    pub reference_accuracy: f64,
    /// 1-based round from which mean accuracy stays within the threshold of the final value.
    pub convergence_round: usize,
    pub total_uplink_bytes: u64,
    pub weight_baseline_bytes: u64,
}

impl ExperimentReport {
    pub fn new(
        config: CellConfig,
        rounds: Vec<RoundMetrics>,
        reference_accuracy: f64,
        threshold: f64,
    ) -> Result<Self> {
        let last = rounds
            .last()
            .ok_or_else(|| Error::input("a report needs at least one round"))?;
        let final_accuracy = last.mean_accuracy;
        let curve: Vec<f64> = rounds.iter().map(|r| r.mean_accuracy).collect();
        Ok(Self {
            strategy: config.federation.strategy,
            k: config.partition.classes_per_client,
            clients: config.partition.clients,
            seed: config.federation.seed,
            final_accuracy,
            reference_accuracy,
            convergence_round: convergence_round(&curve, threshold),
            total_uplink_bytes: rounds.iter().map(|r| r.uplink_bytes).sum(),
            weight_baseline_bytes: last.weight_baseline_bytes,
            rounds,
            config,
        })
    }

    pub fn summary_row(&self) -> SummaryRow {
        SummaryRow {
            strategy: self.strategy,
            k: self.k,
            clients: self.clients,
            final_accuracy: self.final_accuracy,
            reference_accuracy: self.reference_accuracy,
            convergence_round: self.convergence_round,
            uplink_bytes: self.total_uplink_bytes,
            seed: self.seed,
        }
    }

    pub fn cell_name(&self) -> String {
        format!("{}_k{}_seed{}", self.strategy, self.k, self.seed)
    }
}

/// First round (1-based) after which every accuracy stays within
/// `threshold` of the last one.
pub fn convergence_round(curve: &[f64], threshold: f64) -> usize {
    let Some(&last) = curve.last() else {
        return 0;
    };
    let mut first = curve.len();
    for (i, a) in curve.iter().enumerate().rev() {
        if (a - last).abs() <= threshold {
            first = i + 1;
        } else {
            break;
        }
    }
    first
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub strategy: Strategy,
    pub k: usize,
    #[serde(rename = "M")]
    pub clients: usize,
    pub final_accuracy: f64,
    pub reference_accuracy: f64,
    pub convergence_round: usize,
    pub uplink_bytes: u64,
    pub seed: u64,
}

#[derive(Serialize)]
struct RoundLine<'a> {
    strategy: Strategy,
    k: usize,
    seed: u64,
    clients: usize,
    #[serde(flatten)]
    metrics: &'a RoundMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub strategy: Strategy,
    pub k: usize,
    pub seed: u64,
    pub round: usize,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub summary: PathBuf,
    pub rounds: PathBuf,
    pub curves: PathBuf,
    pub cells: Vec<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes the summary, round log, curve data and per-cell reports into `dir`.
pub fn emit_report(reports: &[ExperimentReport], dir: &Path) -> Result<ReportPaths> {
    let cells_dir = dir.join("cells");
    fs::create_dir_all(&cells_dir).map_err(|e| Error::io(&cells_dir, e))?;

    let summary = dir.join("summary.csv");
    let mut w = csv::Writer::from_writer(create(&summary)?);
    for r in reports {
        w.serialize(r.summary_row())?;
    }
    w.flush().map_err(|e| Error::io(&summary, e))?;

    let rounds = dir.join("rounds.jsonl");
    let mut out = create(&rounds)?;
    for r in reports {
        for m in &r.rounds {
            let line = RoundLine {
                strategy: r.strategy,
                k: r.k,
                seed: r.seed,
                clients: r.clients,
                metrics: m,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n").map_err(|e| Error::io(&rounds, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(&rounds, e))?;

    let curves = dir.join("curves.csv");
    let mut w = csv::Writer::from_writer(create(&curves)?);
    for r in reports {
        for m in &r.rounds {
            w.serialize(CurvePoint {
                strategy: r.strategy,
                k: r.k,
                seed: r.seed,
                round: m.round,
                mean_accuracy: m.mean_accuracy,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(&curves, e))?;

    let mut cells = Vec::with_capacity(reports.len());
    for r in reports {
        let path = cells_dir.join(format!("{}.json", r.cell_name()));
        let mut out = create(&path)?;
        serde_json::to_writer_pretty(&mut out, r)?;
        out.flush().map_err(|e| Error::io(&path, e))?;
        cells.push(path);
    }
    Ok(ReportPaths {
        summary,
        rounds,
        curves,
        cells,
    })
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn read_curves(path: &Path) -> Result<Vec<CurvePoint>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}
