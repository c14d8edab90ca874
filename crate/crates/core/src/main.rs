use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fedlogit::aggregation::{
    average_logits, meta_aggregate, uwa_aggregate_with, AggregatedTargets, LogitMatrix, MetaAggregator,
    MissingClients, Strategy,
};
use fedlogit::app::{parse_config, run, ClientDensityFile, Overrides};
use fedlogit::data::partition;
use fedlogit::{Error, Result};

#[derive(Parser)]
#[command(name = "fedlogit", version, about = "Logit-based federated distillation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the strategy × k × seed sweep and write reports.
    Run(ConfigArgs),
    /// Print the partition manifest for each (k, seed) of the sweep.
    PartitionInspect(ConfigArgs),
    /// Aggregate serialized client logit dumps with one strategy.
    AggregateFile(AggregateArgs),
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset source: synthetic or idx.
    #[arg(long)]
    dataset: Option<String>,
    /// Comma-separated strategies (average, uwa, meta).
    #[arg(long, value_delimiter = ',')]
    strategy: Option<Vec<String>>,
    /// Comma-separated classes-per-client values.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other config key, e.g. `--set federation.temperature=2.0`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            dataset: self.dataset.clone(),
            strategies: self.strategy.clone(),
            k: self.k.clone(),
            clients: self.clients,
            rounds: self.rounds,
            seeds: self.seed.clone(),
            out: self.out.clone(),
            set: self.set.clone(),
        }
    }
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long)]
    strategy: Strategy,
    /// Client logit dumps (binary format).
    #[arg(long, num_args = 1.., required = true)]
    logits: Vec<PathBuf>,
    /// Client density files (uwa).
    #[arg(long, num_args = 1..)]
    densities: Vec<PathBuf>,
    /// Trained meta aggregator (meta).
    #[arg(long)]
    aggregator: Option<PathBuf>,
    /// UWA: renormalize over present clients when some are missing.
    #[arg(long)]
    allow_missing: bool,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn aggregate_file(args: &AggregateArgs) -> Result<()> {
    let logits = args
        .logits
        .iter()
        .map(|p| {
            let f = File::open(p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?;
            LogitMatrix::read_binary(BufReader::new(f), &p.display().to_string())
        })
        .collect::<Result<Vec<_>>>()?;
    let targets: AggregatedTargets = match args.strategy {
        Strategy::Average => average_logits(&logits)?,
        Strategy::Uwa => {
            let mut densities = BTreeMap::new();
            for p in &args.densities {
                let d = ClientDensityFile::read(p)?;
                densities.insert(d.client_id, d.density);
            }
            let policy = if args.allow_missing {
                MissingClients::Renormalize
            } else {
                MissingClients::Error
            };
            uwa_aggregate_with(&logits, &densities, policy)?
        }
        Strategy::Meta => {
            let path = args
                .aggregator
                .as_ref()
                .ok_or_else(|| Error::Config("meta aggregation needs --aggregator".into()))?;
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            meta_aggregate(&MetaAggregator::from_json(&text)?, &logits)?
        }
    }
    .with_temperature(args.temperature)?;

    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(File::create(p).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let c = targets.values.cols();
    let mut header = vec!["sample".to_owned()];
    header.extend((0..c).map(|i| format!("z_{i}")));
    header.extend((0..c).map(|i| format!("p_{i}")));
    header.push("predicted".to_owned());
    w.write_record(&header)?;
    let predicted = targets.predicted_classes();
    for (i, pred) in predicted.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(targets.values.row(i).iter().map(f64::to_string));
        rec.extend(targets.soft_labels.row(i).iter().map(f64::to_string));
        rec.push(pred.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::Serde(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => parse_config(args.config.as_deref(), &args.overrides()).and_then(|cfg| {
            let summary = run(&cfg)?;
            for r in &summary.reports {
                println!(
                    "{:<8} k={:<2} seed={:<3} final={:.4} reference={:.4} converged@{}",
                    r.strategy, r.k, r.seed, r.final_accuracy, r.reference_accuracy, r.convergence_round
                );
            }
            for f in &summary.failures {
                eprintln!("FAILED {} k={} seed={}: {}", f.strategy, f.k, f.seed, f.error);
            }
            if let Some(p) = &summary.paths {
                println!("summary written to {}", p.summary.display());
            }
            Ok(summary.exit_code())
        }),
        Command::PartitionInspect(args) => parse_config(args.config.as_deref(), &args.overrides()).and_then(|cfg| {
            let dataset = cfg.dataset.load()?;
            for &k in &cfg.sweep.k {
                for &seed in &cfg.sweep.seeds {
                    let cell = cfg.cell(cfg.sweep.strategies[0], k, seed);
                    let data = partition(&dataset, &cell.partition)?;
                    println!("{}", serde_json::to_string_pretty(&data.manifest())?);
                }
            }
            Ok(0)
        }),
        Command::AggregateFile(args) => aggregate_file(args).map(|_| 0),
    };
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
