//! Run the full federated distillation loop with each aggregation strategy on one partition.

use fedlogit::aggregation::Strategy;
use fedlogit::data::{generate_synthetic, partition, BlobSpec, PartitionSpec};
use fedlogit::federation::{run_federation, train_reference, FederationConfig};

fn main() -> fedlogit::Result<()> {
    let pool = generate_synthetic(&BlobSpec { classes: 10, dim: 20, separation: 4.0, seed: 0 }, 600)?;
    let data = partition(&pool, &PartitionSpec { classes_per_client: 2, ..PartitionSpec::default() })?;
    let base = FederationConfig::default();
    println!("reference (pooled private data): {:.3}", train_reference(&data, &base)?);

    for strategy in Strategy::ALL {
        let outcome = run_federation(&data, &FederationConfig { strategy, ..base.clone() })?;
        let curve: Vec<String> = outcome.rounds.iter().map(|r| format!("{:.3}", r.mean_accuracy)).collect();
        let last = outcome.rounds.last().expect("at least one round");
        println!("{strategy:>7}: {}", curve.join(" "));
        println!(
            "         uplink {} B/round, meta uplink {} B/round, weight baseline {} B",
            last.uplink_bytes, last.meta_uplink_bytes, last.weight_baseline_bytes
        );
    }
    Ok(())
}
