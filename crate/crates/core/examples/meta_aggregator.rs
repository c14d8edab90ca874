//! Train a meta-model on clients' meta-set logits and compare it with averaging on the public set.

use fedlogit::aggregation::{average_logits, meta_aggregate, train_meta_aggregator, LogitMatrix, MetaTrainConfig};
use fedlogit::data::{generate_synthetic, partition, BlobSpec, Dataset, PartitionSpec};
use fedlogit::federation::{run_federation, FederationConfig};
use fedlogit::report::accuracy;

fn logits_on(outcome: &fedlogit::federation::FederationOutcome, set: &Dataset) -> fedlogit::Result<Vec<LogitMatrix>> {
    outcome
        .clients
        .iter()
        .map(|c| LogitMatrix::new(c.id, c.model.forward(set.features())?))
        .collect()
}

fn main() -> fedlogit::Result<()> {
    let pool = generate_synthetic(&BlobSpec { classes: 10, dim: 20, separation: 4.0, seed: 0 }, 600)?;
    let data = partition(&pool, &PartitionSpec::default())?;
    // one round of local training only; the aggregators are compared on raw client logits
    let outcome = run_federation(&data, &FederationConfig { rounds: 1, ..FederationConfig::default() })?;
    println!("client classes {:?}", data.client_classes());

    let meta_logits = logits_on(&outcome, data.meta())?;
    let meta = train_meta_aggregator(&meta_logits, data.meta().require_labels()?, data.classes(), &MetaTrainConfig::default())?;
    println!("meta model input {} -> output {}", meta.model.input_dim(), meta.model.output_dim());

    let public_logits = logits_on(&outcome, data.public())?;
    let truth = data.hidden_public_labels();
    let avg = average_logits(&public_logits)?;
    let mm = meta_aggregate(&meta, &public_logits)?;
    println!("public-set agreement with hidden labels");
    println!("  average {:.3}", accuracy(&avg.predicted_classes(), truth));
    println!("  meta    {:.3}", accuracy(&mm.predicted_classes(), truth));
    Ok(())
}
