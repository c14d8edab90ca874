//! Split one labeled pool into label-skewed client sets plus public, meta and test sets.

use fedlogit::data::{generate_synthetic, label_prior, partition, BlobSpec, PartitionSpec};

fn main() -> fedlogit::Result<()> {
    let pool = generate_synthetic(&BlobSpec { classes: 10, dim: 20, separation: 4.0, seed: 0 }, 600)?;
    for k in [2, 5, 10] {
        let spec = PartitionSpec { classes_per_client: k, ..PartitionSpec::default() };
        let data = partition(&pool, &spec)?;
        println!("k = {k}");
        for (i, (private, classes)) in data.private().iter().zip(data.client_classes()).enumerate() {
            let prior = label_prior(private)?;
            let shown: Vec<String> = classes.iter().map(|&c| format!("{c}:{:.2}", prior[c])).collect();
            println!(
                "  client {i}: {} private, {} validation, classes [{}]",
                private.len(),
                data.validation()[i].len(),
                shown.join(" ")
            );
        }
    }
    let data = partition(&pool, &PartitionSpec::default())?;
    let manifest = serde_json::to_string(&data.manifest()).expect("manifest serializes");
    println!("public {} (unlabeled), meta {}, test {}", data.public().len(), data.meta().len(), data.test().len());
    println!("{manifest}");
    Ok(())
}
