//! Sweep strategies over label skew and seeds with the declarative runner, then read the summary back.

use fedlogit::app::{parse_config_str, run};
use fedlogit::report::read_summary;

const CONFIG: &str = r#"
[federation]
rounds = 6

[sweep]
strategies = ["average", "uwa", "meta"]
k = [2, 5, 10]
seeds = [0]
"#;

fn main() -> fedlogit::Result<()> {
    let dir = std::env::temp_dir().join("fedlogit-sweep-example");
    let overrides = fedlogit::app::Overrides { out: Some(dir.clone()), ..Default::default() };
    let cfg = parse_config_str(CONFIG, &overrides)?;
    let summary = run(&cfg)?;
    println!("{} cells, {} failed", summary.reports.len(), summary.failures.len());

    println!("{:>8} {:>3} {:>8} {:>9}  conv", "strategy", "k", "final", "reference");
    for row in read_summary(&dir.join("summary.csv"))? {
        println!(
            "{:>8} {:>3} {:>8.3} {:>9.3}  {}",
            row.strategy, row.k, row.final_accuracy, row.reference_accuracy, row.convergence_round
        );
    }
    println!("outputs in {}", dir.display());
    Ok(())
}
