use std::fs;
use std::path::Path;
use std::process::Command;

use fedlogit::aggregation::{average_logits, LogitMatrix, Strategy};
use fedlogit::app::{parse_config_str, reproduce, run, ExperimentConfig, Overrides};
use fedlogit::data::DatasetSource;
use fedlogit::report::{
    convergence_round, emit_report, read_curves, read_summary, ExperimentReport, CONVERGENCE_THRESHOLD,
};
use fedlogit::Error;

const TINY: &str = r#"
[dataset]
classes = 4
dim = 6
per_class = 150
separation = 4.0

[partition]
clients = 3
private_size = 120
public_size = 120
meta_size = 60
test_size = 200

[federation]
rounds = 2
first_local_epochs = 3
first_distill_epochs = 3
batch_size = 32
hidden = [16]
"#;

fn tiny(dir: &Path, extra: &str) -> ExperimentConfig {
    let text = format!("{TINY}\n{extra}");
    let o = Overrides { out: Some(dir.to_path_buf()), ..Overrides::default() };
    parse_config_str(&text, &o).unwrap()
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fedlogit"));
    c.env_remove(fedlogit::app::OUTPUT_ENV);
    c
}

#[test]
fn minimal_config_uses_defaults() {
    let cfg = parse_config_str("", &Overrides::default()).unwrap();
    assert_eq!(cfg.partition.clients, 5);
    assert_eq!(cfg.partition.private_size, 1000);
    assert_eq!(cfg.partition.public_size, 500);
    assert_eq!(cfg.partition.meta_size, 300);
    assert_eq!(cfg.federation.rounds, 10);
    assert_eq!(cfg.federation.temperature, 1.0);
    assert_eq!(cfg.federation.adam.learning_rate, 1e-3);
    assert_eq!(cfg.sweep.strategies, vec![Strategy::Average]);
    assert!(matches!(cfg.dataset, DatasetSource::Synthetic(_)));
}

#[test]
fn config_errors_name_the_key() {
    let err = parse_config_str("[sweep]\nk = [0]\n", &Overrides::default()).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    assert!(err.to_string().contains("sweep.k"), "{err}");

    let err = parse_config_str("[federation]\nroundz = 3\n", &Overrides::default()).unwrap_err();
    assert!(err.to_string().contains("roundz"), "{err}");

    let o = Overrides { set: vec!["federation.seed=4".into()], ..Overrides::default() };
    assert!(parse_config_str("", &o).unwrap_err().to_string().contains("sweep.seeds"));

    let o = Overrides { strategies: Some(vec!["median".into()]), ..Overrides::default() };
    assert!(parse_config_str("", &o).is_err());
}

#[test]
fn flags_override_the_file() {
    let o = Overrides {
        rounds: Some(3),
        k: Some(vec![2, 5]),
        set: vec!["federation.temperature=2.5".into(), "dataset.dim=7".into()],
        ..Overrides::default()
    };
    let cfg = parse_config_str("[federation]\nrounds = 50\ntemperature = 1.0\n", &o).unwrap();
    assert_eq!(cfg.federation.rounds, 3);
    assert_eq!(cfg.federation.temperature, 2.5);
    assert_eq!(cfg.sweep.k, vec![2, 5]);
    match cfg.dataset {
        DatasetSource::Synthetic(s) => assert_eq!(s.dim, 7),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn convergence_round_cases() {
    assert_eq!(convergence_round(&[0.1, 0.5, 0.9, 0.905, 0.9], 0.01), 3);
    assert_eq!(convergence_round(&[0.9, 0.9, 0.9], 0.01), 1);
    assert_eq!(convergence_round(&[0.9, 0.5, 0.9], 0.01), 3);
    assert_eq!(convergence_round(&[0.7], CONVERGENCE_THRESHOLD), 1);
    assert_eq!(convergence_round(&[], 0.01), 0);
}

#[test]
fn sweep_covers_the_cartesian_product() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(
        dir.path(),
        "[sweep]\nstrategies = [\"average\", \"uwa\", \"meta\"]\nk = [2, 3, 4]\nseeds = [0]\n",
    );
    let summary = run(&cfg).unwrap();
    assert!(summary.success(), "{:?}", summary.failures);
    assert_eq!(summary.exit_code(), 0);
    assert_eq!(summary.reports.len(), 9);

    let rows = read_summary(&dir.path().join("summary.csv")).unwrap();
    assert_eq!(rows.len(), 9);
    for (row, report) in rows.iter().zip(&summary.reports) {
        assert_eq!(row, &report.summary_row());
        let last = report.rounds.last().unwrap();
        let mean = last.client_accuracy.iter().sum::<f64>() / last.client_accuracy.len() as f64;
        assert_eq!(row.final_accuracy, mean);
        assert_eq!(row.uplink_bytes, 2 * 3 * 120 * 4 * 8);
    }
    let mut ks: Vec<usize> = rows.iter().map(|r| r.k).collect();
    ks.dedup();
    assert_eq!(ks, vec![2, 3, 4]);

    let curves = read_curves(&dir.path().join("curves.csv")).unwrap();
    assert_eq!(curves.len(), 9 * 2);
    let jsonl = fs::read_to_string(dir.path().join("rounds.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 18);
    let first: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    for key in ["strategy", "k", "seed", "round", "client_accuracy", "uplink_bytes", "weight_baseline_bytes"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn two_strategies_give_two_rows_and_reports_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), "[sweep]\nstrategies = [\"average\", \"uwa\"]\n");
    let summary = run(&cfg).unwrap();
    let rows = read_summary(&summary.paths.as_ref().unwrap().summary).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].strategy, Strategy::Average);
    assert_eq!(rows[1].strategy, Strategy::Uwa);

    let other = tempfile::tempdir().unwrap();
    let paths = emit_report(&summary.reports, other.path()).unwrap();
    assert_eq!(read_summary(&paths.summary).unwrap(), rows);

    let cell: ExperimentReport =
        serde_json::from_str(&fs::read_to_string(&paths.cells[1]).unwrap()).unwrap();
    assert_eq!(cell, summary.reports[1]);
    let again = reproduce(&cell.config, CONVERGENCE_THRESHOLD).unwrap();
    assert_eq!(again.final_accuracy, cell.final_accuracy);
    assert_eq!(again.summary_row(), cell.summary_row());
}

#[test]
fn failing_cells_do_not_stop_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let text = TINY.replace("meta_size = 60", "meta_size = 0");
    let o = Overrides {
        out: Some(dir.path().to_path_buf()),
        strategies: Some(vec!["average".into(), "meta".into()]),
        ..Overrides::default()
    };
    let summary = run(&parse_config_str(&text, &o).unwrap()).unwrap();
    assert_eq!(summary.reports.len(), 1);
    assert_eq!(summary.failures.len(), 1);
    assert_eq!(summary.failures[0].strategy, Strategy::Meta);
    assert_eq!(summary.exit_code(), 1);
}

#[test]
fn unreadable_dataset_aborts_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "[dataset]\nsource = \"idx\"\nimages = \"{0}/none-img\"\nlabels = \"{0}/none-lbl\"\n",
        dir.path().display()
    );
    let cfg = parse_config_str(&text, &Overrides::default()).unwrap();
    assert!(matches!(run(&cfg), Err(Error::Io { .. })));
}

fn write_tiny(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("tiny.toml");
    fs::write(&p, TINY).unwrap();
    p
}

#[test]
fn binary_run_writes_reports_and_sets_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny(dir.path());
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--strategy", "average,uwa", "--k", "2", "--seed", "0,1", "--rounds", "1", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let rows = read_summary(&out.join("summary.csv")).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.uplink_bytes == 3 * 120 * 4 * 8));

    let bad = bin().args(["run", "--strategy", "median"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("median"));
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny(dir.path());
    let target = dir.path().join("from-env");
    let status = bin()
        .current_dir(dir.path())
        .env(fedlogit::app::OUTPUT_ENV, &target)
        .args(["run", "--rounds", "1", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(status.status.success());
    assert!(target.join("summary.csv").exists());
}

#[test]
fn partition_inspect_prints_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny(dir.path());
    let out = bin()
        .args(["partition-inspect", "--k", "4,2", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let manifests: Vec<serde_json::Value> = serde_json::Deserializer::from_str(&text)
        .into_iter()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(manifests.len(), 2);
    assert_eq!(manifests[1]["classes_per_client"], 2);
    assert_eq!(manifests[1]["client_classes"].as_array().unwrap().len(), 3);
}

#[test]
fn aggregate_file_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(
        dir.path(),
        "[sweep]\nstrategies = [\"uwa\", \"meta\"]\n[output]\ndump_artifacts = true\n",
    );
    let summary = run(&cfg).unwrap();
    assert!(summary.success(), "{:?}", summary.failures);

    let uwa_dir = dir.path().join("artifacts").join("uwa_k2_seed0");
    let dumps: Vec<_> = (0..3).map(|i| uwa_dir.join(format!("client_{i}.bin"))).collect();
    let densities: Vec<_> = (0..3).map(|i| uwa_dir.join(format!("density_{i}.json"))).collect();
    let logits: Vec<LogitMatrix> = dumps
        .iter()
        .map(|p| LogitMatrix::read_binary(fs::File::open(p).unwrap(), "dump").unwrap())
        .collect();

    let csv_path = dir.path().join("avg.csv");
    let status = bin()
        .args(["aggregate-file", "--strategy", "average", "--logits"])
        .args(&dumps)
        .arg("--out")
        .arg(&csv_path)
        .status()
        .unwrap();
    assert!(status.success());
    let expected = average_logits(&logits).unwrap();
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let header = reader.headers().unwrap().clone();
    assert_eq!(&header[0], "sample");
    assert_eq!(&header[1], "z_0");
    assert_eq!(&header[header.len() - 1], "predicted");
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 120);
    for (i, rec) in records.iter().enumerate() {
        for c in 0..4 {
            assert_eq!(rec[1 + c].parse::<f64>().unwrap(), expected.values.get(i, c));
        }
        assert_eq!(rec[9].parse::<usize>().unwrap(), expected.predicted_classes()[i]);
    }

    let uwa = bin()
        .args(["aggregate-file", "--strategy", "uwa", "--logits"])
        .args(&dumps)
        .arg("--densities")
        .args(&densities)
        .output()
        .unwrap();
    assert!(uwa.status.success(), "{}", String::from_utf8_lossy(&uwa.stderr));
    assert_eq!(String::from_utf8(uwa.stdout).unwrap().lines().count(), 121);

    // two densities for three clients: refused unless renormalization is allowed
    let partial = bin()
        .args(["aggregate-file", "--strategy", "uwa", "--logits"])
        .args(&dumps[..1])
        .arg("--densities")
        .args(&densities[..2])
        .output()
        .unwrap();
    assert_eq!(partial.status.code(), Some(2));
    let allowed = bin()
        .args(["aggregate-file", "--strategy", "uwa", "--allow-missing", "--logits"])
        .args(&dumps[..1])
        .arg("--densities")
        .args(&densities[..2])
        .output()
        .unwrap();
    assert!(allowed.status.success());

    let meta_dir = dir.path().join("artifacts").join("meta_k2_seed0");
    let meta_dumps: Vec<_> = (0..3).map(|i| meta_dir.join(format!("client_{i}.bin"))).collect();
    let meta = bin()
        .args(["aggregate-file", "--strategy", "meta", "--aggregator"])
        .arg(meta_dir.join("meta_aggregator.json"))
        .arg("--logits")
        .args(&meta_dumps)
        .output()
        .unwrap();
    assert!(meta.status.success(), "{}", String::from_utf8_lossy(&meta.stderr));
    let missing_client = bin()
        .args(["aggregate-file", "--strategy", "meta", "--aggregator"])
        .arg(meta_dir.join("meta_aggregator.json"))
        .arg("--logits")
        .args(&meta_dumps[..2])
        .output()
        .unwrap();
    assert_eq!(missing_client.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing_client.stderr).contains("retrained"));
}
