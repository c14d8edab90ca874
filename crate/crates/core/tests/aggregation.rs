use std::collections::BTreeMap;

use fedlogit::aggregation::{
    average_logits, client_weights, confidence_score, fit_logit_density, meta_aggregate, train_meta_aggregator,
    uwa_aggregate, uwa_aggregate_with, GaussianMixtureDensity, LogitMatrix, MetaAggregator, MetaTrainConfig,
    MissingClients, Strategy, VARIANCE_FLOOR,
};
use fedlogit::nn::{Activation, Matrix, Model};
use fedlogit::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn lm(id: usize, rows: &[&[f64]]) -> LogitMatrix {
    LogitMatrix::new(id, Matrix::from_rows(rows).unwrap()).unwrap()
}

fn random_logits(rng: &mut ChaCha8Rng, id: usize, n: usize, c: usize, scale: f64) -> LogitMatrix {
    let data = (0..n * c).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    LogitMatrix::new(id, Matrix::from_vec(n, c, data).unwrap()).unwrap()
}

fn random_density(rng: &mut ChaCha8Rng, k: usize, c: usize) -> GaussianMixtureDensity {
    let means = (0..k * c).map(|_| rng.random_range(-2.0..2.0)).collect();
    let vars = (0..k * c).map(|_| rng.random_range(0.3..2.0)).collect();
    GaussianMixtureDensity::from_parameters(
        (0..k).collect(),
        Matrix::from_vec(k, c, means).unwrap(),
        Matrix::from_vec(k, c, vars).unwrap(),
    )
    .unwrap()
}

/// Mixture density evaluated directly in linear space, then logged.
fn brute_force_log_density(d: &GaussianMixtureDensity, f: &[f64]) -> f64 {
    let mut total = 0.0;
    for k in 0..d.components() {
        let mut p = 1.0;
        for (j, x) in f.iter().enumerate() {
            let (m, v) = (d.means().get(k, j), d.variances().get(k, j));
            p *= (-(x - m) * (x - m) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        }
        total += p;
    }
    (total / d.components() as f64).ln()
}

#[test]
fn average_of_one_client_is_that_client() {
    let a = lm(4, &[&[1.5, -2.0, 0.25], &[0.0, 3.0, -1.0]]);
    let t = average_logits(std::slice::from_ref(&a)).unwrap();
    assert_eq!(t.values, a.values);
    assert_eq!(t.strategy, Strategy::Average);
    assert!(t.weights.is_none());
}

#[test]
fn average_of_mirrored_pair_is_flat() {
    let t = average_logits(&[lm(0, &[&[0.0, 2.0]]), lm(1, &[&[2.0, 0.0]])]).unwrap();
    assert_eq!(t.values.row(0), &[1.0, 1.0]);
    assert_eq!(t.soft_labels.row(0), &[0.5, 0.5]);
}

#[test]
fn average_matches_scalar_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let clients: Vec<_> = (0..3).map(|i| random_logits(&mut rng, i, 20, 6, 3.0)).collect();
    let t = average_logits(&clients).unwrap();
    for x in 0..20 {
        for c in 0..6 {
            let mut s = 0.0;
            for l in &clients {
                s += l.values.get(x, c);
            }
            assert!((t.values.get(x, c) - s / 3.0).abs() < 1e-12);
        }
    }
}

#[test]
fn aggregation_rejects_bad_batches() {
    assert!(matches!(average_logits(&[]), Err(Error::Input(_))));
    let a = lm(0, &[&[1.0, 2.0]]);
    let b = lm(1, &[&[1.0, 2.0, 3.0]]);
    assert!(average_logits(&[a.clone(), b]).is_err());
    assert!(average_logits(&[a.clone(), a]).is_err());
}

#[test]
fn density_of_constant_logits_hits_the_floor() {
    let logits = Matrix::from_rows(&[[3.0, -1.0], [3.0, -1.0], [3.0, -1.0]]).unwrap();
    let d = fit_logit_density(&logits, &[2, 2, 2], &[2]).unwrap();
    assert_eq!(d.means().row(0), &[3.0, -1.0]);
    assert_eq!(d.variances().row(0), &[VARIANCE_FLOOR, VARIANCE_FLOOR]);
    assert!(confidence_score(&d, &[3.0, -1.0]).is_finite());
}

#[test]
fn density_fit_uses_unbiased_moments() {
    let logits = Matrix::from_rows(&[[0.0, 0.0], [2.0, 2.0]]).unwrap();
    let d = fit_logit_density(&logits, &[5, 5], &[5]).unwrap();
    assert_eq!(d.means().row(0), &[1.0, 1.0]);
    // deviations ±1 per dimension, divided by n − 1 = 1
    assert_eq!(d.variances().row(0), &[2.0, 2.0]);
    assert_eq!(d.classes(), &[5]);

    let logits = Matrix::from_rows(&[[1.0], [2.0], [6.0]]).unwrap();
    let d = fit_logit_density(&logits, &[0, 0, 0], &[0]).unwrap();
    assert_eq!(d.means().row(0), &[3.0]);
    assert_eq!(d.variances().row(0), &[7.0]);
}

#[test]
fn two_class_fixture_gets_separate_components() {
    let logits = Matrix::from_rows(&[[5.0, 0.0], [5.2, 0.1], [4.8, -0.1], [0.0, 5.0], [0.2, 5.1], [-0.2, 4.9]]).unwrap();
    let d = fit_logit_density(&logits, &[1, 1, 1, 3, 3, 3], &[3, 1]).unwrap();
    assert_eq!(d.classes(), &[1, 3]);
    assert!((d.means().get(0, 0) - 5.0).abs() < 1e-12 && d.means().get(0, 1).abs() < 1e-12);
    assert!(d.means().get(1, 0).abs() < 1e-12 && (d.means().get(1, 1) - 5.0).abs() < 1e-12);
    assert!(confidence_score(&d, &[5.0, 0.0]) > confidence_score(&d, &[2.5, 2.5]));
}

#[test]
fn density_fit_errors_name_the_class() {
    let logits = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
    match fit_logit_density(&logits, &[0, 0, 1], &[0, 1]) {
        Err(Error::Fit { class, .. }) => assert_eq!(class, 1),
        other => panic!("unexpected {other:?}"),
    }
    assert!(fit_logit_density(&logits, &[0, 0, 7], &[0, 1]).is_err());
    assert!(fit_logit_density(&logits, &[0, 0], &[0]).is_err());
}

#[test]
fn standard_normal_confidence_values() {
    let d = GaussianMixtureDensity::from_parameters(
        vec![0],
        Matrix::from_rows(&[[0.0]]).unwrap(),
        Matrix::from_rows(&[[1.0]]).unwrap(),
    )
    .unwrap();
    let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    assert!((confidence_score(&d, &[0.0]) + half_ln_2pi).abs() < 1e-12);
    assert!((confidence_score(&d, &[1.0]) + half_ln_2pi + 0.5).abs() < 1e-12);
    assert!((confidence_score(&d, &[0.0]) + 0.91894).abs() < 1e-5);
    assert!((confidence_score(&d, &[1.0]) + 1.41894).abs() < 1e-5);
}

#[test]
fn mixture_confidence_matches_linear_space_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let d = random_density(&mut rng, 2, 3);
        let f: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        assert!((confidence_score(&d, &f) - brute_force_log_density(&d, &f)).abs() < 1e-10);
    }
}

#[test]
fn density_json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = random_density(&mut rng, 3, 4);
    let back = GaussianMixtureDensity::from_json(&d.to_json().unwrap()).unwrap();
    assert_eq!(back, d);
    let f = [0.1, 0.2, -0.3, 1.0];
    assert_eq!(confidence_score(&back, &f), confidence_score(&d, &f));
}

/// One-component density centered exactly on `f`, so ℓ(f) only depends on the variance.
fn centered(f: &[f64], var: f64) -> GaussianMixtureDensity {
    GaussianMixtureDensity::from_parameters(
        vec![0],
        Matrix::from_rows(&[f]).unwrap(),
        Matrix::from_vec(1, f.len(), vec![var; f.len()]).unwrap(),
    )
    .unwrap()
}

#[test]
fn equal_confidence_reduces_to_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let clients: Vec<_> = (0..4).map(|i| random_logits(&mut rng, i, 1, 5, 2.0)).collect();
    let densities: BTreeMap<_, _> = clients.iter().map(|l| (l.client_id, centered(l.values.row(0), 0.7))).collect();
    let uwa = uwa_aggregate(&clients, &densities).unwrap();
    let avg = average_logits(&clients).unwrap();
    for (a, b) in uwa.values.as_slice().iter().zip(avg.values.as_slice()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(uwa.weights.unwrap().as_slice().iter().all(|w| (w - 0.25).abs() < 1e-15));
}

#[test]
fn far_more_confident_client_dominates() {
    // Both densities are centered on their client's logits. Client 1's
    // variance is chosen so that ℓ₁ exceeds ℓ₂ by exactly 20 nats.
    let f1 = [3.0, -1.0];
    let f2 = [-2.0, 4.0];
    let var1 = 1e-3;
    let var2 = var1 * 20.0f64.exp();
    let clients = [lm(0, &[&f1]), lm(1, &[&f2])];
    let densities = BTreeMap::from([(0, centered(&f1, var1)), (1, centered(&f2, var2))]);
    let l1 = confidence_score(&densities[&0], &f1);
    let l2 = confidence_score(&densities[&1], &f2);
    assert!((l1 - l2 - 20.0).abs() < 1e-9);
    let t = uwa_aggregate(&clients, &densities).unwrap();
    let w = t.weights.as_ref().unwrap();
    assert!(w.get(0, 0) > 0.9999);
    for (z, f) in t.values.row(0).iter().zip(&f1) {
        assert!((z - f).abs() < 1e-3);
    }
}

#[test]
fn three_clients_match_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let clients: Vec<_> = (0..3).map(|i| random_logits(&mut rng, i * 10, 15, 3, 1.0)).collect();
    let densities: BTreeMap<_, _> = clients.iter().map(|l| (l.client_id, random_density(&mut rng, 2, 3))).collect();
    let t = uwa_aggregate(&clients, &densities).unwrap();
    for x in 0..15 {
        let scores: Vec<f64> =
            clients.iter().map(|l| brute_force_log_density(&densities[&l.client_id], l.values.row(x))).collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = e.iter().sum();
        for c in 0..3 {
            let mut z = 0.0;
            for (i, l) in clients.iter().enumerate() {
                z += e[i] / total * l.values.get(x, c);
            }
            assert!((t.values.get(x, c) - z).abs() < 1e-12, "sample {x} class {c}");
        }
    }
}

#[test]
fn missing_clients_policy() {
    let a = lm(0, &[&[1.0, 0.0]]);
    let b = lm(1, &[&[0.0, 1.0]]);
    let densities = BTreeMap::from([(0, centered(&[1.0, 0.0], 1.0)), (1, centered(&[0.0, 1.0], 1.0))]);
    assert!(uwa_aggregate(std::slice::from_ref(&a), &densities).is_err());
    let t = uwa_aggregate_with(std::slice::from_ref(&a), &densities, MissingClients::Renormalize).unwrap();
    assert_eq!(t.values, a.values);
    let only_a = BTreeMap::from([(0, centered(&[1.0, 0.0], 1.0))]);
    assert!(uwa_aggregate(&[a, b], &only_a).is_err());
}

#[test]
fn single_client_uwa_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = random_logits(&mut rng, 2, 30, 4, 5.0);
    let densities = BTreeMap::from([(2, random_density(&mut rng, 2, 4))]);
    let t = uwa_aggregate(std::slice::from_ref(&a), &densities).unwrap();
    assert_eq!(t.values, a.values);
}

#[test]
fn temperature_softens_targets() {
    let t = average_logits(&[lm(0, &[&[2.0, 0.0]])]).unwrap();
    let sharp = t.soft_labels.get(0, 0);
    let soft = t.clone().with_temperature(4.0).unwrap().soft_labels.get(0, 0);
    assert!(soft < sharp && soft > 0.5);
    assert!(t.clone().with_temperature(0.0).is_err());
    assert_eq!(t.predicted_classes(), vec![0]);
}

/// Client 0 knows the label; the others emit loud noise.
fn reliable_fixture(seed: u64, n: usize, classes: usize) -> (Vec<LogitMatrix>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
    let mut good = Matrix::zeros(n, classes);
    for (x, &y) in labels.iter().enumerate() {
        for c in 0..classes {
            let signal = if c == y { 3.0 } else { 0.0 };
            good.set(x, c, signal + 0.5 * rng.sample::<f64, _>(StandardNormal));
        }
    }
    let mut clients = vec![LogitMatrix::new(0, good).unwrap()];
    clients.push(random_logits(&mut rng, 1, n, classes, 8.0));
    clients.push(random_logits(&mut rng, 2, n, classes, 8.0));
    (clients, labels)
}

fn hit_rate(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / pred.len() as f64
}

#[test]
fn meta_aggregator_learns_to_trust_the_reliable_client() {
    let (train, labels) = reliable_fixture(7, 600, 4);
    let (test, test_labels) = reliable_fixture(8, 400, 4);
    let cfg = MetaTrainConfig { epochs: 60, ..MetaTrainConfig::default() };
    let agg = train_meta_aggregator(&train, &labels, 4, &cfg).unwrap();
    let meta = meta_aggregate(&agg, &test).unwrap().predicted_classes();
    let avg = average_logits(&test).unwrap().predicted_classes();
    let reliable = test[0].values.argmax_rows();
    assert!(hit_rate(&meta, &test_labels) > hit_rate(&avg, &test_labels) + 0.2);
    assert!(hit_rate(&meta, &reliable) >= 0.9);
}

#[test]
fn meta_training_is_deterministic() {
    let (train, labels) = reliable_fixture(9, 200, 3);
    let cfg = MetaTrainConfig { epochs: 5, seed: 3, ..MetaTrainConfig::default() };
    let a = train_meta_aggregator(&train, &labels, 3, &cfg).unwrap();
    let b = train_meta_aggregator(&train, &labels, 3, &cfg).unwrap();
    assert_eq!(a.model, b.model);
    let c = train_meta_aggregator(&train, &labels, 3, &MetaTrainConfig { seed: 4, ..cfg }).unwrap();
    assert_ne!(a.model, c.model);
}

#[test]
fn untrained_meta_aggregator_is_near_chance() {
    let classes = 4;
    let (test, labels) = reliable_fixture(10, 500, classes);
    let cfg = MetaTrainConfig { epochs: 0, ..MetaTrainConfig::default() };
    let mean: f64 = (0..20)
        .map(|s| {
            let agg = train_meta_aggregator(&test, &labels, classes, &MetaTrainConfig { seed: s, ..cfg.clone() }).unwrap();
            hit_rate(&meta_aggregate(&agg, &test).unwrap().predicted_classes(), &labels)
        })
        .sum::<f64>()
        / 20.0;
    assert!((mean - 1.0 / classes as f64).abs() < 0.1, "mean accuracy {mean}");
}

#[test]
fn zero_aggregator_gives_uniform_soft_labels() {
    let model = Model::zeros(&[6, 5, 3], Activation::Relu).unwrap();
    let agg = MetaAggregator::from_model(model, vec![0, 1], 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let logits = [random_logits(&mut rng, 0, 10, 3, 4.0), random_logits(&mut rng, 1, 10, 3, 4.0)];
    let t = meta_aggregate(&agg, &logits).unwrap();
    for v in t.soft_labels.as_slice() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn meta_client_mismatch_requires_retraining() {
    let (train, labels) = reliable_fixture(12, 100, 3);
    let agg = train_meta_aggregator(&train, &labels, 3, &MetaTrainConfig { epochs: 1, ..Default::default() }).unwrap();
    match meta_aggregate(&agg, &train[..2]) {
        Err(Error::Config(msg)) => assert!(msg.contains("retrained")),
        other => panic!("unexpected {other:?}"),
    }
    let back = MetaAggregator::from_json(&agg.to_json().unwrap()).unwrap();
    assert_eq!(back.model, agg.model);
    assert_eq!(back.client_order, vec![0, 1, 2]);
}

#[test]
fn logit_dump_round_trip_and_corruption() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let l = random_logits(&mut rng, 7, 5, 3, 2.0);
    assert_eq!(l.payload_bytes(), 5 * 3 * 8);
    let mut buf = Vec::new();
    l.write_binary(&mut buf).unwrap();
    assert_eq!(LogitMatrix::read_binary(buf.as_slice(), "mem").unwrap(), l);
    assert!(matches!(
        LogitMatrix::read_binary(&buf[..buf.len() - 1], "mem"),
        Err(Error::Format { .. })
    ));
    let mut csv = Vec::new();
    l.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("sample,logit_0,logit_1,logit_2\n"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn strategy_names() {
    for s in Strategy::ALL {
        assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
    }
    assert_eq!("MM".parse::<Strategy>().unwrap(), Strategy::Meta);
    assert_eq!("avg".parse::<Strategy>().unwrap(), Strategy::Average);
    assert!("median".parse::<Strategy>().is_err());
    assert_eq!(format!("{:<8}|", Strategy::Uwa), "uwa     |");
}

proptest! {
    #[test]
    fn weights_are_a_distribution(seed in 0u64..10_000, m in 1usize..6, c in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clients: Vec<_> = (0..m).map(|i| random_logits(&mut rng, i, 4, c, 3.0)).collect();
        let densities: BTreeMap<_, _> = (0..m).map(|i| (i, random_density(&mut rng, 2, c))).collect();
        let w = client_weights(&clients, &densities).unwrap();
        for row in w.iter_rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(row.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn weights_are_translation_invariant(seed in 0u64..10_000, shift in -5.0f64..5.0) {
        // moving every logit and every density mean by the same vector changes nothing
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = 3;
        let clients: Vec<_> = (0..3).map(|i| random_logits(&mut rng, i, 4, c, 1.0)).collect();
        let densities: BTreeMap<_, _> = (0..3).map(|i| (i, random_density(&mut rng, 2, c))).collect();
        let moved_clients: Vec<_> = clients
            .iter()
            .map(|l| {
                let mut v = l.values.clone();
                v.map_inplace(|x| x + shift);
                LogitMatrix::new(l.client_id, v).unwrap()
            })
            .collect();
        let moved: BTreeMap<_, _> = densities
            .iter()
            .map(|(&i, d)| {
                let mut means = d.means().clone();
                means.map_inplace(|x| x + shift);
                (i, GaussianMixtureDensity::from_parameters(d.classes().to_vec(), means, d.variances().clone()).unwrap())
            })
            .collect();
        let a = client_weights(&clients, &densities).unwrap();
        let b = client_weights(&moved_clients, &moved).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn confidence_falls_along_rays_from_the_mean(seed in 0u64..10_000, t1 in 0.0f64..3.0, dt in 0.01f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_density(&mut rng, 1, 3);
        let dir: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        prop_assume!(dir.iter().map(|v| v * v).sum::<f64>() > 1e-3);
        let at = |t: f64| -> Vec<f64> { (0..3).map(|j| d.means().get(0, j) + t * dir[j]).collect() };
        prop_assert!(confidence_score(&d, &at(t1)) > confidence_score(&d, &at(t1 + dt)));
    }

    #[test]
    fn off_support_client_is_down_weighted(seed in 0u64..10_000, offset in 3.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let g: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let far: Vec<f64> = g.iter().map(|v| v + offset).collect();
        let clients = [lm(0, &[&f]), lm(1, &[&g])];
        let densities = BTreeMap::from([(0, centered(&f, 1.0)), (1, centered(&far, 1.0))]);
        let w = client_weights(&clients, &densities).unwrap();
        prop_assert!(w.get(0, 0) > w.get(0, 1));
    }
}
