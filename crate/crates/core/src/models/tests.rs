use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Normal;

use super::*;
use crate::data::{DataShard, DeviceId};
use crate::rng::Purpose;

fn random_shard(n: usize, d: usize, k: usize, seed: u64) -> DataShard {
    let mut g = StreamRng::new(seed).derive(Purpose::Fixture, 0, 0).generator();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let features = (0..n * d).map(|_| normal.sample(&mut g)).collect();
    let labels = (0..n).map(|_| g.random_range(0..k)).collect();
    DataShard::new(DeviceId(0), d, features, labels).unwrap()
}

fn all_rows(shard: &DataShard) -> Vec<usize> {
    (0..shard.len()).collect()
}

fn random_params(spec: &ModelSpec, std: f64, seed: u64) -> ParamVector {
    let mut g = StreamRng::new(seed).derive(Purpose::Fixture, 1, 0).generator();
    let normal = Normal::new(0.0, std).unwrap();
    let layout = Arc::new(spec.layout());
    let values = (0..layout.total_len()).map(|_| normal.sample(&mut g)).collect();
    ParamVector::new(layout, values).unwrap()
}

/// Central differences, one coordinate at a time.
fn finite_difference(spec: &ModelSpec, params: &ParamVector, rows: Rows<'_>, h: f64) -> Vec<f64> {
    (0..params.len())
        .map(|i| {
            let mut plus = params.values().to_vec();
            let mut minus = params.values().to_vec();
            plus[i] += h;
            minus[i] -= h;
            let lp = loss(spec, &params.with_values(plus).unwrap(), rows).unwrap();
            let lm = loss(spec, &params.with_values(minus).unwrap(), rows).unwrap();
            (lp - lm) / (2.0 * h)
        })
        .collect()
}

pub(crate) fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-7))
        .fold(0.0, f64::max)
}

#[test]
fn parameter_counts() {
    assert_eq!(ModelSpec::softmax(60, 10).param_count(), 610);
    assert_eq!(ModelSpec::mlp(784, 10, 64).param_count(), 64 * 784 + 64 + 10 * 64 + 10);
    for spec in [ModelSpec::softmax(7, 3), ModelSpec::mlp(7, 3, 5)] {
        assert_eq!(spec.layout().total_len(), spec.param_count());
    }
}

#[test]
fn zero_params_give_log_k() {
    let shard = random_shard(13, 4, 5, 1);
    let idx = all_rows(&shard);
    let spec = ModelSpec::softmax(4, 5);
    let zero = ParamVector::zeros(Arc::new(spec.layout()));
    let l = loss(&spec, &zero, Rows::new(&shard, &idx)).unwrap();
    assert!((l - 5f64.ln()).abs() < 1e-12);
}

#[test]
fn confident_correct_logits_drive_loss_to_zero() {
    let shard = DataShard::new(DeviceId(0), 1, vec![1.0], vec![2]).unwrap();
    let spec = ModelSpec::softmax(1, 3);
    let params = ParamVector::new(Arc::new(spec.layout()), vec![0.0, 0.0, 50.0, 0.0, 0.0, 0.0]).unwrap();
    let l = loss(&spec, &params, Rows::new(&shard, &[0])).unwrap();
    assert!(l < 1e-20, "{l}");
}

#[test]
fn pooled_loss_is_quantity_weighted_mean() {
    let spec = ModelSpec::softmax(4, 3);
    let params = random_params(&spec, 0.7, 2);
    let a = random_shard(7, 4, 3, 10);
    let b = random_shard(19, 4, 3, 11);
    let la = loss(&spec, &params, Rows::new(&a, &all_rows(&a))).unwrap();
    let lb = loss(&spec, &params, Rows::new(&b, &all_rows(&b))).unwrap();

    let mut features = a.features().to_vec();
    features.extend_from_slice(b.features());
    let mut labels = a.labels().to_vec();
    labels.extend_from_slice(b.labels());
    let pooled = DataShard::new(DeviceId(0), 4, features, labels).unwrap();
    let lp = loss(&spec, &params, Rows::new(&pooled, &all_rows(&pooled))).unwrap();
    let expected = (7.0 * la + 19.0 * lb) / 26.0;
    assert!((lp - expected).abs() < 1e-12, "{lp} vs {expected}");
}

#[test]
fn gradient_matches_central_differences() {
    for seed in 0..5 {
        for spec in [ModelSpec::softmax(4, 3), ModelSpec::mlp(4, 3, 6)] {
            let shard = random_shard(8, 4, 3, 100 + seed);
            let idx = all_rows(&shard);
            let rows = Rows::new(&shard, &idx);
            let params = random_params(&spec, 0.5, 200 + seed);
            let analytic = gradient(&spec, &params, rows).unwrap();
            let numeric = finite_difference(&spec, &params, rows, 1e-5);
            let err = max_relative_error(analytic.values(), &numeric);
            assert!(err < 1e-6, "{:?} seed {seed}: {err}", spec.kind);
        }
    }
}

#[test]
fn gradient_vanishes_at_the_optimum_of_a_two_point_problem() {
    // Same features, opposite labels: the optimum is p = (1/2, 1/2).
    let shard = DataShard::new(DeviceId(0), 2, vec![1.0, -0.5, 1.0, -0.5], vec![0, 1]).unwrap();
    let idx = [0, 1];
    let spec = ModelSpec::softmax(2, 2);
    let mut params = random_params(&spec, 1.0, 9);
    for _ in 0..2000 {
        let g = gradient(&spec, &params, Rows::new(&shard, &idx)).unwrap();
        let next: Vec<f64> = params
            .values()
            .iter()
            .zip(g.values())
            .map(|(p, g)| p - 0.5 * g)
            .collect();
        params = params.with_values(next).unwrap();
    }
    let g = gradient(&spec, &params, Rows::new(&shard, &idx)).unwrap();
    let norm = g.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm < 1e-8, "{norm}");
}

#[test]
fn duplicated_rows_leave_mean_gradient_unchanged() {
    let spec = ModelSpec::mlp(3, 4, 5);
    let shard = random_shard(9, 3, 4, 7);
    let params = random_params(&spec, 0.5, 8);
    let once = all_rows(&shard);
    let twice: Vec<usize> = once.iter().chain(&once).copied().collect();
    let g1 = gradient(&spec, &params, Rows::new(&shard, &once)).unwrap();
    let g2 = gradient(&spec, &params, Rows::new(&shard, &twice)).unwrap();
    assert!(g1.max_abs_diff(&g2) < 1e-14);
}

#[test]
fn layout_mismatch_is_rejected() {
    let shard = random_shard(3, 4, 3, 1);
    let idx = all_rows(&shard);
    let soft = ModelSpec::softmax(4, 3);
    let mlp_params = ModelSpec::mlp(4, 3, 2).init(&StreamRng::new(1));
    assert!(matches!(
        loss(&soft, &mlp_params, Rows::new(&shard, &idx)),
        Err(Error::Layout(_))
    ));
    assert!(matches!(
        gradient(&soft, &mlp_params, Rows::new(&shard, &idx)),
        Err(Error::Layout(_))
    ));
}

#[test]
fn init_has_small_weights_and_zero_bias() {
    let spec = ModelSpec::mlp(20, 4, 8);
    let p = spec.init(&StreamRng::new(3));
    assert!(p.segment("hidden.bias").unwrap().iter().all(|&b| b == 0.0));
    assert!(p.segment("output.bias").unwrap().iter().all(|&b| b == 0.0));
    let w = p.segment("hidden.weight").unwrap();
    let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
    assert!((var.sqrt() - INIT_STD).abs() < 0.2 * INIT_STD);
    assert_eq!(p, spec.init(&StreamRng::new(3)));
}

#[test]
fn zero_epochs_is_identity() {
    let spec = ModelSpec::softmax(4, 3);
    let shard = random_shard(10, 4, 3, 1);
    let idx = all_rows(&shard);
    let p = random_params(&spec, 0.3, 1);
    let cfg = SgdConfig {
        epochs: 0,
        ..SgdConfig::default()
    };
    let out = local_train(&spec, &p, Rows::new(&shard, &idx), &cfg, &StreamRng::new(1)).unwrap();
    assert_eq!(out, p);
}

#[test]
fn full_batch_small_step_never_increases_loss() {
    let spec = ModelSpec::softmax(5, 4);
    let shard = random_shard(40, 5, 4, 3);
    let idx = all_rows(&shard);
    let rows = Rows::new(&shard, &idx);
    let cfg = SgdConfig {
        learning_rate: 0.05,
        batch_size: 40,
        epochs: 1,
    };
    let mut p = spec.init(&StreamRng::new(2));
    let mut prev = loss(&spec, &p, rows).unwrap();
    for epoch in 0..50 {
        p = local_train(&spec, &p, rows, &cfg, &StreamRng::new(epoch)).unwrap();
        let l = loss(&spec, &p, rows).unwrap();
        assert!(l <= prev, "epoch {epoch}: {l} > {prev}");
        prev = l;
    }
}

#[test]
fn training_is_deterministic_and_seed_sensitive() {
    let spec = ModelSpec::mlp(4, 3, 6);
    let shard = random_shard(37, 4, 3, 4);
    let idx = all_rows(&shard);
    let p = spec.init(&StreamRng::new(2));
    let cfg = SgdConfig {
        learning_rate: 0.1,
        batch_size: 10,
        epochs: 3,
    };
    let a = local_train(&spec, &p, Rows::new(&shard, &idx), &cfg, &StreamRng::new(5)).unwrap();
    let b = local_train(&spec, &p, Rows::new(&shard, &idx), &cfg, &StreamRng::new(5)).unwrap();
    let c = local_train(&spec, &p, Rows::new(&shard, &idx), &cfg, &StreamRng::new(6)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn vanishing_step_barely_moves() {
    let spec = ModelSpec::softmax(4, 3);
    let shard = random_shard(25, 4, 3, 4);
    let idx = all_rows(&shard);
    let p = random_params(&spec, 0.3, 3);
    let cfg = SgdConfig {
        learning_rate: 1e-9,
        batch_size: 10,
        epochs: 20,
    };
    let out = local_train(&spec, &p, Rows::new(&shard, &idx), &cfg, &StreamRng::new(5)).unwrap();
    assert!(out.max_abs_diff(&p) < 1e-6);
}

#[test]
fn empty_train_split_is_configuration_error() {
    let spec = ModelSpec::softmax(4, 3);
    let shard = random_shard(3, 4, 3, 4);
    let p = spec.init(&StreamRng::new(1));
    let r = local_train(
        &spec,
        &p,
        Rows::new(&shard, &[]),
        &SgdConfig::default(),
        &StreamRng::new(1),
    );
    assert!(matches!(r, Err(Error::Config(_))));
    assert!(matches!(
        evaluate(&spec, &p, Rows::new(&shard, &[])),
        Err(Error::Config(_))
    ));
}

#[test]
fn random_params_score_near_chance() {
    // 1000 rows, balanced over 10 classes
    let (d, k) = (8, 10);
    let mut g = StreamRng::new(77).generator();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let features = (0..1000 * d).map(|_| normal.sample(&mut g)).collect();
    let labels = (0..1000).map(|i| i % k).collect();
    let shard = DataShard::new(DeviceId(0), d, features, labels).unwrap();
    let idx = all_rows(&shard);
    let spec = ModelSpec::softmax(d, k);
    let acc = evaluate(&spec, &random_params(&spec, 1.0, 12), Rows::new(&shard, &idx)).unwrap();
    assert!((acc - 0.1).abs() < 0.05, "{acc}");
}

#[test]
fn perfect_and_constant_classifiers() {
    // one-hot features: weight = identity reproduces the labels
    let k = 4;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for i in 0..20 {
        let y = (i * 7) % k;
        let mut x = vec![0.0; k];
        x[y] = 1.0;
        features.extend(x);
        labels.push(y);
    }
    let shard = DataShard::new(DeviceId(0), k, features, labels.clone()).unwrap();
    let idx = all_rows(&shard);
    let spec = ModelSpec::softmax(k, k);
    let mut values = vec![0.0; k * k + k];
    for c in 0..k {
        values[c * k + c] = 1.0;
    }
    let perfect = ParamVector::new(Arc::new(spec.layout()), values).unwrap();
    assert_eq!(evaluate(&spec, &perfect, Rows::new(&shard, &idx)).unwrap(), 1.0);

    let constant = ParamVector::new(Arc::new(spec.layout()), vec![0.0; k * k + k]).unwrap();
    let freq0 = labels.iter().filter(|&&y| y == 0).count() as f64 / labels.len() as f64;
    assert_eq!(evaluate(&spec, &constant, Rows::new(&shard, &idx)).unwrap(), freq0);
}

#[test]
fn accuracy_invariant_to_positive_logit_scaling() {
    let spec = ModelSpec::softmax(5, 4);
    let shard = random_shard(200, 5, 4, 21);
    let idx = all_rows(&shard);
    let p = random_params(&spec, 1.0, 22);
    let base = evaluate(&spec, &p, Rows::new(&shard, &idx)).unwrap();
    for c in [0.001, 0.5, 3.0, 1e4] {
        let scaled = p.with_values(p.values().iter().map(|v| v * c).collect()).unwrap();
        assert_eq!(evaluate(&spec, &scaled, Rows::new(&shard, &idx)).unwrap(), base);
    }
}
