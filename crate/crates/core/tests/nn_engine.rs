use hybnet::nn::gradcheck::{
    batchnorm_gradient_check, conv_gradient_check, dense_gradient_check, network_gradient_check,
    relu_pool_gradient_check, softmax_xent_gradient_check,
};
use hybnet::nn::{self, LabeledSet, LayerSpec, Network, NetworkSpec, Shape3, Tensor, TrainingConfig};
use hybnet::rng;
use rand::Rng;
use rand_distr::StandardNormal;

const TOL: f64 = 1e-4;

fn random_spec(r: &mut impl Rng) -> (NetworkSpec, usize) {
    let h = 2 * r.random_range(2..=5);
    let w = r.random_range(1..=3);
    let c = r.random_range(1..=2);
    let mut layers = Vec::new();
    for _ in 0..r.random_range(1..=2) {
        layers.push(LayerSpec::Conv {
            filters: r.random_range(1..=3),
            kh: r.random_range(1..=5),
            kw: r.random_range(1..=w.min(3)),
        });
        layers.push(LayerSpec::BatchNorm);
        layers.push(LayerSpec::Relu);
    }
    layers.push(LayerSpec::MaxPool { ph: 2, pw: 1 });
    layers.push(LayerSpec::Dropout { rate: 0.3 });
    layers.push(LayerSpec::Dense { units: r.random_range(2..=4) });
    layers.push(LayerSpec::Softmax);
    (NetworkSpec::new(Shape3::new(h, w, c), layers).unwrap(), r.random_range(2..=5))
}

#[test]
fn whole_network_gradients_match_finite_differences() {
    let mut r = rng::seeded(2024);
    for case in 0..24 {
        let (spec, batch) = random_spec(&mut r);
        let check = network_gradient_check(&spec, batch, 100 + case).unwrap();
        assert!(
            check.max_rel_error < TOL,
            "case {case} {:?} batch {batch}: {}",
            spec.layers,
            check.max_rel_error
        );
        assert!(check.checked > 0);
    }
}

#[test]
fn layer_gradients_match_finite_differences() {
    let mut r = rng::seeded(7);
    for case in 0..8u64 {
        let shape = [
            r.random_range(1..=3),
            2 * r.random_range(1..=4),
            r.random_range(1..=3),
            r.random_range(1..=3),
        ];
        let kh = r.random_range(1..=5);
        let kw = r.random_range(1..=3);
        let filters = r.random_range(1..=3);
        let checks = [
            ("conv", conv_gradient_check(shape, kh, kw, filters, case).unwrap()),
            ("batchnorm", batchnorm_gradient_check([shape[0] + 1, shape[1], shape[2], shape[3]], case).unwrap()),
            ("dense", dense_gradient_check(shape, filters + 1, case).unwrap()),
            ("relu+pool", relu_pool_gradient_check(shape, 2, 1, case).unwrap()),
            ("softmax", softmax_xent_gradient_check(shape[0] + 1, filters + 1, case).unwrap()),
        ];
        for (name, c) in checks {
            assert!(c.max_rel_error < TOL, "{name} case {case} shape {shape:?}: {}", c.max_rel_error);
        }
    }
}

fn blobs(n: usize, seed: u64) -> LabeledSet {
    let mut r = rng::seeded(seed);
    let mut data = Vec::with_capacity(n * 8);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let centre = if label == 0 { -1.0 } else { 1.0 };
        for k in 0..8 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            data.push((sign * centre + 0.4 * r.sample::<f64, _>(StandardNormal)) as f32);
        }
        labels.push(label);
    }
    LabeledSet::new(Tensor::new(vec![n, 8, 1, 1], data).unwrap(), labels).unwrap()
}

fn toy_spec() -> NetworkSpec {
    NetworkSpec::new(
        Shape3::new(8, 1, 1),
        vec![
            LayerSpec::Conv { filters: 4, kh: 3, kw: 1 },
            LayerSpec::BatchNorm,
            LayerSpec::Relu,
            LayerSpec::MaxPool { ph: 2, pw: 1 },
            LayerSpec::Dropout { rate: 0.2 },
            LayerSpec::Dense { units: 2 },
            LayerSpec::Softmax,
        ],
    )
    .unwrap()
}

#[test]
fn separable_toy_problem_is_learned() {
    let train_set = blobs(512, 1);
    let val = blobs(256, 2);
    let cfg = TrainingConfig {
        epochs: 12,
        minibatch: 32,
        lr_initial: 0.05,
        ..TrainingConfig::default()
    };
    let out = nn::train(&toy_spec(), &train_set, Some(&val), &cfg).unwrap();
    assert_eq!(out.history.len(), 12);
    let first = out.history.first().unwrap().mean_loss;
    let last = out.history.last().unwrap().mean_loss;
    assert!(last < first, "loss {first} -> {last}");
    assert!(val.accuracy(&out.network).unwrap() >= 0.99);
    assert!(out.network.has_running_stats());
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let data = blobs(128, 3);
    let cfg = TrainingConfig {
        epochs: 2,
        minibatch: 16,
        rng_seed: 9,
        ..TrainingConfig::default()
    };
    let a = nn::train(&toy_spec(), &data, None, &cfg).unwrap();
    let b = nn::train(&toy_spec(), &data, None, &cfg).unwrap();
    assert_eq!(a.network, b.network);
    assert_eq!(a.history, b.history);
    let c = nn::train(&toy_spec(), &data, None, &TrainingConfig { rng_seed: 10, ..cfg }).unwrap();
    assert_ne!(a.network, c.network);
}

#[test]
fn learning_rate_schedule_steps_every_forty_epochs() {
    let cfg = TrainingConfig::with_lr(0.0056);
    assert_eq!(cfg.lr_at_epoch(1), 0.0056);
    assert_eq!(cfg.lr_at_epoch(40), 0.0056);
    assert!((cfg.lr_at_epoch(41) - 0.00056).abs() < 1e-12);
    assert!((cfg.lr_at_epoch(60) - 0.00056).abs() < 1e-12);
}

#[test]
fn diverging_training_reports_epoch() {
    let data = blobs(64, 4);
    let cfg = TrainingConfig {
        epochs: 5,
        minibatch: 16,
        lr_initial: 1e30,
        ..TrainingConfig::default()
    };
    match nn::train(&toy_spec(), &data, None, &cfg) {
        Err(hybnet::Error::Diverged { epoch }) => assert!(epoch >= 1),
        Ok(_) => panic!("expected divergence"),
        Err(e) => panic!("unexpected error {e}"),
    }
}

#[test]
fn inference_before_training_lacks_statistics() {
    let net = Network::<f32>::init(&toy_spec(), &mut rng::seeded(0)).unwrap();
    let x = Tensor::zeros(vec![1, 8, 1, 1]);
    assert!(matches!(net.predict(&x), Err(hybnet::Error::MissingStatistics)));
}

#[test]
fn checkpoint_file_round_trip() {
    let out = nn::train(
        &toy_spec(),
        &blobs(64, 5),
        None,
        &TrainingConfig {
            epochs: 1,
            minibatch: 16,
            ..TrainingConfig::default()
        },
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.ckpt");
    nn::save_checkpoint(&path, &out.network, 3).unwrap();
    let (back, tag) = nn::load_checkpoint(&path).unwrap();
    assert_eq!(tag, 3);
    assert_eq!(back, out.network);
    let x = blobs(10, 6).features;
    assert_eq!(back.predict(&x).unwrap(), out.network.predict(&x).unwrap());
}
