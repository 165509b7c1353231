use proptest::prelude::*;
use stackplay::rng::stream;
use stackplay::tensornn::*;
use stackplay::Error;

fn random_input(n: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut r = stream(seed, 99);
    (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

#[test]
fn gradient_audit_dense_three_layers() {
    for act in [Activation::leaky(), Activation::Relu, Activation::Linear] {
        let net = Network::mlp(6, &[8, 7], 4, act, &mut stream(11, 0)).unwrap();
        let err = grad_check(&net, &random_input(6, 1), 2, 1e-5).unwrap();
        assert!(err < 1e-4, "{act:?}: {err}");
    }
}

#[test]
fn gradient_audit_linear_single_layer() {
    let net = Network::new(&[LayerSpec::dense(5, 3, Activation::Linear)], &mut stream(12, 0)).unwrap();
    let err = grad_check(&net, &random_input(5, 2), 0, 1e-5).unwrap();
    assert!(err < 1e-7, "{err}");
}

#[test]
fn gradient_audit_conv_stack() {
    for act in [Activation::Relu, Activation::leaky()] {
        let c1 = LayerKind::conv1d(30, 2, 5, 4, 3).unwrap();
        let c2 = LayerKind::conv1d(c1.out_len(), 5, 3, 3, 2).unwrap();
        let specs = [
            LayerSpec { kind: c1, activation: act, frozen: false },
            LayerSpec { kind: c2, activation: act, frozen: false },
            LayerSpec::dense(c2.output_size(), 6, act),
            LayerSpec::dense(6, 3, Activation::Linear),
        ];
        let net = Network::new(&specs, &mut stream(13, 0)).unwrap();
        let audit = grad_check_detail(&net, &random_input(60, 3), 1, 1e-5).unwrap();
        assert_eq!(audit.checked, net.param_count());
        assert!(audit.max_rel_error < 1e-4, "{act:?}: {audit:?}");
    }
}

#[test]
fn gradient_audit_with_frozen_layers_covers_everything() {
    let mut net = Network::mlp(4, &[5, 5], 3, Activation::leaky(), &mut stream(14, 0)).unwrap();
    net.set_frozen(0, true);
    let audit = grad_check_detail(&net, &random_input(4, 4), 1, 1e-5).unwrap();
    assert_eq!(audit.checked, net.param_count());
    assert!(audit.max_rel_error < 1e-4);
}

#[test]
fn input_gradient_matches_finite_difference() {
    let net = Network::mlp(4, &[6], 3, Activation::leaky(), &mut stream(15, 0)).unwrap();
    let x = random_input(4, 5);
    let t = net.forward_batch(&x, 1).unwrap();
    let (_, d) = softmax_cross_entropy(t.logits(), &[1], 3);
    let (_, dx) = net.backward(&t, &d, true);
    let dx = dx.unwrap();
    for i in 0..4 {
        let mut up = x.clone();
        up[i] += 1e-6;
        let mut dn = x.clone();
        dn[i] -= 1e-6;
        let l = |v: &[f64]| softmax_cross_entropy(&net.forward(v).unwrap().logits, &[1], 3).0;
        let num = (l(&up) - l(&dn)) / 2e-6;
        assert!((num - dx[i]).abs() < 1e-7);
    }
}

fn separable_toy() -> Samples {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..20 {
        let c = i % 2;
        let s = if c == 0 { -1.0 } else { 1.0 };
        x.push(s * (1.0 + 0.1 * i as f64));
        x.push(0.3 * ((i * 7) % 5) as f64 - 0.6);
        y.push(c);
    }
    Samples::new(x, 2, y).unwrap()
}

#[test]
fn separable_toy_reaches_full_accuracy() {
    let data = separable_toy();
    let mut net = Network::mlp(2, &[8], 2, Activation::leaky(), &mut stream(21, 0)).unwrap();
    let cfg = TrainConfig { lr: 1e-2, batch_size: 4, epochs: 200, seed: 5, ..TrainConfig::default() };
    let hist = train(&mut net, &data, None, &cfg).unwrap();
    assert_eq!(hist.epoch_loss.len(), 200);
    assert_eq!(accuracy(&net, &data).unwrap(), 1.0);
}

#[test]
fn all_frozen_network_is_unchanged_and_loss_constant() {
    let data = separable_toy();
    let mut net = Network::mlp(2, &[8], 2, Activation::leaky(), &mut stream(22, 0)).unwrap();
    for i in 0..net.layers.len() {
        net.set_frozen(i, true);
    }
    let before = net.clone();
    let cfg = TrainConfig { lr: 1e-2, batch_size: 20, epochs: 5, weight_decay: 0.01, ..TrainConfig::default() };
    let hist = train(&mut net, &data, None, &cfg).unwrap();
    assert_eq!(net, before);
    assert!(hist.epoch_loss.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn partially_frozen_layers_stay_bit_identical() {
    let data = separable_toy();
    let mut net = Network::mlp(2, &[8, 6], 2, Activation::leaky(), &mut stream(23, 0)).unwrap();
    net.set_frozen(0, true);
    let before = net.clone();
    let cfg = TrainConfig { lr: 1e-2, batch_size: 4, epochs: 10, weight_decay: 0.01, ..TrainConfig::default() };
    train(&mut net, &data, None, &cfg).unwrap();
    assert_eq!(net.layers[0], before.layers[0]);
    assert_ne!(net.layers[1], before.layers[1]);
}

/// Closed-form oracle: with zero gradient, Adam moments stay zero so each step
/// multiplies every parameter by (1 - lr * wd).
#[test]
fn weight_decay_on_zero_gradient_shrinks_norm_each_step() {
    let mut net = Network::mlp(3, &[4], 2, Activation::Linear, &mut stream(24, 0)).unwrap();
    net.layers.iter_mut().for_each(|l| l.bias.iter_mut().for_each(|b| *b = 0.5));
    let (lr, wd) = (1e-2, 0.01);
    let mut opt = Adam::new(&net, lr, wd);
    let zero = Gradients {
        layers: net
            .layers
            .iter()
            .map(|l| ParamGrad { weights: vec![0.0; l.weights.len()], bias: vec![0.0; l.bias.len()] })
            .collect(),
    };
    let norm = |n: &Network| n.layers.iter().flat_map(|l| l.weights.iter()).map(|w| w * w).sum::<f64>().sqrt();
    let mut prev = norm(&net);
    let start = prev;
    for step in 1..=50 {
        opt.step(&mut net, &zero);
        let now = norm(&net);
        assert!(now < prev);
        let expect = start * (1.0 - lr * wd).powi(step);
        assert!((now - expect).abs() <= 1e-12 * start);
        prev = now;
    }
}

#[test]
fn training_is_deterministic() {
    let data = separable_toy();
    let run = || {
        let mut net = Network::mlp(2, &[8], 2, Activation::leaky(), &mut stream(25, 0)).unwrap();
        let cfg = TrainConfig { lr: 1e-2, batch_size: 3, epochs: 15, weight_decay: 0.01, seed: 9, ..TrainConfig::default() };
        let h = train(&mut net, &data, None, &cfg).unwrap();
        (net, h)
    };
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
}

#[test]
fn out_of_range_label_and_bad_config_are_rejected() {
    let mut data = separable_toy();
    let mut net = Network::mlp(2, &[4], 2, Activation::Relu, &mut stream(26, 0)).unwrap();
    let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
    data.y[0] = 2;
    assert!(matches!(train(&mut net, &data, None, &cfg), Err(Error::InvalidInput(_))));
    let data = separable_toy();
    let bad = TrainConfig { batch_size: 0, ..cfg.clone() };
    assert!(train(&mut net, &data, None, &bad).is_err());
    let bad = TrainConfig { lr: 0.0, ..cfg };
    assert!(train(&mut net, &data, None, &bad).is_err());
}

#[test]
fn nan_loss_aborts_with_diagnostic() {
    let data = separable_toy();
    let mut net = Network::mlp(2, &[4], 2, Activation::Relu, &mut stream(27, 0)).unwrap();
    net.layers[1].weights[0] = f64::NAN;
    let cfg = TrainConfig { epochs: 3, lr: 1e-3, ..TrainConfig::default() };
    match train(&mut net, &data, None, &cfg) {
        Err(Error::NonFiniteLoss { epoch, batch, lr }) => {
            assert_eq!((epoch, batch), (0, 0));
            assert_eq!(lr, 1e-3);
        }
        other => panic!("expected NonFiniteLoss, got {other:?}"),
    }
}

#[test]
fn lr_grid_keeps_best_validation_accuracy() {
    let data = separable_toy();
    let net = Network::mlp(2, &[8], 2, Activation::leaky(), &mut stream(28, 0)).unwrap();
    let cfg = TrainConfig { lr_grid: vec![1e-2, 1e-6], epochs: 60, batch_size: 4, patience: Some(20), ..TrainConfig::default() };
    let (best, hist) = train_lr_grid(&net, &data, &data, &cfg).unwrap();
    assert_eq!(hist.lr, 1e-2);
    assert_eq!(accuracy(&best, &data).unwrap(), hist.best_val_accuracy().unwrap());
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let data = separable_toy();
    let c1 = LayerKind::conv1d(2, 1, 3, 1, 1).unwrap();
    let specs = [LayerSpec { kind: c1, activation: Activation::Relu, frozen: true }, LayerSpec::dense(6, 2, Activation::Linear)];
    let mut net = Network::new(&specs, &mut stream(29, 0)).unwrap();
    net.input_scaler = Some(Standardizer::fit(&data.x, 2).unwrap());
    let mut opt = Adam::new(&net, 3e-3, 0.01);
    let cfg = TrainConfig { lr: 3e-3, epochs: 4, batch_size: 5, weight_decay: 0.01, ..TrainConfig::default() };
    train_with(&mut net, &mut opt, &data, None, &cfg).unwrap();
    let meta = TrainMeta { epochs: 4, lr: 3e-3, seed: 0, class_names: vec!["neg".into(), "pos".into()], ..TrainMeta::default() };
    let ck = NetworkCheckpoint::new(net, Some(opt), meta);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    ck.save(&path).unwrap();
    let back = NetworkCheckpoint::load(&path).unwrap();
    assert_eq!(back, ck);
    for (a, b) in back.network.layers.iter().zip(&ck.network.layers) {
        assert!(a.weights.iter().zip(&b.weights).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(back.to_json().unwrap(), ck.to_json().unwrap());
}

#[test]
fn checkpoint_rejects_inconsistent_shapes() {
    let net = Network::mlp(2, &[3], 2, Activation::Relu, &mut stream(30, 0)).unwrap();
    let mut ck = NetworkCheckpoint::new(net, None, TrainMeta::default());
    ck.network.layers[0].weights.push(1.0);
    assert!(NetworkCheckpoint::from_json(&ck.to_json().unwrap()).is_err());
    let net = Network::mlp(2, &[3], 2, Activation::Relu, &mut stream(30, 0)).unwrap();
    let mut ck = NetworkCheckpoint::new(net, None, TrainMeta::default());
    ck.meta.class_names = vec!["only".into()];
    assert!(NetworkCheckpoint::from_json(&ck.to_json().unwrap()).is_err());
    let mut ck2 = ck.clone();
    ck2.meta.class_names.clear();
    ck2.version = 99;
    assert!(NetworkCheckpoint::from_json(&ck2.to_json().unwrap()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_always_normalised(seed in 0u64..1000, scale in 0.01f64..50.0) {
        let net = Network::mlp(5, &[7], 4, Activation::leaky(), &mut stream(seed, 0)).unwrap();
        let x: Vec<f64> = random_input(5, seed).iter().map(|v| v * scale).collect();
        let p = softmax(&net.forward(&x).unwrap().logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn frozen_layers_survive_any_training(seed in 0u64..200, frozen_mask in 0u8..8) {
        let data = separable_toy();
        let mut net = Network::mlp(2, &[5, 4], 2, Activation::leaky(), &mut stream(seed, 1)).unwrap();
        for i in 0..3 {
            net.set_frozen(i, frozen_mask & (1 << i) != 0);
        }
        let before = net.clone();
        let cfg = TrainConfig { lr: 1e-2, epochs: 2, batch_size: 7, weight_decay: 0.01, seed, ..TrainConfig::default() };
        train(&mut net, &data, None, &cfg).unwrap();
        for i in 0..3 {
            if frozen_mask & (1 << i) != 0 {
                prop_assert_eq!(&net.layers[i], &before.layers[i]);
            }
        }
    }

    #[test]
    fn gradient_audit_random_dense(seed in 0u64..200) {
        // Gradients below 1e-6 sit near the central-difference noise floor
        // (about 1e-11 absolute), so they are compared on absolute error.
        let net = Network::mlp(4, &[6, 5], 3, Activation::leaky(), &mut stream(seed, 2)).unwrap();
        let a = grad_check_floored(&net, &random_input(4, seed + 1000), (seed % 3) as usize, 1e-5, 1e-6).unwrap();
        prop_assert!(a.max_rel_error < 1e-4, "{:?}", a);
    }
}
