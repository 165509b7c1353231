use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use stackplay::error::Error;
use stackplay::novelty::*;
use stackplay::policy::{evaluate_controller, reward, RlAction};
use stackplay::rng::stream;
use stackplay::simworld::{sample_episode, ClassName, Episode, EpisodeRunner, FeatureLayout};

// Straight-line recomputation of the decision metric from raw vectors.
fn oracle_d(known: &[Vec<f64>], batch: &[Vec<f64>]) -> f64 {
    let dim = known[0].len();
    let mean = |vs: &[Vec<f64>]| -> Vec<f64> {
        (0..dim).map(|j| vs.iter().map(|v| v[j]).sum::<f64>() / vs.len() as f64).collect()
    };
    let mu_s = mean(known);
    let mu_n = mean(batch);
    let sigma: Vec<f64> = (0..dim)
        .map(|j| (known.iter().map(|v| (v[j] - mu_s[j]).powi(2)).sum::<f64>() / known.len() as f64).sqrt())
        .collect();
    let cosd = |a: &[f64], b: &[f64]| {
        let mut dot = 0.0;
        let mut aa = 0.0;
        let mut bb = 0.0;
        for j in 0..dim {
            dot += a[j] * b[j];
            aa += a[j] * a[j];
            bb += b[j] * b[j];
        }
        1.0 - dot / (aa.sqrt() * bb.sqrt())
    };
    let edge: Vec<f64> = (0..dim).map(|j| mu_s[j] + sigma[j]).collect();
    let spread = cosd(&mu_s, &edge);
    let filtered_sum = |vs: &[Vec<f64>]| -> f64 {
        let out: Vec<f64> = vs.iter().map(|v| cosd(&mu_s, v) / spread).filter(|&r| r > 1.0).collect();
        if out.is_empty() {
            return 0.0;
        }
        let m = out.iter().sum::<f64>() / out.len() as f64;
        let s = (out.iter().map(|r| (r - m).powi(2)).sum::<f64>() / out.len() as f64).sqrt();
        out.iter().filter(|&&r| s == 0.0 || (r - m) / s < 3.0).sum()
    };
    let mut known_sum = filtered_sum(known);
    if known_sum == 0.0 {
        known_sum = 1.0;
    }
    let ratio = filtered_sum(batch) / known_sum;
    ratio * cosd(&mu_s, &mu_n) / (spread * known_sum)
}

fn cloud(rng: &mut impl Rng, n: usize, dim: usize, centre: &[f64], noise: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|j| centre[j] + noise * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

fn centred(_: stackplay::policy::RlState) -> stackplay::error::Result<RlAction> {
    Ok(RlAction::from_normalized([0.0, 0.0]))
}

fn episodes_of(class: ClassName, n: usize, seed: u64) -> Vec<Episode> {
    let mut r = stream(seed, 0);
    (0..n as u64).map(|i| sample_episode(&class.class(), i, &mut r).unwrap()).collect()
}

#[test]
fn padding_copies_last_row() {
    let object = ClassName::Sphere.class();
    let mut r = stream(3, 0);
    let mut runner = EpisodeRunner::new(&object, 0, &mut r);
    for _ in 0..3 {
        runner.step(RlAction::from_normalized([0.3, -0.2]).to_placement(), &mut r, reward).unwrap();
    }
    let ep = &runner.finish();
    let p = pad_episode(ep, FeatureLayout::Rl19).unwrap();
    assert_eq!(p.rows.len(), 10 * 19);
    for i in 3..10 {
        assert_eq!(p.row(i), p.row(2));
    }
    assert_eq!(p.row(2), FeatureLayout::Rl19.featurize(&ep.records[2]).as_slice());

    let eps = episodes_of(ClassName::Sphere, 5, 3);
    let full = eps.iter().find(|e| e.records.len() == 10).expect("a ten-attempt episode");
    let p = pad_episode(full, FeatureLayout::Rl16NoJitter).unwrap();
    let flat: Vec<f64> = full.records.iter().flat_map(|r| FeatureLayout::Rl16NoJitter.featurize(r)).collect();
    assert_eq!(p.rows, flat);
}

#[test]
fn first_try_success_gives_identical_rows() {
    let res = evaluate_controller(centred, ClassName::Cube, 50, 1).unwrap();
    let ep = res.episodes.iter().find(|e| e.records.len() == 1).expect("first-attempt stack");
    let p = pad_episode(ep, FeatureLayout::Rl19).unwrap();
    for i in 1..10 {
        assert_eq!(p.row(i), p.row(0));
    }
}

proptest! {
    #[test]
    fn padding_is_idempotent(rows in 1usize..=10, width in 1usize..20, seed in any::<u64>()) {
        let mut r = stream(seed, 0);
        let x: Vec<f64> = (0..rows * width).map(|_| r.gen_range(-5.0..5.0)).collect();
        let once = pad_rows(&x, width).unwrap();
        prop_assert_eq!(once.len(), 10 * width);
        prop_assert_eq!(&once[..x.len()], &x[..]);
        prop_assert_eq!(pad_rows(&once, width).unwrap(), once);
    }
}

#[test]
fn split_needs_a_hundred_episodes() {
    let eps = episodes_of(ClassName::Cylinder, 99, 5);
    match split_class(&eps, FeatureLayout::Rl19) {
        Err(Error::Insufficient(msg)) => assert!(msg.contains("cylinder") && msg.contains("1 short"), "{msg}"),
        other => panic!("expected shortfall error, got {other:?}"),
    }
    let eps = episodes_of(ClassName::Cylinder, 130, 5);
    let s = split_class(&eps, FeatureLayout::Rl19).unwrap();
    assert_eq!((s.train.len(), s.dev.len(), s.pool.len()), (90, 10, 30));
    assert_eq!(s.train[0].episode_id, 0);
    assert_eq!(s.dev[0].episode_id, 90);
    assert_eq!(s.pool[0].episode_id, 100);
}

#[test]
fn cnn_shapes_follow_feature_width() {
    let cfg = CnnConfig::default();
    let specs = cnn_specs(19, 3, &cfg).unwrap();
    assert_eq!(specs[0].kind.input_size(), 190);
    assert_eq!(specs[0].kind.out_len(), 22);
    assert_eq!(specs[1].kind.out_len(), 10);
    assert_eq!(specs[3].kind.output_size(), 64);
    assert_eq!(specs[4].kind.output_size(), 3);
    let specs = cnn_specs(16, 2, &cfg).unwrap();
    assert_eq!(specs[0].kind.input_size(), 160);
    assert_eq!(specs[0].kind.weight_shape().1, 16);
    assert_eq!(specs[0].kind.out_len(), 19);
}

#[test]
fn detect_matches_brute_force() {
    let mut r = stream(77, 0);
    for trial in 0..100 {
        let dim = r.gen_range(2..70);
        let ns = r.gen_range(10..120);
        let nn = r.gen_range(10..60);
        let cs: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
        let cn: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
        let noise = r.gen_range(0.01..1.0);
        let known = cloud(&mut r, ns, dim, &cs, noise);
        let bn = noise * r.gen_range(0.5..2.0);
        let batch = cloud(&mut r, nn, dim, &cn, bn);
        let v = detect(&EmbeddingSet::new("s", known.clone()).unwrap(), &batch, 25.0, false).unwrap();
        let want = oracle_d(&known, &batch);
        assert!((v.d - want).abs() <= 1e-9 * want.abs().max(1.0), "trial {trial}: {} vs {want}", v.d);
        assert_eq!(v.is_novel, v.d > 25.0);
    }
}

#[test]
fn orthogonal_batch_is_novel() {
    let mut r = stream(8, 0);
    let mut e1 = vec![0.0; 64];
    e1[0] = 1.0;
    let mut e2 = vec![0.0; 64];
    e2[1] = 1.0;
    let unit = |vs: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        vs.into_iter()
            .map(|v| {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / n).collect()
            })
            .collect()
    };
    let known = unit(cloud(&mut r, 100, 64, &e1, 0.01));
    let batch = unit(cloud(&mut r, 100, 64, &e2, 0.01));
    let v = detect(&EmbeddingSet::new("s", known.clone()).unwrap(), &batch, 25.0, false).unwrap();
    assert!(v.shift > 0.9);
    assert!(v.spread < 0.01);
    assert!(v.d > 100.0 * 25.0, "{}", v.d);
    assert!(v.is_novel);
    assert!((v.d - oracle_d(&known, &batch)).abs() <= 1e-9 * v.d);
}

#[test]
fn identical_batch_is_never_novel() {
    let mut r = stream(9, 0);
    for _ in 0..50 {
        let dim = r.gen_range(4..65);
        let c: Vec<f64> = (0..dim).map(|_| r.gen_range(0.0..2.0)).collect();
        let (n, noise) = (r.gen_range(10..100), r.gen_range(0.05..1.0));
        let known = cloud(&mut r, n, dim, &c, noise);
        let v = detect(&EmbeddingSet::new("s", known.clone()).unwrap(), &known, 25.0, false).unwrap();
        assert!(v.shift.abs() < 1e-12);
        assert!(!v.is_novel);
    }
}

#[test]
fn empty_known_outliers_fall_back_to_one() {
    let known = vec![vec![1.0, 1.0], vec![1.0, -1.0]];
    let set = EmbeddingSet::new("s", known).unwrap();
    let v = detect(&set, &vec![vec![1.0, 2.0]; 10], 25.0, false).unwrap();
    assert!(v.epsilon_used);
    assert!(v.outliers_known.indices.is_empty());
    assert_eq!(v.known_mass, 1.0);
    assert!((v.outlier_ratio - v.outliers_batch.sum()).abs() < 1e-15);
    let v = detect(&set, &vec![vec![1.0, 1.0]; 10], 25.0, false).unwrap();
    assert_eq!(v.d, 0.0);
}

#[test]
fn detect_rejects_bad_inputs() {
    let known = EmbeddingSet::new("s", vec![vec![1.0, 0.5], vec![0.5, 1.0], vec![1.0, 1.0]]).unwrap();
    assert!(detect(&known, &vec![vec![1.0, 0.0]; 9], 25.0, false).is_err());
    let mut batch = vec![vec![1.0, 0.0]; 10];
    batch[4] = vec![0.0, 0.0];
    assert!(matches!(detect(&known, &batch, 25.0, false), Err(Error::InvalidInput(_))));
    let zero_known = EmbeddingSet::new("s", vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
    assert!(detect(&zero_known, &vec![vec![1.0, 0.0]; 10], 25.0, false).is_err());
}

#[test]
fn single_division_variant() {
    let mut r = stream(10, 0);
    let known = cloud(&mut r, 60, 8, &[1.0; 8], 0.3);
    let batch = cloud(&mut r, 30, 8, &[1.0, -1.0, 1.0, -1.0, 1.0, 1.0, 1.0, 1.0], 0.3);
    let set = EmbeddingSet::new("s", known).unwrap();
    let a = detect(&set, &batch, 25.0, false).unwrap();
    let b = detect(&set, &batch, 25.0, true).unwrap();
    assert_eq!(a.d.to_bits(), b.d.to_bits());
    assert!((a.d_single - a.d * a.known_mass).abs() <= 1e-12 * a.d_single);
    assert_eq!(b.is_novel, b.d_single > 25.0);
}

proptest! {
    #[test]
    fn positive_scaling_keeps_the_verdict(seed in any::<u64>(), scale in 1e-3f64..1e3) {
        let mut r = stream(seed, 0);
        let dim = r.gen_range(3..20);
        let cs: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
        let cn: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
        let known = cloud(&mut r, 40, dim, &cs, 0.2);
        let batch = cloud(&mut r, 20, dim, &cn, 0.2);
        let t = r.gen_range(0.0..100.0);
        let a = detect(&EmbeddingSet::new("s", known.clone()).unwrap(), &batch, t, false).unwrap();
        let sc = |vs: &[Vec<f64>]| vs.iter().map(|v| v.iter().map(|x| x * scale).collect()).collect::<Vec<Vec<f64>>>();
        let b = detect(&EmbeddingSet::new("s", sc(&known)).unwrap(), &sc(&batch), t, false).unwrap();
        prop_assert_eq!(a.is_novel, b.is_novel);
        prop_assert!((a.d - b.d).abs() <= 1e-9 * a.d.abs().max(1.0));
        prop_assert_eq!(&a.outliers_batch.indices, &b.outliers_batch.indices);
        prop_assert_eq!(&a.outliers_known.indices, &b.outliers_known.indices);
    }

    #[test]
    fn outlier_filter_rules(rho in prop::collection::vec(0.0f64..20.0, 0..60), spikes in prop::collection::vec(50.0f64..500.0, 0..3)) {
        let mut all = rho.clone();
        all.extend(spikes);
        let o = outlier_set(&all);
        prop_assert!(o.rho.iter().all(|&r| r > 1.0));
        let cand: Vec<f64> = all.iter().copied().filter(|&r| r > 1.0).collect();
        prop_assert_eq!(o.indices.len() + o.removed.len(), cand.len());
        if !cand.is_empty() {
            let m = cand.iter().sum::<f64>() / cand.len() as f64;
            let s = (cand.iter().map(|r| (r - m).powi(2)).sum::<f64>() / cand.len() as f64).sqrt();
            for &i in &o.removed {
                prop_assert!(s > 0.0 && (all[i] - m) / s >= 3.0);
            }
            for &i in &o.indices {
                prop_assert!(s == 0.0 || (all[i] - m) / s < 3.0);
            }
        }
    }
}

#[test]
fn wilson_interval_reference_values() {
    // Closed-form values for 95% coverage.
    let (lo, hi) = wilson_interval(10, 10);
    assert!((lo - 0.722_467_1).abs() < 1e-6 && (hi - 1.0).abs() < 1e-12, "{lo} {hi}");
    let (lo, hi) = wilson_interval(5, 10);
    assert!((lo - 0.236_593_3).abs() < 1e-6 && (hi - 0.763_406_7).abs() < 1e-6, "{lo} {hi}");
    assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
}

#[test]
fn probe_sets_per_condition() {
    use ClassName::*;
    assert_eq!(probes_for(CONDITIONS[0]), vec![Cylinder, Capsule, SmallCube]);
    assert_eq!(probes_for(CONDITIONS[1]), vec![Capsule, SmallCube]);
    assert_eq!(probes_for(CONDITIONS[2]), vec![Cylinder, SmallCube]);
    assert_eq!(probes_for(CONDITIONS[3]), vec![SmallCube]);
    assert!(!expected_novel(SmallCube) && expected_novel(Capsule));
}

#[test]
fn cnn_separates_cube_from_sphere() {
    let layout = FeatureLayout::Rl19;
    let data: std::collections::BTreeMap<ClassName, Vec<Episode>> = [ClassName::Cube, ClassName::Sphere]
        .into_iter()
        .map(|c| (c, evaluate_controller(centred, c, 1000, 4).unwrap().episodes))
        .collect();
    let splits = split_known(&[ClassName::Cube, ClassName::Sphere], &data, layout).unwrap();
    let mut cfg = CnnConfig::default();
    cfg.train.epochs = 60;
    let model = train_cnn(&splits, layout, &cfg, 1).unwrap();
    assert!(model.dev_confusion.accuracy() >= 0.9, "{:?}", model.dev_confusion);
    let emb = model.embed(&splits[0].dev).unwrap();
    assert_eq!(emb.len(), 10);
    assert!(emb.iter().all(|v| v.len() == EMBED_DIM));
    let again = model.embed(&splits[0].dev[..1]).unwrap();
    assert_eq!(again[0], emb[0]);
    for v in self_test(&model, &splits, DEFAULT_THRESHOLD).unwrap() {
        assert!(!v.is_novel, "{}: D = {}", v.nearest, v.d);
    }
    assert!(train_cnn(&splits[..1], layout, &cfg, 1).is_err());
}
