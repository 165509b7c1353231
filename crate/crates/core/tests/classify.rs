use proptest::prelude::*;
use rand::seq::SliceRandom;
use stackplay::classify::*;
use stackplay::rng::stream;
use stackplay::simworld::ClassName;
use stackplay::tensornn::{Samples, TrainConfig};
use stackplay::Error;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn assert_distances_preserved(x: &[f64], dim: usize, e: &MdsEmbedding, tol: f64) {
    let rows: Vec<&[f64]> = x.chunks_exact(dim).collect();
    for i in 0..rows.len() {
        for j in 0..rows.len() {
            let d = dist(rows[i], rows[j]);
            let de = dist(&e.coords[i], &e.coords[j]);
            assert!((d - de).abs() <= tol, "pair ({i},{j}): {d} vs {de}");
        }
    }
}

#[test]
fn mds_collinear_points() {
    let x = [0.0, 0.0, 1.0, 0.0, 2.0, 0.0];
    let e = mds_embed(&x, 3, 2).unwrap();
    assert_distances_preserved(&x, 2, &e, 1e-9);
    let (a, b, c) = (e.coords[0], e.coords[1], e.coords[2]);
    let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    assert!(cross.abs() < 1e-9);
    assert_eq!(e.coords.iter().map(|p| p[1]).filter(|v| *v != 0.0).count(), 0, "rank-1 fallback");
    assert!(e.stress < 1e-9);
}

#[test]
fn mds_identical_points_collapse_to_origin() {
    let x = vec![0.7; 5 * 4];
    let e = mds_embed(&x, 5, 4).unwrap();
    assert!(e.coords.iter().all(|c| c == &[0.0, 0.0]));
    assert_eq!(e.stress, 0.0);
}

#[test]
fn mds_rejects_small_or_ragged_input() {
    assert!(matches!(mds_embed(&[0.0; 4], 2, 2), Err(Error::InvalidInput(_))));
    assert!(mds_embed(&[0.0; 7], 3, 2).is_err());
}

#[test]
fn mds_is_sign_deterministic() {
    let x: Vec<f64> = (0..30).map(|i| ((i * 37) % 11) as f64 * 0.3).collect();
    let a = mds_embed(&x, 10, 3).unwrap();
    let b = mds_embed(&x, 10, 3).unwrap();
    assert_eq!(a, b);
    for axis in 0..2 {
        let m = a.coords.iter().map(|c| c[axis]).max_by(|p, q| p.abs().total_cmp(&q.abs())).unwrap();
        assert!(m >= 0.0);
    }
}

fn rotate2(p: [f64; 2], th: f64, t: [f64; 2]) -> [f64; 2] {
    [th.cos() * p[0] - th.sin() * p[1] + t[0], th.sin() * p[0] + th.cos() * p[1] + t[1]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mds_reproduces_planar_configurations(
        pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..30),
        lift in 0usize..3,
    ) {
        // Planar points written into a higher-dimensional space with zero padding.
        let dim = 2 + lift;
        let mut x = Vec::new();
        for (a, b) in &pts {
            x.extend([*a, *b]);
            x.extend(std::iter::repeat(0.0).take(lift));
        }
        let e = mds_embed(&x, pts.len(), dim).unwrap();
        let scale = pts.iter().map(|(a, b)| a.abs().max(b.abs())).fold(1.0, f64::max);
        assert_distances_preserved(&x, dim, &e, 1e-9 * scale * 10.0);
    }

    #[test]
    fn mds_distances_invariant_to_rigid_motion(
        pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 4..20),
        th in 0.0f64..6.28,
        tx in -10.0f64..10.0,
        ty in -10.0f64..10.0,
    ) {
        let x: Vec<f64> = pts.iter().flat_map(|(a, b)| [*a, *b]).collect();
        let y: Vec<f64> = pts.iter().flat_map(|(a, b)| rotate2([*a, *b], th, [tx, ty])).collect();
        let ea = mds_embed(&x, pts.len(), 2).unwrap();
        let eb = mds_embed(&y, pts.len(), 2).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let da = dist(&ea.coords[i], &ea.coords[j]);
                let db = dist(&eb.coords[i], &eb.coords[j]);
                prop_assert!((da - db).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn confusion_rows_match_class_counts(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..200),
    ) {
        let names: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let truth: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let m = ConfusionMatrix::from_predictions(names, &truth, &pred).unwrap();
        for (c, s) in m.row_sums().iter().enumerate() {
            prop_assert_eq!(*s as usize, truth.iter().filter(|&&t| t == c).count());
        }
        let correct = pairs.iter().filter(|p| p.0 == p.1).count();
        prop_assert_eq!(m.accuracy(), correct as f64 / pairs.len() as f64);
        let met = m.metrics();
        for (i, cm) in met.per_class.iter().enumerate() {
            let tp = pairs.iter().filter(|p| p.0 == i && p.1 == i).count() as f64;
            let pp = pairs.iter().filter(|p| p.1 == i).count() as f64;
            let tt = pairs.iter().filter(|p| p.0 == i).count() as f64;
            prop_assert_eq!(cm.precision, if pp > 0.0 { tp / pp } else { 0.0 });
            prop_assert_eq!(cm.recall, if tt > 0.0 { tp / tt } else { 0.0 });
        }
    }
}

fn toy_matrix() -> ConfusionMatrix {
    let names = vec!["cube".to_string(), "cone".to_string(), "pyramid".to_string()];
    ConfusionMatrix::from_predictions(names, &[0, 0, 1, 1, 2, 2, 2], &[0, 1, 1, 2, 2, 2, 1]).unwrap()
}

#[test]
fn confusion_csv_follows_class_order() {
    let m = toy_matrix();
    let csv = confusion_csv(&m);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "true\\pred,cube,cone,pyramid");
    assert_eq!(lines[1], "cube,1,1,0");
    assert_eq!(lines[2], "cone,0,1,1");
    assert_eq!(lines[3], "pyramid,0,1,2");
    assert_eq!(m.mutual("cone", "pyramid"), Some(2));
    assert_eq!(m.mutual("cone", "cube"), Some(1));
}

#[test]
fn exports_are_byte_deterministic() {
    let m = toy_matrix();
    let x: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
    let e = mds_embed(&x, 4, 3)
        .unwrap()
        .with_labels(
            vec!["cube".into(), "cone".into(), "cube".into(), "pyramid".into()],
            vec!["cube".into(), "cube".into(), "cube".into(), "pyramid".into()],
        )
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_confusion(&m, dir.path(), "confusion").unwrap();
    export_embedding(&e, dir.path(), "mds").unwrap();
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    let first: Vec<Vec<u8>> = ["confusion.csv", "confusion.svg", "mds.csv", "mds.svg"].iter().map(|n| read(n)).collect();
    export_confusion(&m, dir.path(), "confusion").unwrap();
    export_embedding(&e, dir.path(), "mds").unwrap();
    let second: Vec<Vec<u8>> = ["confusion.csv", "confusion.svg", "mds.csv", "mds.svg"].iter().map(|n| read(n)).collect();
    assert_eq!(first, second);

    let csv = String::from_utf8(first[2].clone()).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "x,y,true_label,predicted_label");
    assert_eq!(rows.len(), 5);
    assert!(rows[1..].iter().all(|r| r.split(',').count() == 4));
    let back: f64 = rows[1].split(',').next().unwrap().parse().unwrap();
    assert_eq!(back.to_bits(), e.coords[0][0].to_bits());
}

#[test]
fn export_to_missing_directory_is_io_error() {
    let m = toy_matrix();
    let r = export_confusion(&m, std::path::Path::new("/nonexistent/dir/for/export"), "c");
    assert!(matches!(r, Err(Error::Io(_))));
}

#[test]
fn memorises_one_row_per_class() {
    let classes = ClassName::ALL.to_vec();
    let recs: Vec<_> = classes
        .iter()
        .map(|&c| stackplay::simworld::generate_freeplay(c, 1, 3).unwrap().remove(0))
        .collect();
    let one = to_samples(&recs, &classes, stackplay::simworld::FeatureLayout::Freeplay).unwrap();
    let mut dup = one.clone();
    for _ in 0..3 {
        dup.samples.extend(&one.samples);
    }
    let cfg = BaselineConfig {
        hidden: BASELINE_HIDDEN.to_vec(),
        train: TrainConfig { lr: 1e-3, batch_size: 4, epochs: 300, ..TrainConfig::default() },
        train_per_class: 4,
        test_per_class: 4,
        mds_points: 9,
        seed: 4,
        ..BaselineConfig::default()
    };
    let r = train_baseline(&dup, &dup, &cfg).unwrap();
    assert_eq!(r.metrics.accuracy, 1.0);
    assert_eq!(r.confusion.row_sums(), vec![4; 9]);
}

#[test]
fn shuffled_labels_give_chance_accuracy() {
    let classes = ClassName::ALL.to_vec();
    let (mut tr, te) = freeplay_split(&classes, 400, 400, 8).unwrap();
    tr.samples.y.shuffle(&mut stream(8, 1));
    let cfg = BaselineConfig {
        train: TrainConfig { lr: 1e-3, batch_size: 32, epochs: 15, weight_decay: 0.01, ..TrainConfig::default() },
        train_per_class: 400,
        test_per_class: 400,
        seed: 8,
        ..BaselineConfig::default()
    };
    let r = train_baseline(&tr, &te, &cfg).unwrap();
    let chance = 1.0 / 9.0;
    assert!((r.metrics.accuracy - chance).abs() <= 0.03, "accuracy {}", r.metrics.accuracy);
}

#[test]
fn split_sizes_and_determinism() {
    let classes = [ClassName::Cube, ClassName::Sphere];
    let (a_tr, a_te) = freeplay_split(&classes, 30, 10, 5).unwrap();
    let (b_tr, b_te) = freeplay_split(&classes, 30, 10, 5).unwrap();
    assert_eq!(a_tr, b_tr);
    assert_eq!(a_te, b_te);
    assert_eq!(a_tr.counts(), vec![30, 30]);
    assert_eq!(a_te.counts(), vec![10, 10]);
    let all: Samples = {
        let mut s = a_tr.samples.clone();
        s.extend(&a_te.samples);
        s
    };
    // No row shared between train and test.
    let tr_rows: Vec<&[f64]> = a_tr.samples.x.chunks_exact(all.dim).collect();
    for row in a_te.samples.x.chunks_exact(all.dim) {
        assert!(!tr_rows.contains(&row));
    }
}
