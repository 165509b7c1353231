use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::confusion::{ConfusionMatrix, Metrics};
use super::mds::{mds_embed, MdsEmbedding};
use crate::error::{Error, Result};
use crate::rng;
use crate::simworld::{generate_freeplay, AttemptRecord, ClassName, FeatureLayout};
use crate::tensornn::{
    train_with, Activation, Adam, Network, NetworkCheckpoint, Samples, Standardizer, TrainConfig, TrainMeta,
};

/// Hidden widths of the baseline classifier.
pub const BASELINE_HIDDEN: [usize; 4] = [200, 100, 50, 25];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub classes: Vec<ClassName>,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Leading test samples embedded with MDS.
    pub mds_points: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            classes: ClassName::ALL.to_vec(),
            hidden: BASELINE_HIDDEN.to_vec(),
            train: TrainConfig { lr: 1e-4, batch_size: 32, epochs: 200, weight_decay: 0.01, ..TrainConfig::default() },
            train_per_class: 1600,
            test_per_class: 400,
            mds_points: 200,
            seed: 0,
        }
    }
}

/// Class-labelled feature rows, with labels indexing `classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSamples {
    pub samples: Samples,
    pub classes: Vec<ClassName>,
}

impl LabeledSamples {
    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.as_str().to_string()).collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.classes.len()];
        self.samples.y.iter().for_each(|&y| c[y] += 1);
        c
    }
}

/// Featurises records, labelling each by the position of its class in `classes`.
pub fn to_samples(records: &[AttemptRecord], classes: &[ClassName], layout: FeatureLayout) -> Result<LabeledSamples> {
    let mut x = Vec::with_capacity(records.len() * layout.dim());
    let mut y = Vec::with_capacity(records.len());
    for r in records {
        let label = classes
            .iter()
            .position(|c| *c == r.theme_class)
            .ok_or_else(|| Error::InvalidInput(format!("record of class {} outside the label set", r.theme_class)))?;
        x.extend(layout.featurize(r));
        y.push(label);
    }
    Ok(LabeledSamples { samples: Samples::new(x, layout.dim(), y)?, classes: classes.to_vec() })
}

/// Generates `train_n + test_n` free-play attempts per class and splits each
/// class by a seeded permutation. Both sets come back shuffled.
pub fn freeplay_split(
    classes: &[ClassName],
    train_n: usize,
    test_n: usize,
    seed: u64,
) -> Result<(LabeledSamples, LabeledSamples)> {
    let mut by_class = BTreeMap::new();
    for &c in classes {
        by_class.insert(c, generate_freeplay(c, train_n + test_n, seed)?);
    }
    split_records(&by_class, classes, train_n, test_n, seed)
}

/// Splits existing per-class records the way [`freeplay_split`] does, using
/// the first `train_n + test_n` rows of each class.
pub fn split_records(
    by_class: &BTreeMap<ClassName, Vec<AttemptRecord>>,
    classes: &[ClassName],
    train_n: usize,
    test_n: usize,
    seed: u64,
) -> Result<(LabeledSamples, LabeledSamples)> {
    let mut train_recs = Vec::with_capacity(classes.len() * train_n);
    let mut test_recs = Vec::with_capacity(classes.len() * test_n);
    for &c in classes {
        let all = by_class.get(&c).map(Vec::as_slice).unwrap_or_default();
        if all.len() < train_n + test_n {
            return Err(Error::Insufficient(format!("{c} has {} records, {} needed", all.len(), train_n + test_n)));
        }
        let mut recs = all[..train_n + test_n].to_vec();
        recs.shuffle(&mut rng::stream(rng::derive(seed, rng::tag("split")), c.index() as u64));
        test_recs.extend(recs.split_off(train_n));
        train_recs.extend(recs);
    }
    let mut r = rng::stream(rng::derive(seed, rng::tag("order")), 0);
    train_recs.shuffle(&mut r);
    test_recs.shuffle(&mut r);
    Ok((
        to_samples(&train_recs, classes, FeatureLayout::Freeplay)?,
        to_samples(&test_recs, classes, FeatureLayout::Freeplay)?,
    ))
}

#[derive(Clone, Debug)]
pub struct BaselineResult {
    pub checkpoint: NetworkCheckpoint,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub mds: MdsEmbedding,
    pub loss_history: Vec<f64>,
}

/// Builds the classifier for `dim` inputs; inputs are standardised with
/// statistics of `fit_on`.
pub fn build_classifier(fit_on: &Samples, hidden: &[usize], classes: usize, seed: u64) -> Result<Network> {
    let mut net = Network::mlp(fit_on.dim, hidden, classes, Activation::leaky(), &mut rng::stream(seed, 0x6e6574))?;
    net.input_scaler = Some(Standardizer::fit(&fit_on.x, fit_on.dim)?);
    Ok(net)
}

pub fn evaluate(net: &Network, data: &LabeledSamples) -> Result<ConfusionMatrix> {
    let pred = net.predict(&data.samples.x, data.samples.len())?;
    ConfusionMatrix::from_predictions(data.class_names(), &data.samples.y, &pred)
}

/// MDS of the last hidden layer over the first `points` rows of `data`.
pub fn embed_last_hidden(net: &Network, data: &LabeledSamples, points: usize) -> Result<MdsEmbedding> {
    let n = points.min(data.samples.len());
    let x = &data.samples.x[..n * data.samples.dim];
    let last = net.layers.len() - 2;
    let acts = net.activations(x, n, last)?;
    let width = acts.len() / n.max(1);
    let pred = net.predict(x, n)?;
    let names = data.class_names();
    mds_embed(&acts, n, width)?.with_labels(
        data.samples.y[..n].iter().map(|&y| names[y].clone()).collect(),
        pred.iter().map(|&p| names.get(p).cloned().unwrap_or_else(|| format!("class_{p}"))).collect(),
    )
}

fn warn_on_imbalance(data: &LabeledSamples, expected: usize, what: &str) {
    for (c, n) in data.classes.iter().zip(data.counts()) {
        if n != expected {
            log::warn!("{what} set has {n} samples of {c}, expected {expected}");
        }
    }
}

/// Trains the full-batch-schedule baseline on `train_set` and scores it on `test_set`.
pub fn train_baseline(train_set: &LabeledSamples, test_set: &LabeledSamples, cfg: &BaselineConfig) -> Result<BaselineResult> {
    warn_on_imbalance(train_set, cfg.train_per_class, "training");
    warn_on_imbalance(test_set, cfg.test_per_class, "test");
    let k = train_set.classes.len();
    let mut net = build_classifier(&train_set.samples, &cfg.hidden, k, cfg.seed)?;
    let tc = TrainConfig { seed: cfg.seed, ..cfg.train.clone() };
    let mut opt = Adam::new(&net, tc.lr, tc.weight_decay);
    let hist = train_with(&mut net, &mut opt, &train_set.samples, None, &tc)?;
    let confusion = evaluate(&net, test_set)?;
    let metrics = confusion.metrics();
    let mds = embed_last_hidden(&net, test_set, cfg.mds_points)?;
    let meta = TrainMeta {
        epochs: tc.epochs,
        lr: tc.lr,
        seed: cfg.seed,
        class_names: train_set.class_names(),
        ..TrainMeta::default()
    };
    Ok(BaselineResult {
        checkpoint: NetworkCheckpoint::new(net, Some(opt), meta),
        confusion,
        metrics,
        mds,
        loss_history: hist.epoch_loss,
    })
}

/// Convenience wrapper: generate data from `cfg` and train.
pub fn run_baseline(cfg: &BaselineConfig) -> Result<BaselineResult> {
    let (tr, te) = freeplay_split(&cfg.classes, cfg.train_per_class, cfg.test_per_class, cfg.seed)?;
    train_baseline(&tr, &te, cfg)
}

