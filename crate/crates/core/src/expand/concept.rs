use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classify::ConfusionMatrix;
use crate::error::{Error, Result};
use crate::rng;
use crate::simworld::{generate_freeplay, label_contact, AttemptRecord, ClassName, Contact, FeatureLayout};
use crate::tensornn::{train_lr_grid, Layer, LayerSpec, Network, Samples, TrainConfig, Activation, GROWTH_INIT_GAIN};

use super::curriculum::FreezePolicy;

/// Label order of the concept head.
pub const CONCEPT_LABELS: [Contact; 2] = [Contact::Flat, Contact::Round];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptConfig {
    pub train_per_label: usize,
    pub test_per_label: usize,
    pub val_fraction: f64,
    pub new_layer_width: usize,
    pub freeze: FreezePolicy,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for ConceptConfig {
    fn default() -> Self {
        ConceptConfig {
            train_per_label: 300,
            test_per_label: 60,
            val_fraction: 0.2,
            new_layer_width: 25,
            freeze: FreezePolicy::OriginalTwo,
            train: TrainConfig {
                lr: 1e-3,
                batch_size: 32,
                epochs: 100,
                weight_decay: 0.01,
                lr_grid: vec![1e-3, 1e-4, 1e-5],
                ..TrainConfig::default()
            },
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptReport {
    pub test_accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub chosen_lr: f64,
    /// Fraction of test predictions equal to the rotation-rule label.
    pub rule_agreement: f64,
    pub predictions: Vec<Contact>,
    pub truth: Vec<Contact>,
}

fn contact_index(c: Contact) -> usize {
    CONCEPT_LABELS.iter().position(|l| *l == c).unwrap()
}

/// Draws `per_label` flat and `per_label` round free-play attempts, cycling
/// over all classes so both labels span several object types.
pub fn concept_samples(per_label: usize, seed: u64) -> Result<(Samples, Vec<AttemptRecord>)> {
    let mut pools: Vec<std::vec::IntoIter<AttemptRecord>> = Vec::new();
    for c in ClassName::ALL {
        let mut recs = generate_freeplay(c, per_label * 2, rng::derive(seed, rng::tag("concept")))?;
        recs.shuffle(&mut rng::stream(seed, c.index() as u64));
        pools.push(recs.into_iter());
    }
    let mut chosen: [Vec<AttemptRecord>; 2] = [Vec::new(), Vec::new()];
    let mut exhausted = false;
    while !exhausted && chosen.iter().any(|v| v.len() < per_label) {
        exhausted = true;
        for pool in &mut pools {
            if let Some(r) = pool.next() {
                exhausted = false;
                let label = contact_index(label_contact(&r.theme_class.class(), r.post_rotation)?);
                if chosen[label].len() < per_label {
                    chosen[label].push(r);
                }
            }
        }
    }
    if chosen.iter().any(|v| v.len() != per_label) {
        return Err(Error::Insufficient(format!(
            "collected {} flat and {} round samples, need {per_label} of each",
            chosen[0].len(),
            chosen[1].len()
        )));
    }
    let mut recs: Vec<AttemptRecord> = chosen.into_iter().flatten().collect();
    recs.shuffle(&mut rng::stream(seed, 99));
    let layout = FeatureLayout::Freeplay;
    let mut x = Vec::with_capacity(recs.len() * layout.dim());
    let mut y = Vec::with_capacity(recs.len());
    for r in &recs {
        x.extend(layout.featurize(r));
        y.push(contact_index(label_contact(&r.theme_class.class(), r.post_rotation)?));
    }
    Ok((Samples::new(x, layout.dim(), y)?, recs))
}

fn check_balance(s: &Samples, per_label: usize) -> Result<()> {
    let flat = s.y.iter().filter(|&&y| y == 0).count();
    let round = s.len() - flat;
    if flat != per_label || round != per_label {
        return Err(Error::InvalidInput(format!("concept set has {flat} flat / {round} round, expected {per_label} each")));
    }
    Ok(())
}

/// Grows a hidden layer and a binary flat/round head on top of `source`'s
/// last hidden layer and fine-tunes it.
pub fn train_concept_head(source: &Network, cfg: &ConceptConfig) -> Result<(Network, ConceptReport)> {
    let (data, _) = concept_samples(cfg.train_per_label, rng::derive(cfg.seed, rng::tag("concept-train")))?;
    let (test, test_recs) = concept_samples(cfg.test_per_label, rng::derive(cfg.seed, rng::tag("concept-test")))?;
    fit_concept_head(source, &data, &test, &test_recs, cfg)
}

/// [`train_concept_head`] on caller-supplied data. `data` must hold exactly
/// `train_per_label` rows of each label and `test` `test_per_label`;
/// `test_recs` are the attempts behind `test`, used for rule agreement.
pub fn fit_concept_head(
    source: &Network,
    data: &Samples,
    test: &Samples,
    test_recs: &[AttemptRecord],
    cfg: &ConceptConfig,
) -> Result<(Network, ConceptReport)> {
    check_balance(data, cfg.train_per_label)?;
    check_balance(test, cfg.test_per_label)?;
    if test_recs.len() != test.len() {
        return Err(Error::Shape(format!("{} test records for {} test rows", test_recs.len(), test.len())));
    }

    let mut net = source.clone();
    let head = net.layers.pop().ok_or_else(|| Error::Shape("source network is empty".into()))?;
    let width = head.spec.kind.input_size();
    let act = net.layers.last().map(|l| l.spec.activation).unwrap_or_else(Activation::leaky);
    let mut r = rng::stream(rng::derive(cfg.seed, rng::tag("concept-init")), 0);
    net.layers.push(Layer::init(LayerSpec::dense(width, cfg.new_layer_width, act), GROWTH_INIT_GAIN, &mut r));
    net.layers.push(Layer::init(LayerSpec::dense(cfg.new_layer_width, 2, Activation::Linear), GROWTH_INIT_GAIN, &mut r));
    let n = net.layers.len();
    for i in 0..n {
        let frozen = match cfg.freeze {
            FreezePolicy::OriginalTwo => i < 2,
            FreezePolicy::AllButNew => i < n - 2,
        };
        net.set_frozen(i, frozen);
    }
    net.validate()?;

    let n_val = (data.len() as f64 * cfg.val_fraction).round() as usize;
    let mut val_idx = Vec::new();
    let mut train_idx = Vec::new();
    let mut seen = [0usize; 2];
    for i in 0..data.len() {
        let l = data.y[i];
        if seen[l] < n_val / 2 {
            val_idx.push(i);
            seen[l] += 1;
        } else {
            train_idx.push(i);
        }
    }
    let tc = TrainConfig { seed: rng::derive(cfg.seed, rng::tag("concept-sgd")), ..cfg.train.clone() };
    let (net, hist) = train_lr_grid(&net, &data.subset(&train_idx), &data.subset(&val_idx), &tc)?;

    let pred = net.predict(&test.x, test.len())?;
    let names = CONCEPT_LABELS.iter().map(|c| c.as_str().to_string()).collect();
    let confusion = ConfusionMatrix::from_predictions(names, &test.y, &pred)?;
    let predictions: Vec<Contact> = pred.iter().map(|&p| CONCEPT_LABELS[p]).collect();
    let truth = test_recs
        .iter()
        .map(|r| label_contact(&r.theme_class.class(), r.post_rotation))
        .collect::<Result<Vec<_>>>()?;
    let agree = predictions.iter().zip(&truth).filter(|(p, t)| p == t).count();
    let report = ConceptReport {
        test_accuracy: confusion.accuracy(),
        confusion,
        chosen_lr: hist.lr,
        rule_agreement: agree as f64 / truth.len() as f64,
        predictions,
        truth,
    };
    Ok((net, report))
}

