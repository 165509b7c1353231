use serde::{Deserialize, Serialize};

use super::episodes::{split_class, ClassSplit, PaddedEpisode};
use crate::classify::ConfusionMatrix;
use crate::error::{Error, Result};
use crate::rng;
use crate::simworld::{ClassName, Episode, FeatureLayout, MAX_ATTEMPTS};
use crate::tensornn::{train, Activation, LayerKind, LayerSpec, Network, Samples, Standardizer, TrainConfig};

/// Index of the 64-unit embedding layer (second dense layer).
pub const EMBED_LAYER: usize = 3;
pub const EMBED_DIM: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub conv1_filters: usize,
    pub conv1_stride: usize,
    pub conv2_filters: usize,
    pub conv2_kernel: usize,
    pub conv2_stride: usize,
    pub dense: usize,
    pub train: TrainConfig,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            conv1_filters: 256,
            conv1_stride: 8,
            conv2_filters: 128,
            conv2_kernel: 4,
            conv2_stride: 2,
            dense: EMBED_DIM,
            train: TrainConfig { lr: 1e-3, batch_size: 10, epochs: 500, weight_decay: 0.0, ..TrainConfig::default() },
        }
    }
}

/// Layer stack for `c` features per timestep and `classes` outputs. The
/// first kernel spans exactly one timestep.
pub fn cnn_specs(c: usize, classes: usize, cfg: &CnnConfig) -> Result<Vec<LayerSpec>> {
    let relu = Activation::Relu;
    let conv1 = LayerKind::conv1d(MAX_ATTEMPTS * c, 1, cfg.conv1_filters, c, cfg.conv1_stride)?;
    let conv2 = LayerKind::conv1d(conv1.out_len(), cfg.conv1_filters, cfg.conv2_filters, cfg.conv2_kernel, cfg.conv2_stride)?;
    Ok(vec![
        LayerSpec { kind: conv1, activation: relu, frozen: false },
        LayerSpec { kind: conv2, activation: relu, frozen: false },
        LayerSpec::dense(conv2.output_size(), cfg.dense, relu),
        LayerSpec::dense(cfg.dense, cfg.dense, relu),
        LayerSpec::dense(cfg.dense, classes, Activation::Linear),
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub net: Network,
    pub classes: Vec<ClassName>,
    pub layout: FeatureLayout,
    pub dev_confusion: ConfusionMatrix,
    pub loss_history: Vec<f64>,
}

impl CnnModel {
    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.as_str().to_string()).collect()
    }

    pub fn predict(&self, eps: &[PaddedEpisode]) -> Result<Vec<usize>> {
        let x: Vec<f64> = eps.iter().flat_map(|e| e.rows.iter().copied()).collect();
        self.net.predict(&x, eps.len())
    }

    /// Post-activation output of the second dense layer for each episode.
    pub fn embed(&self, eps: &[PaddedEpisode]) -> Result<Vec<Vec<f64>>> {
        let x: Vec<f64> = eps.iter().flat_map(|e| e.rows.iter().copied()).collect();
        let flat = self.net.activations(&x, eps.len(), EMBED_LAYER)?;
        Ok(flat.chunks_exact(self.net.layers[EMBED_LAYER].spec.kind.output_size()).map(<[f64]>::to_vec).collect())
    }
}

/// Training data for one known-class set.
pub fn split_known(
    known: &[ClassName],
    data: &std::collections::BTreeMap<ClassName, Vec<Episode>>,
    layout: FeatureLayout,
) -> Result<Vec<ClassSplit>> {
    known
        .iter()
        .map(|c| {
            let eps = data.get(c).ok_or_else(|| Error::Insufficient(format!("no evaluation episodes for {c}")))?;
            split_class(eps, layout)
        })
        .collect()
}

fn to_samples(splits: &[ClassSplit], pick: impl Fn(&ClassSplit) -> &[PaddedEpisode]) -> Result<Samples> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut dim = 0;
    for (label, s) in splits.iter().enumerate() {
        for e in pick(s) {
            dim = e.rows.len();
            x.extend_from_slice(&e.rows);
            y.push(label);
        }
    }
    Samples::new(x, dim, y)
}

/// Trains the episode classifier on the first 90 episodes of each known
/// class and scores it on the next 10.
pub fn train_cnn(splits: &[ClassSplit], layout: FeatureLayout, cfg: &CnnConfig, seed: u64) -> Result<CnnModel> {
    if splits.len() < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 known classes, got {}", splits.len())));
    }
    let c = layout.dim();
    let train_set = to_samples(splits, |s| &s.train)?;
    let dev_set = to_samples(splits, |s| &s.dev)?;
    let mut net = Network::new(&cnn_specs(c, splits.len(), cfg)?, &mut rng::stream(seed, rng::tag("cnn-init")))?;
    net.input_scaler = Some(Standardizer::fit(&train_set.x, c)?);
    let tc = TrainConfig { seed: rng::derive(seed, rng::tag("cnn-train")), ..cfg.train.clone() };
    let hist = train(&mut net, &train_set, None, &tc)?;
    let classes: Vec<ClassName> = splits.iter().map(|s| s.class).collect();
    let names = classes.iter().map(|c| c.as_str().to_string()).collect();
    let pred = net.predict(&dev_set.x, dev_set.len())?;
    let dev_confusion = ConfusionMatrix::from_predictions(names, &dev_set.y, &pred)?;
    Ok(CnnModel { net, classes, layout, dev_confusion, loss_history: hist.epoch_loss })
}
