use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classify::{build_classifier, evaluate, to_samples, ConfusionMatrix, LabeledSamples, BASELINE_HIDDEN};
use crate::error::{Error, Result};
use crate::rng;
use crate::simworld::{generate_freeplay, ClassName, FeatureLayout};
use crate::tensornn::{train_lr_grid, HeadMutation, Network, Samples, TrainConfig};

pub const BASE_CLASSES: [ClassName; 3] = [ClassName::Cube, ClassName::Sphere, ClassName::Egg];

pub const CURRICULUM: [ClassName; 6] = [
    ClassName::Cylinder,
    ClassName::RectPrism,
    ClassName::Cone,
    ClassName::Capsule,
    ClassName::Pyramid,
    ClassName::SmallCube,
];

/// Hidden widths of the fixed-depth network used by static transfer.
pub const STATIC_HIDDEN: [usize; 10] = [200, 100, 50, 25, 25, 25, 25, 25, 25, 25];

/// Number of leading hidden layers of the base that stay frozen.
const FROZEN_BASE_LAYERS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    Dynamic,
    Static,
}

impl std::str::FromStr for TransferMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dynamic" => Ok(TransferMode::Dynamic),
            "static" => Ok(TransferMode::Static),
            _ => Err(Error::InvalidInput(format!("unknown transfer mode '{s}' (dynamic|static)"))),
        }
    }
}

/// Which layers stay frozen during fine-tuning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreezePolicy {
    /// The base's first two hidden layers, at every step.
    OriginalTwo,
    /// Everything except the layer added in this step and the head.
    AllButNew,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub base_samples: usize,
    pub base_train: TrainConfig,
    pub finetune_total: usize,
    pub finetune_train: TrainConfig,
    pub val_fraction: f64,
    pub test_per_class: usize,
    pub new_layer_width: usize,
    pub freeze: FreezePolicy,
    pub seed: u64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        let grid = vec![1e-3, 1e-4, 1e-5];
        TransferConfig {
            base_samples: 5000,
            base_train: TrainConfig {
                lr: 1e-3,
                batch_size: 32,
                epochs: 100,
                weight_decay: 0.01,
                lr_grid: grid.clone(),
                ..TrainConfig::default()
            },
            finetune_total: 600,
            finetune_train: TrainConfig {
                lr: 1e-3,
                batch_size: 32,
                epochs: 100,
                weight_decay: 0.01,
                lr_grid: grid,
                ..TrainConfig::default()
            },
            val_fraction: 0.2,
            test_per_class: 200,
            new_layer_width: 25,
            freeze: FreezePolicy::OriginalTwo,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurriculumStep {
    pub new_class: ClassName,
    /// 0-based position in [`CURRICULUM`].
    pub order_index: usize,
    pub samples_total: usize,
    pub samples_per_class: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: CurriculumStep,
    pub classes: Vec<String>,
    pub test_accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub chosen_lr: f64,
    pub hidden_layers: usize,
    /// Fraction of old-class test rows whose argmax over the old classes is
    /// unchanged by this step.
    pub old_argmax_preserved: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseReport {
    pub classes: Vec<String>,
    pub test_accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub chosen_lr: f64,
    pub hidden_layers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub mode: TransferMode,
    pub seed: u64,
    pub base: BaseReport,
    pub steps: Vec<StepReport>,
    /// Fine-tuning samples per class at each step.
    pub samples_per_class: Vec<usize>,
}

impl TransferReport {
    pub fn final_accuracy(&self) -> f64 {
        self.steps.last().map_or(self.base.test_accuracy, |s| s.test_accuracy)
    }
}

#[derive(Clone, Debug)]
pub struct CurriculumResult {
    pub report: TransferReport,
    pub base: Network,
    /// Model after each step, in curriculum order.
    pub models: Vec<Network>,
}

/// Per-class fine-tuning budget with `k` known classes: `floor(total / k)`.
pub fn samples_per_class(total: usize, k: usize) -> usize {
    total / k
}

fn stage_seed(seed: u64, label: &str) -> u64 {
    rng::derive(seed, rng::tag(label))
}

/// `per_class` fresh free-play rows for each class, keyed by `label` so
/// different stages never reuse samples.
fn draw(classes: &[ClassName], per_class: usize, seed: u64, label: &str) -> Result<LabeledSamples> {
    let mut recs = Vec::with_capacity(classes.len() * per_class);
    for &c in classes {
        recs.extend(generate_freeplay(c, per_class, stage_seed(seed, label))?);
    }
    recs.shuffle(&mut rng::stream(stage_seed(seed, label), 1));
    to_samples(&recs, classes, FeatureLayout::Freeplay)
}

/// Stratified split: the first `fraction` of each class's rows go to validation.
fn stratified_split(data: &LabeledSamples, fraction: f64) -> (Samples, Samples) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for c in 0..data.classes.len() {
        let idx: Vec<usize> = (0..data.samples.len()).filter(|&i| data.samples.y[i] == c).collect();
        let n_val = (idx.len() as f64 * fraction).round() as usize;
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (data.samples.subset(&train), data.samples.subset(&val))
}

fn hidden_count(net: &Network) -> usize {
    net.layers.len() - 1
}

/// Trains the base model on `BASE_CLASSES` with learning-rate selection on
/// a stratified validation split.
pub fn train_base(mode: TransferMode, cfg: &TransferConfig) -> Result<(Network, BaseReport)> {
    let k = BASE_CLASSES.len();
    let data = draw(&BASE_CLASSES, cfg.base_samples / k, cfg.seed, "base")?;
    let (train, val) = stratified_split(&data, cfg.val_fraction);
    let hidden: &[usize] = match mode {
        TransferMode::Dynamic => &BASELINE_HIDDEN,
        TransferMode::Static => &STATIC_HIDDEN,
    };
    let net = build_classifier(&train, hidden, k, stage_seed(cfg.seed, "base-init"))?;
    let tc = TrainConfig { seed: stage_seed(cfg.seed, "base-train"), ..cfg.base_train.clone() };
    let (net, hist) = train_lr_grid(&net, &train, &val, &tc)?;
    let test = draw(&BASE_CLASSES, cfg.test_per_class, cfg.seed, "base-test")?;
    let confusion = evaluate(&net, &test)?;
    let report = BaseReport {
        classes: test.class_names(),
        test_accuracy: confusion.accuracy(),
        confusion,
        chosen_lr: hist.lr,
        hidden_layers: hidden_count(&net),
    };
    Ok((net, report))
}

fn apply_freeze(net: &mut Network, policy: FreezePolicy, new_layer: Option<usize>) {
    let head = net.layers.len() - 1;
    for i in 0..net.layers.len() {
        let frozen = match policy {
            FreezePolicy::OriginalTwo => i < FROZEN_BASE_LAYERS,
            FreezePolicy::AllButNew => i != head && Some(i) != new_layer,
        };
        net.set_frozen(i, frozen);
    }
}

fn old_class_argmax(net: &Network, x: &[f64], n: usize, old: usize) -> Result<Vec<usize>> {
    let t = net.forward_batch(x, n)?;
    let k = net.output_dim();
    Ok(t.logits().chunks_exact(k).map(|r| crate::tensornn::argmax(&r[..old])).collect())
}

/// One curriculum step: extend `source` (trained on `known`) to `new_class`.
pub fn transfer_step(
    source: &Network,
    known: &[ClassName],
    new_class: ClassName,
    order_index: usize,
    mode: TransferMode,
    cfg: &TransferConfig,
) -> Result<(Network, StepReport)> {
    if known.contains(&new_class) {
        return Err(Error::InvalidInput(format!("{new_class} is already a known class")));
    }
    if source.output_dim() != known.len() {
        return Err(Error::Shape(format!("source head has {} outputs for {} known classes", source.output_dim(), known.len())));
    }
    let mut classes = known.to_vec();
    classes.push(new_class);
    let k = classes.len();
    let per_class = samples_per_class(cfg.finetune_total, k);
    let label = format!("step-{order_index}-{new_class}");

    let mut net = source.clone();
    let mutation = match mode {
        TransferMode::Dynamic => HeadMutation::AddLayerAndClass,
        TransferMode::Static => HeadMutation::AddClass,
    };
    net.mutate_head(mutation, cfg.new_layer_width, &mut rng::stream(stage_seed(cfg.seed, &label), 0))?;
    let new_layer = (mode == TransferMode::Dynamic).then(|| net.layers.len() - 2);
    apply_freeze(&mut net, cfg.freeze, new_layer);

    let data = draw(&classes, per_class, cfg.seed, &label)?;
    let (train, val) = stratified_split(&data, cfg.val_fraction);
    let tc = TrainConfig { seed: stage_seed(cfg.seed, &format!("{label}-train")), ..cfg.finetune_train.clone() };
    let (net, hist) = train_lr_grid(&net, &train, &val, &tc)?;

    let test = draw(&classes, cfg.test_per_class, cfg.seed, &format!("{label}-test"))?;
    let confusion = evaluate(&net, &test)?;
    let old_rows: Vec<usize> = (0..test.samples.len()).filter(|&i| test.samples.y[i] < known.len()).collect();
    let old = test.samples.subset(&old_rows);
    let before = old_class_argmax(source, &old.x, old.len(), known.len())?;
    let after = old_class_argmax(&net, &old.x, old.len(), known.len())?;
    let kept = before.iter().zip(&after).filter(|(a, b)| a == b).count();

    let report = StepReport {
        step: CurriculumStep { new_class, order_index, samples_total: cfg.finetune_total, samples_per_class: per_class },
        classes: test.class_names(),
        test_accuracy: confusion.accuracy(),
        confusion,
        chosen_lr: hist.lr,
        hidden_layers: hidden_count(&net),
        old_argmax_preserved: if old.is_empty() { 1.0 } else { kept as f64 / old.len() as f64 },
    };
    Ok((net, report))
}

/// Base training followed by every curriculum step.
pub fn run_curriculum(mode: TransferMode, cfg: &TransferConfig) -> Result<CurriculumResult> {
    let (base, base_report) = train_base(mode, cfg)?;
    let mut known = BASE_CLASSES.to_vec();
    let mut source = base.clone();
    let mut steps = Vec::with_capacity(CURRICULUM.len());
    let mut models = Vec::with_capacity(CURRICULUM.len());
    for (i, &c) in CURRICULUM.iter().enumerate() {
        let (net, report) = transfer_step(&source, &known, c, i, mode, cfg)?;
        log::info!("{mode:?} step {i} +{c}: accuracy {:.4} (lr {})", report.test_accuracy, report.chosen_lr);
        known.push(c);
        steps.push(report);
        models.push(net.clone());
        source = net;
    }
    let samples = steps.iter().map(|s| s.step.samples_per_class).collect();
    Ok(CurriculumResult {
        report: TransferReport { mode, seed: cfg.seed, base: base_report, steps, samples_per_class: samples },
        base,
        models,
    })
}
