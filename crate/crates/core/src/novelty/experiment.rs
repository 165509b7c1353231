use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cnn::{split_known, train_cnn, CnnConfig, CnnModel};
use super::detect::{detect, EmbeddingSet, NoveltyVerdict, DEFAULT_THRESHOLD};
use super::episodes::{pad_episode, ClassSplit, PaddedEpisode};
use crate::classify::ConfusionMatrix;
use crate::error::{Error, Result};
use crate::policy::PolicyQuality;
use crate::rng;
use crate::simworld::{ClassName, Episode, FeatureLayout};

use ClassName::{Capsule, Cube, Cylinder, SmallCube, Sphere};

pub const CONDITIONS: [&[ClassName]; 4] =
    [&[Cube, Sphere], &[Cube, Sphere, Cylinder], &[Cube, Sphere, Capsule], &[Cube, Sphere, Cylinder, Capsule]];
pub const PROBE_CLASSES: [ClassName; 3] = [Cylinder, Capsule, SmallCube];
pub const BATCH_EPISODES: usize = 30;

/// Evaluation episodes per policy quality and class.
pub type Datasets = BTreeMap<PolicyQuality, BTreeMap<ClassName, Vec<Episode>>>;

/// Probe classes that are not part of `known`.
pub fn probes_for(known: &[ClassName]) -> Vec<ClassName> {
    PROBE_CLASSES.iter().copied().filter(|p| !known.contains(p)).collect()
}

/// Small cube is the only probe that should read as a known class.
pub fn expected_novel(probe: ClassName) -> bool {
    probe != SmallCube
}

pub fn condition_name(known: &[ClassName]) -> String {
    known.iter().map(|c| c.as_str()).collect::<Vec<_>>().join("+")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub runs: usize,
    pub threshold: f64,
    pub batch: usize,
    pub single_division: bool,
    /// Train a fresh classifier for every run instead of one per
    /// condition, dataset and layout.
    pub cnn_per_run: bool,
    pub layouts: Vec<FeatureLayout>,
    pub cnn: CnnConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            runs: 10,
            threshold: DEFAULT_THRESHOLD,
            batch: BATCH_EPISODES,
            single_division: false,
            cnn_per_run: false,
            layouts: vec![FeatureLayout::Rl19, FeatureLayout::Rl16NoJitter],
            cnn: CnnConfig::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidInput("runs must be positive".into()));
        }
        if self.batch < super::detect::MIN_BATCH {
            return Err(Error::InvalidInput(format!("batch must be at least {}", super::detect::MIN_BATCH)));
        }
        if !self.threshold.is_finite() || self.layouts.is_empty() {
            return Err(Error::InvalidInput("threshold must be finite and at least one layout given".into()));
        }
        if self.layouts.contains(&FeatureLayout::Freeplay) {
            return Err(Error::InvalidInput("layouts must be rl19 or rl16".into()));
        }
        self.cnn.train.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub condition: String,
    pub dataset: PolicyQuality,
    pub layout: FeatureLayout,
    pub run: usize,
    pub probe: ClassName,
    pub nearest: ClassName,
    pub d: f64,
    pub d_single: f64,
    pub is_novel: bool,
    pub correct: bool,
    pub epsilon_used: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub condition: String,
    pub dataset: PolicyQuality,
    pub layout: FeatureLayout,
    /// `None` pools every probe of the condition.
    pub probe: Option<ClassName>,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DevConfusion {
    pub condition: String,
    pub dataset: PolicyQuality,
    pub layout: FeatureLayout,
    pub confusion: ConfusionMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub trials: Vec<Trial>,
    pub summary: Vec<SummaryRow>,
    pub dev_confusions: Vec<DevConfusion>,
}

/// 95% Wilson score interval.
pub fn wilson_interval(correct: usize, total: usize) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = total as f64;
    let p = correct as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

impl ExperimentResults {
    pub fn accuracy(&self, keep: impl Fn(&Trial) -> bool) -> Option<f64> {
        let sel: Vec<&Trial> = self.trials.iter().filter(|t| keep(t)).collect();
        (!sel.is_empty()).then(|| sel.iter().filter(|t| t.correct).count() as f64 / sel.len() as f64)
    }

    pub fn results_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["condition", "dataset", "layout", "run", "probe", "nearest", "D", "D_single", "verdict", "correct"])?;
        for t in &self.trials {
            w.write_record([
                t.condition.clone(),
                t.dataset.as_str().to_string(),
                t.layout.as_str().to_string(),
                t.run.to_string(),
                t.probe.as_str().to_string(),
                t.nearest.as_str().to_string(),
                format!("{:e}", t.d),
                format!("{:e}", t.d_single),
                if t.is_novel { "novel" } else { "known" }.to_string(),
                t.correct.to_string(),
            ])?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary)?)
    }

    /// Condition-level accuracies as plain text, one row per condition,
    /// dataset and layout.
    pub fn summary_table(&self) -> String {
        let mut out = format!("{:<32} {:<10} {:<6} {:>8} {:>17}\n", "condition", "dataset", "layout", "accuracy", "95% CI");
        for r in self.summary.iter().filter(|r| r.probe.is_none()) {
            out.push_str(&format!(
                "{:<32} {:<10} {:<6} {:>8.3} [{:.3}, {:.3}]\n",
                r.condition,
                r.dataset.as_str(),
                r.layout.as_str(),
                r.accuracy,
                r.ci_low,
                r.ci_high
            ));
        }
        out
    }
}

fn summarize(trials: &[Trial]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, PolicyQuality, &'static str, Option<ClassName>), (usize, usize, FeatureLayout)> =
        BTreeMap::new();
    for t in trials {
        for probe in [None, Some(t.probe)] {
            let e = groups.entry((t.condition.clone(), t.dataset, t.layout.as_str(), probe)).or_insert((0, 0, t.layout));
            e.0 += usize::from(t.correct);
            e.1 += 1;
        }
    }
    groups
        .into_iter()
        .map(|((condition, dataset, _, probe), (correct, total, layout))| {
            let (ci_low, ci_high) = wilson_interval(correct, total);
            SummaryRow { condition, dataset, layout, probe, correct, total, accuracy: correct as f64 / total as f64, ci_low, ci_high }
        })
        .collect()
}

/// Most frequent predicted class; ties go to the earlier class.
pub fn plurality(model: &CnnModel, batch: &[PaddedEpisode]) -> Result<ClassName> {
    let mut votes = vec![0usize; model.classes.len()];
    for p in model.predict(batch)? {
        votes[p] += 1;
    }
    let best = (0..votes.len()).fold(0, |b, i| if votes[i] > votes[b] { i } else { b });
    Ok(model.classes[best])
}

/// Classifies a probe batch, picks its nearest known class and runs the
/// detector against that class's training embeddings.
pub fn detect_batch(
    model: &CnnModel,
    splits: &[ClassSplit],
    batch: &[PaddedEpisode],
    threshold: f64,
    single_division: bool,
) -> Result<(ClassName, NoveltyVerdict)> {
    let nearest = plurality(model, batch)?;
    let split = splits
        .iter()
        .find(|s| s.class == nearest)
        .ok_or_else(|| Error::InvalidInput(format!("no training split for {nearest}")))?;
    let known = EmbeddingSet::new(nearest.as_str(), model.embed(&split.train)?)?;
    let verdict = detect(&known, &model.embed(batch)?, threshold, single_division)?;
    Ok((nearest, verdict))
}

/// Runs every known class's own training embeddings through the detector.
pub fn self_test(model: &CnnModel, splits: &[ClassSplit], threshold: f64) -> Result<Vec<NoveltyVerdict>> {
    splits
        .iter()
        .map(|s| {
            let emb = model.embed(&s.train)?;
            let known = EmbeddingSet::new(s.class.as_str(), emb.clone())?;
            detect(&known, &emb, threshold, false)
        })
        .collect()
}

/// Draws `n` padded episodes of `probe` without replacement.
pub fn probe_batch(episodes: &[Episode], layout: FeatureLayout, n: usize, rng: &mut rng::Rng) -> Result<Vec<PaddedEpisode>> {
    if episodes.len() < n {
        return Err(Error::Insufficient(format!("{} probe episodes available, {n} needed", episodes.len())));
    }
    episodes.choose_multiple(rng, n).map(|e| pad_episode(e, layout)).collect()
}

struct Cell<'a> {
    known: &'a [ClassName],
    dataset: PolicyQuality,
    layout: FeatureLayout,
}

fn run_cell(cell: &Cell<'_>, data: &BTreeMap<ClassName, Vec<Episode>>, cfg: &ExperimentConfig) -> Result<(Vec<Trial>, ConfusionMatrix)> {
    let condition = condition_name(cell.known);
    let key = format!("{condition}/{}/{}", cell.dataset.as_str(), cell.layout.as_str());
    let splits = split_known(cell.known, data, cell.layout)?;
    let cnn_seed = rng::derive(cfg.seed, rng::tag(&format!("cnn/{key}")));
    let shared = if cfg.cnn_per_run { None } else { Some(train_cnn(&splits, cell.layout, &cfg.cnn, cnn_seed)?) };
    let mut confusion: Option<ConfusionMatrix> = None;
    let mut trials = Vec::new();
    for run in 0..cfg.runs {
        let own;
        let model = match &shared {
            Some(m) => m,
            None => {
                own = train_cnn(&splits, cell.layout, &cfg.cnn, rng::derive(cnn_seed, run as u64))?;
                &own
            }
        };
        if cfg.cnn_per_run || run == 0 {
            confusion = Some(match confusion {
                None => model.dev_confusion.clone(),
                Some(mut c) => {
                    for (row, add) in c.counts.iter_mut().zip(&model.dev_confusion.counts) {
                        row.iter_mut().zip(add).for_each(|(a, b)| *a += b);
                    }
                    c
                }
            });
        }
        for probe in probes_for(cell.known) {
            let eps = data.get(&probe).ok_or_else(|| Error::Insufficient(format!("no evaluation episodes for {probe}")))?;
            let mut r = rng::stream(rng::derive(cfg.seed, rng::tag(&format!("probe/{key}/{}", probe.as_str()))), run as u64);
            let batch = probe_batch(eps, cell.layout, cfg.batch, &mut r)?;
            let (nearest, v) = detect_batch(model, &splits, &batch, cfg.threshold, cfg.single_division)?;
            if v.epsilon_used {
                log::warn!("{key} run {run} probe {probe}: known outlier mass was zero");
            }
            trials.push(Trial {
                condition: condition.clone(),
                dataset: cell.dataset,
                layout: cell.layout,
                run,
                probe,
                nearest,
                d: v.d,
                d_single: v.d_single,
                is_novel: v.is_novel,
                correct: v.is_novel == expected_novel(probe),
                epsilon_used: v.epsilon_used,
            });
        }
    }
    Ok((trials, confusion.expect("at least one run")))
}

/// Every condition, dataset and layout, `cfg.runs` detection runs each.
pub fn run_experiment_matrix(datasets: &Datasets, cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for known in CONDITIONS {
        for &dataset in datasets.keys() {
            for &layout in &cfg.layouts {
                cells.push(Cell { known, dataset, layout });
            }
        }
    }
    let outs: Vec<(Vec<Trial>, ConfusionMatrix)> =
        cells.par_iter().map(|c| run_cell(c, &datasets[&c.dataset], cfg)).collect::<Result<_>>()?;
    let mut trials = Vec::new();
    let mut dev_confusions = Vec::new();
    for (cell, (t, confusion)) in cells.iter().zip(outs) {
        trials.extend(t);
        dev_confusions.push(DevConfusion { condition: condition_name(cell.known), dataset: cell.dataset, layout: cell.layout, confusion });
    }
    let summary = summarize(&trials);
    Ok(ExperimentResults { config: cfg.clone(), trials, summary, dev_confusions })
}
