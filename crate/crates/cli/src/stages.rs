//! One function per subcommand. Each verifies its upstream artifacts against
//! their manifests, runs the step and records what it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use stackplay::classify::{
    confusion_csv, confusion_svg, embed_last_hidden, embedding_csv, embedding_svg, split_records, train_baseline,
    BaselineConfig, ConfusionMatrix,
};
use stackplay::expand::{
    run_curriculum, train_concept_head, ConceptConfig, TransferConfig, TransferMode, BASE_CLASSES, CURRICULUM,
};
use stackplay::novelty::{
    condition_name, detect_batch, expected_novel, probe_batch, self_test, split_known, train_cnn, CnnConfig, CnnModel,
    Datasets, ExperimentConfig,
};
use stackplay::plot::{bar_svg, line_svg, plot_csv};
use stackplay::policy::{curve_csv, curve_svg, evaluate_policy, PolicyCheckpoint, PolicyQuality, Td3Config, EVAL_CLASSES};
use stackplay::rng;
use stackplay::simworld::{
    generate_freeplay, group_episodes, read_records_csv, write_records_csv, AttemptRecord, ClassName, DatasetManifest,
    Episode, FeatureLayout,
};
use stackplay::tensornn::{NetworkCheckpoint, TrainMeta};

use crate::config::Settings;
use crate::error::CliError;
use crate::manifest::{Manifest, StageRecord};

type Res<T> = Result<T, CliError>;

pub struct Ctx {
    pub out: PathBuf,
    pub settings: Settings,
}

impl Ctx {
    fn record(&self, dir: impl Into<PathBuf>, stage: &str) -> Res<StageRecord<'_>> {
        StageRecord::new(&self.out, dir, stage, self.settings.seed, self.settings.entries())
    }
}

const FREEPLAY: &str = "freeplay";
const BASELINE: &str = "baseline";
const RL_TRAIN: &str = "rl/train";

fn transfer_dir(mode: TransferMode) -> String {
    format!("transfer/{}", mode_str(mode))
}

fn mode_str(mode: TransferMode) -> &'static str {
    match mode {
        TransferMode::Dynamic => "dynamic",
        TransferMode::Static => "static",
    }
}

fn eval_dir(policy: PolicyQuality, class: ClassName) -> String {
    format!("rl/eval/{}/{}", policy.as_str(), class.as_str())
}

fn eval_file(policy: PolicyQuality, class: ClassName) -> String {
    format!("eval_{}_{}.csv", policy.as_str(), class.as_str())
}

fn cnn_dir(policy: PolicyQuality, layout: FeatureLayout, known: &[ClassName]) -> String {
    format!("novelty/cnn/{}/{}/{}", policy.as_str(), layout.as_str(), condition_name(known))
}

/// Transfer checkpoints are named by the class set they cover.
fn class_set_checkpoint(classes: &[String]) -> String {
    format!("checkpoint_{}.json", classes.join("-"))
}

/// Checkpoint written by the last curriculum step.
pub fn final_step_checkpoint() -> String {
    let all: Vec<String> = BASE_CLASSES.iter().chain(&CURRICULUM).map(|c| c.as_str().to_string()).collect();
    class_set_checkpoint(&all)
}

fn records_csv(records: &[AttemptRecord]) -> Res<Vec<u8>> {
    let mut buf = Vec::new();
    write_records_csv(&mut buf, records)?;
    Ok(buf)
}

fn read_records(path: &Path) -> Res<Vec<AttemptRecord>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::pipeline(format!("cannot open {}: {e}", path.display())))?;
    Ok(read_records_csv(std::io::BufReader::new(file))?)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Res<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::pipeline(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::pipeline(format!("malformed {}: {e}", path.display())))
}

fn loss_csv(losses: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in losses.iter().enumerate() {
        s.push_str(&format!("{},{l}\n", i + 1));
    }
    s
}

fn write_confusion(rec: &mut StageRecord<'_>, m: &ConfusionMatrix, stem: &str) -> Res<()> {
    rec.write_bytes(&format!("{stem}.csv"), confusion_csv(m).as_bytes())?;
    rec.write_bytes(&format!("{stem}.svg"), confusion_svg(m).as_bytes())
}

fn write_loss(rec: &mut StageRecord<'_>, losses: &[f64]) -> Res<()> {
    rec.write_bytes("loss.csv", loss_csv(losses).as_bytes())?;
    let pts: Vec<(f64, f64)> = losses.iter().enumerate().map(|(i, &l)| ((i + 1) as f64, l)).collect();
    rec.write_bytes("loss.svg", line_svg(&pts, "epoch", "training loss").as_bytes())
}

pub fn baseline_config(s: &Settings) -> BaselineConfig {
    let mut cfg = BaselineConfig {
        train_per_class: s.baseline_train_per_class,
        test_per_class: s.baseline_test_per_class,
        mds_points: s.mds_points,
        seed: s.seed,
        ..BaselineConfig::default()
    };
    cfg.train.epochs = s.baseline_epochs;
    cfg.train.lr = s.baseline_lr;
    cfg.train.batch_size = s.baseline_batch_size;
    cfg.train.weight_decay = s.baseline_weight_decay;
    cfg
}

pub fn transfer_config(s: &Settings) -> TransferConfig {
    let mut cfg = TransferConfig {
        base_samples: s.transfer_base_samples,
        finetune_total: s.transfer_finetune_total,
        test_per_class: s.transfer_test_per_class,
        freeze: s.transfer_freeze,
        seed: s.seed,
        ..TransferConfig::default()
    };
    for t in [&mut cfg.base_train, &mut cfg.finetune_train] {
        t.epochs = s.transfer_epochs;
        t.batch_size = s.transfer_batch_size;
    }
    cfg
}

pub fn concept_config(s: &Settings) -> ConceptConfig {
    let mut cfg = ConceptConfig {
        train_per_label: s.concept_train_per_label,
        test_per_label: s.concept_test_per_label,
        freeze: s.transfer_freeze,
        seed: s.seed,
        ..ConceptConfig::default()
    };
    cfg.train.epochs = s.concept_epochs;
    cfg
}

pub fn td3_config(s: &Settings) -> Td3Config {
    Td3Config {
        max_steps: s.rl_max_steps,
        warmup_steps: s.rl_warmup,
        explore_noise: s.rl_explore_noise,
        seed: s.seed,
        ..Td3Config::default()
    }
}

pub fn cnn_config(s: &Settings) -> CnnConfig {
    let mut cfg = CnnConfig::default();
    cfg.train.epochs = s.cnn_epochs;
    cfg.train.lr = s.cnn_lr;
    cfg
}

pub fn experiment_config(s: &Settings) -> ExperimentConfig {
    ExperimentConfig {
        runs: s.novelty_runs,
        threshold: s.novelty_threshold,
        batch: s.novelty_batch,
        single_division: s.novelty_single_division,
        cnn_per_run: s.novelty_cnn_per_run,
        layouts: s.novelty_layouts.clone(),
        cnn: cnn_config(s),
        seed: s.seed,
    }
}

pub fn gen_freeplay(ctx: &Ctx) -> Res<Manifest> {
    let s = &ctx.settings;
    let mut rec = ctx.record(FREEPLAY, "gen-freeplay")?;
    let data: Vec<(ClassName, Vec<AttemptRecord>)> = ClassName::ALL
        .par_iter()
        .map(|&c| generate_freeplay(c, s.freeplay_per_class, s.seed).map(|r| (c, r)))
        .collect::<Result<_, _>>()?;
    for (c, recs) in &data {
        rec.write_bytes(&format!("{}.csv", c.as_str()), &records_csv(recs)?)?;
    }
    rec.write_json("dataset.json", &DatasetManifest::new(s.seed, data.iter().map(|(c, r)| (*c, r.len()))))?;
    rec.finish()
}

/// Loads every free-play class and warns where counts disagree with the
/// dataset sidecar.
fn load_freeplay(rec: &mut StageRecord<'_>) -> Res<BTreeMap<ClassName, Vec<AttemptRecord>>> {
    let sidecar: DatasetManifest = read_json(&rec.require(FREEPLAY, "dataset.json", "gen-freeplay")?)?;
    let mut by_class = BTreeMap::new();
    for c in ClassName::ALL {
        let records = read_records(&rec.require(FREEPLAY, &format!("{}.csv", c.as_str()), "gen-freeplay")?)?;
        let expected = sidecar.class_counts.get(c.as_str()).copied().unwrap_or(0);
        if records.len() != expected {
            log::warn!("{c}: {} records on disk, dataset manifest says {expected}", records.len());
        }
        by_class.insert(c, records);
    }
    Ok(by_class)
}

pub fn train_baseline_stage(ctx: &Ctx) -> Res<Manifest> {
    let mut rec = ctx.record(BASELINE, "train-baseline")?;
    let by_class = load_freeplay(&mut rec)?;
    let cfg = baseline_config(&ctx.settings);
    let (train, test) = split_records(&by_class, &cfg.classes, cfg.train_per_class, cfg.test_per_class, cfg.seed)?;
    let res = train_baseline(&train, &test, &cfg)?;
    log::info!("baseline test accuracy {:.4}", res.metrics.accuracy);
    rec.write_bytes("checkpoint.json", res.checkpoint.to_json()?.as_bytes())?;
    write_confusion(&mut rec, &res.confusion, "confusion")?;
    rec.write_json(
        "metrics.json",
        &json!({
            "metrics": res.metrics,
            "train_rows": train.samples.len(),
            "test_rows": test.samples.len(),
            "cone_pyramid_mutual": res.confusion.mutual("cone", "pyramid"),
            "cone_cube_mutual": res.confusion.mutual("cone", "cube"),
        }),
    )?;
    write_loss(&mut rec, &res.loss_history)?;
    rec.finish()
}

pub fn mds_stage(ctx: &Ctx) -> Res<Manifest> {
    let mut rec = ctx.record("mds", "mds")?;
    let ckpt = NetworkCheckpoint::from_json(&std::fs::read_to_string(rec.require(BASELINE, "checkpoint.json", "train-baseline")?)
        .map_err(|e| CliError::pipeline(e.to_string()))?)?;
    let by_class = load_freeplay(&mut rec)?;
    let cfg = baseline_config(&ctx.settings);
    let (_, test) = split_records(&by_class, &cfg.classes, cfg.train_per_class, cfg.test_per_class, cfg.seed)?;
    let emb = embed_last_hidden(&ckpt.network, &test, cfg.mds_points)?;
    rec.write_bytes("mds.csv", embedding_csv(&emb).as_bytes())?;
    rec.write_bytes("mds.svg", embedding_svg(&emb).as_bytes())?;
    let centroids: BTreeMap<&str, Option<[f64; 2]>> = cfg.classes.iter().map(|c| (c.as_str(), emb.centroid(c.as_str()))).collect();
    rec.write_json(
        "mds_summary.json",
        &json!({ "points": emb.coords.len(), "stress": emb.stress, "eigenvalues": emb.eigenvalues, "centroids": centroids }),
    )?;
    rec.finish()
}

pub fn transfer_stage(ctx: &Ctx, mode: TransferMode) -> Res<Manifest> {
    let mut rec = ctx.record(transfer_dir(mode), "transfer")?;
    rec.arg("mode", mode_str(mode));
    let cfg = transfer_config(&ctx.settings);
    let res = run_curriculum(mode, &cfg)?;
    let report = &res.report;
    let ckpt = |net: &stackplay::tensornn::Network, classes: &[String], lr: f64| {
        NetworkCheckpoint::new(
            net.clone(),
            None,
            TrainMeta { epochs: cfg.finetune_train.epochs, lr, seed: cfg.seed, class_names: classes.to_vec(), ..TrainMeta::default() },
        )
        .to_json()
    };
    rec.write_bytes(&class_set_checkpoint(&report.base.classes), &ckpt(&res.base, &report.base.classes, report.base.chosen_lr)?.into_bytes())?;
    write_confusion(&mut rec, &report.base.confusion, "confusion_base")?;
    let mut acc = String::from("step,new_class,classes,samples_per_class,test_accuracy\n");
    acc.push_str(&format!("0,,{},,{}\n", BASE_CLASSES.len(), report.base.test_accuracy));
    let mut pts = vec![(0.0, report.base.test_accuracy)];
    for (i, (step, net)) in report.steps.iter().zip(&res.models).enumerate() {
        let stem = format!("step{}_{}", i + 1, step.step.new_class.as_str());
        rec.write_bytes(&class_set_checkpoint(&step.classes), ckpt(net, &step.classes, step.chosen_lr)?.as_bytes())?;
        write_confusion(&mut rec, &step.confusion, &format!("confusion_{stem}"))?;
        acc.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            step.step.new_class.as_str(),
            step.classes.len(),
            step.step.samples_per_class,
            step.test_accuracy
        ));
        pts.push(((i + 1) as f64, step.test_accuracy));
    }
    rec.write_bytes("accuracy.csv", acc.as_bytes())?;
    rec.write_bytes("accuracy.svg", line_svg(&pts, "curriculum step", "test accuracy").as_bytes())?;
    rec.write_json("transfer_report.json", report)?;
    log::info!("{} transfer final accuracy {:.4}", mode_str(mode), report.final_accuracy());
    rec.finish()
}

pub fn concept_stage(ctx: &Ctx) -> Res<Manifest> {
    let mut rec = ctx.record("concept", "concept")?;
    let path = rec.require(transfer_dir(TransferMode::Dynamic), &final_step_checkpoint(), "transfer --mode dynamic")?;
    let source: NetworkCheckpoint = NetworkCheckpoint::from_json(&std::fs::read_to_string(path).map_err(|e| CliError::pipeline(e.to_string()))?)?;
    let cfg = concept_config(&ctx.settings);
    let (net, report) = train_concept_head(&source.network, &cfg)?;
    let meta = TrainMeta {
        epochs: cfg.train.epochs,
        lr: report.chosen_lr,
        seed: cfg.seed,
        class_names: report.confusion.classes.clone(),
        ..TrainMeta::default()
    };
    rec.write_bytes("checkpoint.json", NetworkCheckpoint::new(net, None, meta).to_json()?.as_bytes())?;
    write_confusion(&mut rec, &report.confusion, "confusion")?;
    rec.write_json("report.json", &report)?;
    log::info!("concept head accuracy {:.4}, rule agreement {:.4}", report.test_accuracy, report.rule_agreement);
    rec.finish()
}

pub fn rl_train(ctx: &Ctx) -> Res<Manifest> {
    let mut rec = ctx.record(RL_TRAIN, "rl-train")?;
    let cfg = td3_config(&ctx.settings);
    let out = stackplay::policy::td3_train(&cfg)?;
    match &out.accurate {
        Some(p) => rec.write_bytes("policy_accurate.json", p.to_json()?.as_bytes())?,
        None => log::warn!("accurate threshold not reached within {} steps; no accurate policy written", cfg.max_steps),
    }
    rec.write_bytes("policy_imprecise.json", out.imprecise.to_json()?.as_bytes())?;
    rec.write_bytes("reward_curve.csv", curve_csv(&out.curve).as_bytes())?;
    rec.write_bytes("reward_curve.svg", curve_svg(&out.curve).as_bytes())?;
    rec.write_json(
        "summary.json",
        &json!({
            "steps": out.steps,
            "episodes": out.curve.len(),
            "accurate_found": out.accurate.is_some(),
            "final_rolling_success": out.curve.last().map(|p| p.rolling_success),
        }),
    )?;
    rec.finish()
}

pub fn rl_eval(ctx: &Ctx, policy: PolicyQuality, class: Option<ClassName>) -> Res<Vec<Manifest>> {
    let s = &ctx.settings;
    let classes = class.map_or_else(|| EVAL_CLASSES.to_vec(), |c| vec![c]);
    let name = format!("policy_{}.json", policy.as_str());
    let (path, _) = crate::manifest::verify(&ctx.out, Path::new(RL_TRAIN), &name, "rl-train")?;
    let ckpt = PolicyCheckpoint::load(&path)?;
    let results: Vec<_> = classes
        .par_iter()
        .map(|&c| evaluate_policy(&ckpt, c, s.rl_eval_timesteps, s.seed))
        .collect::<Result<_, _>>()?;
    let mut manifests = Vec::new();
    for res in results {
        let mut rec = ctx.record(eval_dir(policy, res.class), "rl-eval")?;
        rec.arg("policy", policy.as_str());
        rec.arg("class", res.class.as_str());
        rec.require(RL_TRAIN, &name, "rl-train")?;
        let records: Vec<AttemptRecord> = res.episodes.iter().flat_map(|e| e.records.iter().cloned()).collect();
        rec.write_bytes(&eval_file(policy, res.class), &records_csv(&records)?)?;
        rec.write_json(
            "summary.json",
            &json!({
                "class": res.class,
                "policy": policy,
                "timesteps": res.timesteps,
                "episodes": res.episodes.len(),
                "successes": res.successes(),
                "mean_episode_reward": res.mean_episode_reward(),
            }),
        )?;
        log::info!("{} on {}: {} episodes, mean reward {:.1}", policy.as_str(), res.class, res.episodes.len(), res.mean_episode_reward());
        manifests.push(rec.finish()?);
    }
    Ok(manifests)
}

fn load_episodes(rec: &mut StageRecord<'_>, policy: PolicyQuality, class: ClassName) -> Res<Vec<Episode>> {
    let producer = format!("rl-eval --policy {} --class {}", policy.as_str(), class.as_str());
    let path = rec.require(eval_dir(policy, class), &eval_file(policy, class), &producer)?;
    Ok(group_episodes(&read_records(&path)?)?)
}

fn load_known(rec: &mut StageRecord<'_>, policy: PolicyQuality, classes: &[ClassName]) -> Res<BTreeMap<ClassName, Vec<Episode>>> {
    classes.iter().map(|&c| Ok((c, load_episodes(rec, policy, c)?))).collect()
}

fn cnn_key(known: &[ClassName], policy: PolicyQuality, layout: FeatureLayout) -> String {
    format!("{}/{}/{}", condition_name(known), policy.as_str(), layout.as_str())
}

fn check_known(known: &[ClassName]) -> Res<()> {
    if known.len() < 2 {
        return Err(CliError::usage("--known needs at least two classes"));
    }
    if let Some(c) = known.iter().find(|c| !EVAL_CLASSES.contains(c)) {
        return Err(CliError::usage(format!("{c} has no policy-evaluation data; choose from cube, sphere, cylinder, capsule, small_cube")));
    }
    Ok(())
}

pub fn train_cnn_stage(ctx: &Ctx, known: &[ClassName], layout: FeatureLayout, policy: PolicyQuality) -> Res<Manifest> {
    check_known(known)?;
    let s = &ctx.settings;
    let mut rec = ctx.record(cnn_dir(policy, layout, known), "train-cnn")?;
    rec.arg("known", condition_name(known));
    rec.arg("layout", layout);
    rec.arg("policy", policy.as_str());
    let data = load_known(&mut rec, policy, known)?;
    let splits = split_known(known, &data, layout)?;
    let seed = rng::derive(s.seed, rng::tag(&format!("cnn/{}", cnn_key(known, policy, layout))));
    let model = train_cnn(&splits, layout, &cnn_config(s), seed)?;
    let checks = self_test(&model, &splits, s.novelty_threshold)?;
    rec.write_json("cnn.json", &model)?;
    write_confusion(&mut rec, &model.dev_confusion, "dev_confusion")?;
    write_loss(&mut rec, &model.loss_history)?;
    rec.write_json("self_test.json", &checks)?;
    log::info!("cnn {}: dev accuracy {:.4}", cnn_key(known, policy, layout), model.dev_confusion.accuracy());
    rec.finish()
}

pub fn detect_stage(
    ctx: &Ctx,
    probe: ClassName,
    known: &[ClassName],
    layout: FeatureLayout,
    policy: PolicyQuality,
    run: usize,
) -> Res<Manifest> {
    check_known(known)?;
    if known.contains(&probe) {
        return Err(CliError::usage(format!("probe {probe} is one of the known classes")));
    }
    let s = &ctx.settings;
    let cdir = cnn_dir(policy, layout, known);
    let mut rec = ctx.record(format!("novelty/detect/{}/{}/{}/{}_run{run}", policy.as_str(), layout.as_str(), condition_name(known), probe.as_str()), "detect")?;
    rec.arg("probe", probe.as_str());
    rec.arg("known", condition_name(known));
    rec.arg("layout", layout);
    rec.arg("policy", policy.as_str());
    rec.arg("run", run);
    let producer = format!("train-cnn --known {} --layout {} --policy {}", known.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(","), layout, policy.as_str());
    let model: CnnModel = read_json(&rec.require(&cdir, "cnn.json", &producer)?)?;
    let data = load_known(&mut rec, policy, known)?;
    let splits = split_known(known, &data, layout)?;
    let probe_eps = load_episodes(&mut rec, policy, probe)?;
    let key = cnn_key(known, policy, layout);
    let mut r = rng::stream(rng::derive(s.seed, rng::tag(&format!("probe/{key}/{}", probe.as_str()))), run as u64);
    let batch = probe_batch(&probe_eps, layout, s.novelty_batch, &mut r)?;
    let (nearest, verdict) = detect_batch(&model, &splits, &batch, s.novelty_threshold, s.novelty_single_division)?;
    let ids: Vec<u64> = batch.iter().map(|e| e.episode_id).collect();
    rec.write_json(
        "verdict.json",
        &json!({
            "probe": probe,
            "nearest": nearest,
            "expected_novel": expected_novel(probe),
            "correct": verdict.is_novel == expected_novel(probe),
            "batch_episode_ids": ids,
            "verdict": verdict,
        }),
    )?;
    log::info!("{key} probe {probe}: D = {:.3}, novel = {}", verdict.d, verdict.is_novel);
    rec.finish()
}

pub fn experiments(ctx: &Ctx) -> Res<Manifest> {
    let mut rec = ctx.record("novelty/experiments", "experiments")?;
    let mut datasets = Datasets::new();
    for policy in [PolicyQuality::Accurate, PolicyQuality::Imprecise] {
        datasets.insert(policy, load_known(&mut rec, policy, &EVAL_CLASSES)?);
    }
    let cfg = experiment_config(&ctx.settings);
    let res = stackplay::novelty::run_experiment_matrix(&datasets, &cfg)?;
    rec.write_bytes("novelty_results.csv", res.results_csv()?.as_bytes())?;
    rec.write_bytes("novelty_summary.json", res.summary_json()?.as_bytes())?;
    let table = res.summary_table();
    rec.write_bytes("summary.txt", table.as_bytes())?;
    let bars: Vec<(String, f64, Option<(f64, f64)>)> = res
        .summary
        .iter()
        .filter(|r| r.probe.is_none())
        .map(|r| (format!("{} {} {}", r.condition, r.dataset.as_str(), r.layout), r.accuracy, Some((r.ci_low, r.ci_high))))
        .collect();
    rec.write_bytes("accuracy.svg", bar_svg(&bars, "novel-class identification accuracy").as_bytes())?;
    for dc in &res.dev_confusions {
        let stem = format!("confusions/{}_{}_{}", dc.condition, dc.dataset.as_str(), dc.layout);
        write_confusion(&mut rec, &dc.confusion, &stem)?;
    }
    println!("{table}");
    rec.finish()
}

/// Renders a CSV as SVG next to it (or at `output`).
pub fn plot(input: &Path, output: Option<&Path>) -> Res<PathBuf> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::pipeline(format!("cannot read {}: {e}", input.display())))?;
    let svg = plot_csv(&text)?;
    let out = output.map_or_else(|| input.with_extension("svg"), Path::to_path_buf);
    std::fs::write(&out, svg).map_err(|e| CliError::pipeline(format!("cannot write {}: {e}", out.display())))?;
    Ok(out)
}

/// Every stage from free play to the experiment matrix.
pub fn pipeline(ctx: &Ctx) -> Res<()> {
    gen_freeplay(ctx)?;
    train_baseline_stage(ctx)?;
    mds_stage(ctx)?;
    transfer_stage(ctx, TransferMode::Dynamic)?;
    transfer_stage(ctx, TransferMode::Static)?;
    concept_stage(ctx)?;
    rl_train(ctx)?;
    for policy in [PolicyQuality::Accurate, PolicyQuality::Imprecise] {
        rl_eval(ctx, policy, None)?;
    }
    experiments(ctx)?;
    Ok(())
}
