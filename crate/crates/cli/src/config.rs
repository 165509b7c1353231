//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are
//! dot-separated paths such as `baseline.epochs`; see [`Settings::entries`]
//! for the full schema with defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use stackplay::expand::FreezePolicy;
use stackplay::simworld::FeatureLayout;

#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}, field `{}`: {}", self.field, self.message),
            None => write!(f, "config field `{}`: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub freeplay_per_class: usize,
    pub baseline_train_per_class: usize,
    pub baseline_test_per_class: usize,
    pub baseline_epochs: usize,
    pub baseline_lr: f64,
    pub baseline_batch_size: usize,
    pub baseline_weight_decay: f64,
    pub mds_points: usize,
    pub transfer_base_samples: usize,
    pub transfer_epochs: usize,
    pub transfer_batch_size: usize,
    pub transfer_finetune_total: usize,
    pub transfer_test_per_class: usize,
    pub transfer_freeze: FreezePolicy,
    pub concept_train_per_label: usize,
    pub concept_test_per_label: usize,
    pub concept_epochs: usize,
    pub rl_max_steps: u64,
    pub rl_warmup: u64,
    pub rl_explore_noise: f64,
    pub rl_eval_timesteps: usize,
    pub cnn_epochs: usize,
    pub cnn_lr: f64,
    pub novelty_runs: usize,
    pub novelty_threshold: f64,
    pub novelty_batch: usize,
    pub novelty_single_division: bool,
    pub novelty_cnn_per_run: bool,
    pub novelty_layouts: Vec<FeatureLayout>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: 0,
            freeplay_per_class: 2000,
            baseline_train_per_class: 1600,
            baseline_test_per_class: 400,
            baseline_epochs: 200,
            baseline_lr: 1e-4,
            baseline_batch_size: 32,
            baseline_weight_decay: 0.01,
            mds_points: 200,
            transfer_base_samples: 5000,
            transfer_epochs: 100,
            transfer_batch_size: 32,
            transfer_finetune_total: 600,
            transfer_test_per_class: 200,
            transfer_freeze: FreezePolicy::OriginalTwo,
            concept_train_per_label: 300,
            concept_test_per_label: 60,
            concept_epochs: 100,
            rl_max_steps: 200_000,
            rl_warmup: 500,
            rl_explore_noise: 0.2,
            rl_eval_timesteps: 1000,
            cnn_epochs: 500,
            cnn_lr: 1e-3,
            novelty_runs: 10,
            novelty_threshold: 25.0,
            novelty_batch: 30,
            novelty_single_division: false,
            novelty_cnn_per_run: false,
            novelty_layouts: vec![FeatureLayout::Rl19, FeatureLayout::Rl16NoJitter],
        }
    }
}

fn parse<T: FromStr>(v: &str, what: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("expected {what}, got `{v}`"))
}

fn positive(v: &str) -> Result<usize, String> {
    match parse::<usize>(v, "a positive integer")? {
        0 => Err("must be positive".into()),
        n => Ok(n),
    }
}

fn finite(v: &str, what: &str) -> Result<f64, String> {
    let x: f64 = parse(v, what)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("expected {what}, got `{v}`"))
    }
}

fn rate(v: &str) -> Result<f64, String> {
    let x = finite(v, "a positive number")?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err("must be positive".into())
    }
}

fn freeze_str(p: FreezePolicy) -> &'static str {
    match p {
        FreezePolicy::OriginalTwo => "original_two",
        FreezePolicy::AllButNew => "all_but_new",
    }
}

impl Settings {
    /// Sets one field by its key path.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        let r: Result<(), String> = (|| {
            match key {
                "seed" => self.seed = parse(v, "an unsigned integer")?,
                "freeplay.per_class" => self.freeplay_per_class = positive(v)?,
                "baseline.train_per_class" => self.baseline_train_per_class = positive(v)?,
                "baseline.test_per_class" => self.baseline_test_per_class = positive(v)?,
                "baseline.epochs" => self.baseline_epochs = positive(v)?,
                "baseline.lr" => self.baseline_lr = rate(v)?,
                "baseline.batch_size" => self.baseline_batch_size = positive(v)?,
                "baseline.weight_decay" => self.baseline_weight_decay = finite(v, "a number")?,
                "mds.points" => self.mds_points = positive(v)?,
                "transfer.base_samples" => self.transfer_base_samples = positive(v)?,
                "transfer.epochs" => self.transfer_epochs = positive(v)?,
                "transfer.batch_size" => self.transfer_batch_size = positive(v)?,
                "transfer.finetune_total" => self.transfer_finetune_total = positive(v)?,
                "transfer.test_per_class" => self.transfer_test_per_class = positive(v)?,
                "transfer.freeze" => {
                    self.transfer_freeze = match v {
                        "original_two" => FreezePolicy::OriginalTwo,
                        "all_but_new" => FreezePolicy::AllButNew,
                        _ => return Err(format!("expected original_two or all_but_new, got `{v}`")),
                    }
                }
                "concept.train_per_label" => self.concept_train_per_label = positive(v)?,
                "concept.test_per_label" => self.concept_test_per_label = positive(v)?,
                "concept.epochs" => self.concept_epochs = positive(v)?,
                "rl.max_steps" => self.rl_max_steps = positive(v)? as u64,
                "rl.warmup" => self.rl_warmup = parse(v, "an unsigned integer")?,
                "rl.explore_noise" => self.rl_explore_noise = finite(v, "a number")?,
                "rl.eval_timesteps" => self.rl_eval_timesteps = positive(v)?,
                "cnn.epochs" => self.cnn_epochs = positive(v)?,
                "cnn.lr" => self.cnn_lr = rate(v)?,
                "novelty.runs" => self.novelty_runs = positive(v)?,
                "novelty.threshold" => self.novelty_threshold = finite(v, "a number")?,
                "novelty.batch" => self.novelty_batch = positive(v)?,
                "novelty.single_division" => self.novelty_single_division = parse(v, "true or false")?,
                "novelty.cnn_per_run" => self.novelty_cnn_per_run = parse(v, "true or false")?,
                "novelty.layouts" => {
                    let layouts = v
                        .split(',')
                        .map(|s| match s.trim().parse::<FeatureLayout>() {
                            Ok(l) if l != FeatureLayout::Freeplay => Ok(l),
                            _ => Err(format!("expected a list of rl19/rl16, got `{v}`")),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    self.novelty_layouts = layouts;
                }
                _ => return Err("unknown key".into()),
            }
            Ok(())
        })();
        r.map_err(|message| ConfigError { field: key.to_string(), line: None, message })
    }

    pub fn parse_str(text: &str) -> Result<Settings, ConfigError> {
        let mut s = Settings::default();
        s.apply_str(text)?;
        Ok(s)
    }

    pub fn apply_str(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError { field: line.to_string(), line: Some(i + 1), message: "expected `key = value`".into() });
            };
            self.set(k.trim(), v).map_err(|e| ConfigError { line: Some(i + 1), ..e })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Settings, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            field: path.display().to_string(),
            line: None,
            message: format!("cannot read config file: {e}"),
        })?;
        Settings::parse_str(&text)
    }

    /// Every key with its effective value, in key order.
    pub fn entries(&self) -> BTreeMap<String, String> {
        let layouts: Vec<&str> = self.novelty_layouts.iter().map(|l| l.as_str()).collect();
        [
            ("seed", self.seed.to_string()),
            ("freeplay.per_class", self.freeplay_per_class.to_string()),
            ("baseline.train_per_class", self.baseline_train_per_class.to_string()),
            ("baseline.test_per_class", self.baseline_test_per_class.to_string()),
            ("baseline.epochs", self.baseline_epochs.to_string()),
            ("baseline.lr", self.baseline_lr.to_string()),
            ("baseline.batch_size", self.baseline_batch_size.to_string()),
            ("baseline.weight_decay", self.baseline_weight_decay.to_string()),
            ("mds.points", self.mds_points.to_string()),
            ("transfer.base_samples", self.transfer_base_samples.to_string()),
            ("transfer.epochs", self.transfer_epochs.to_string()),
            ("transfer.batch_size", self.transfer_batch_size.to_string()),
            ("transfer.finetune_total", self.transfer_finetune_total.to_string()),
            ("transfer.test_per_class", self.transfer_test_per_class.to_string()),
            ("transfer.freeze", freeze_str(self.transfer_freeze).to_string()),
            ("concept.train_per_label", self.concept_train_per_label.to_string()),
            ("concept.test_per_label", self.concept_test_per_label.to_string()),
            ("concept.epochs", self.concept_epochs.to_string()),
            ("rl.max_steps", self.rl_max_steps.to_string()),
            ("rl.warmup", self.rl_warmup.to_string()),
            ("rl.explore_noise", self.rl_explore_noise.to_string()),
            ("rl.eval_timesteps", self.rl_eval_timesteps.to_string()),
            ("cnn.epochs", self.cnn_epochs.to_string()),
            ("cnn.lr", self.cnn_lr.to_string()),
            ("novelty.runs", self.novelty_runs.to_string()),
            ("novelty.threshold", self.novelty_threshold.to_string()),
            ("novelty.batch", self.novelty_batch.to_string()),
            ("novelty.single_division", self.novelty_single_division.to_string()),
            ("novelty.cnn_per_run", self.novelty_cnn_per_run.to_string()),
            ("novelty.layouts", layouts.join(",")),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_round_trip_through_the_parser() {
        let mut s = Settings::default();
        s.set("baseline.lr", "3e-4").unwrap();
        s.set("novelty.layouts", "rl16").unwrap();
        s.set("transfer.freeze", "all_but_new").unwrap();
        let text: String = s.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        assert_eq!(Settings::parse_str(&text).unwrap(), s);
    }

    #[test]
    fn errors_name_the_field() {
        let e = Settings::parse_str("# c\n\ncnn.epochs = ten\n").unwrap_err();
        assert_eq!(e.field, "cnn.epochs");
        assert_eq!(e.line, Some(3));
        assert!(e.to_string().contains("cnn.epochs"));
        assert_eq!(Settings::parse_str("cnn.epoch = 3").unwrap_err().message, "unknown key");
        assert!(Settings::parse_str("novelty.layouts = rl19,freeplay").is_err());
        assert!(Settings::parse_str("baseline.lr = -1").is_err());
        assert!(Settings::parse_str("just words").is_err());
    }
}
