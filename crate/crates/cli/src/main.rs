//! `stackplay` command-line pipeline.

mod config;
mod error;
mod manifest;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stackplay::expand::TransferMode;
use stackplay::policy::PolicyQuality;
use stackplay::simworld::{parse_class_list, ClassName, FeatureLayout};

use config::Settings;
use error::CliError;
use stages::Ctx;

#[derive(Parser, Debug)]
#[command(name = "stackplay", version, about = "Stacking-play simulation, behaviour classifiers and novel-class detection")]
struct Cli {
    /// Root directory for every artifact.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides `seed` from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// `key=value` override applied after the config file; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate free-play attempt CSVs for all nine classes.
    GenFreeplay,
    /// Train the nine-way behaviour classifier.
    TrainBaseline,
    /// MDS of the baseline's last hidden layer.
    Mds,
    /// Class-incremental transfer curriculum.
    Transfer {
        #[arg(long, value_parser = parse_mode)]
        mode: TransferMode,
    },
    /// Flat/round concept head on the final dynamic model.
    Concept,
    /// Train the TD3 cube-stacking policy.
    RlTrain,
    /// Greedy evaluation of a trained policy.
    RlEval {
        #[arg(long, value_parser = parse_policy)]
        policy: PolicyQuality,
        /// Single class; all five evaluation classes when omitted.
        #[arg(long, value_parser = parse_class)]
        class: Option<ClassName>,
    },
    /// Train the episode CNN on known classes.
    TrainCnn {
        #[arg(long, value_parser = parse_classes)]
        known: ::std::vec::Vec<ClassName>,
        #[arg(long, value_parser = parse_layout)]
        layout: FeatureLayout,
        #[arg(long, value_parser = parse_policy, default_value = "accurate")]
        policy: PolicyQuality,
    },
    /// Decide whether a probe batch is novel.
    Detect {
        #[arg(long, value_parser = parse_class)]
        probe: ClassName,
        #[arg(long, value_parser = parse_classes, default_value = "cube,sphere")]
        known: ::std::vec::Vec<ClassName>,
        #[arg(long, value_parser = parse_layout, default_value = "rl19")]
        layout: FeatureLayout,
        #[arg(long, value_parser = parse_policy, default_value = "accurate")]
        policy: PolicyQuality,
        #[arg(long, default_value_t = 0)]
        run: usize,
    },
    /// Full novelty experiment matrix.
    Experiments,
    /// Render a results CSV as SVG.
    Plot {
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Every stage from free play through the experiment matrix.
    Pipeline,
}

fn parse_mode(s: &str) -> Result<TransferMode, String> {
    s.parse().map_err(|e: stackplay::Error| e.to_string())
}

fn parse_policy(s: &str) -> Result<PolicyQuality, String> {
    s.parse().map_err(|e: stackplay::Error| e.to_string())
}

fn parse_class(s: &str) -> Result<ClassName, String> {
    s.parse().map_err(|e: stackplay::Error| e.to_string())
}

fn parse_layout(s: &str) -> Result<FeatureLayout, String> {
    match s.parse() {
        Ok(FeatureLayout::Freeplay) => Err("episode layouts are rl19 or rl16".into()),
        r => r.map_err(|e: stackplay::Error| e.to_string()),
    }
}

fn parse_classes(s: &str) -> Result<Vec<ClassName>, String> {
    parse_class_list(s).map_err(|e| e.to_string())
}

fn settings(cli: &Cli) -> Result<Settings, CliError> {
    let mut s = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        s.set(k.trim(), v)?;
    }
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    Ok(s)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = settings(&cli)?;
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::pipeline(format!("cannot start worker pool: {e}")))?;
    }
    let ctx = Ctx { out: cli.out, settings };
    match cli.command {
        Command::GenFreeplay => stages::gen_freeplay(&ctx).map(drop),
        Command::TrainBaseline => stages::train_baseline_stage(&ctx).map(drop),
        Command::Mds => stages::mds_stage(&ctx).map(drop),
        Command::Transfer { mode } => stages::transfer_stage(&ctx, mode).map(drop),
        Command::Concept => stages::concept_stage(&ctx).map(drop),
        Command::RlTrain => stages::rl_train(&ctx).map(drop),
        Command::RlEval { policy, class } => stages::rl_eval(&ctx, policy, class).map(drop),
        Command::TrainCnn { known, layout, policy } => stages::train_cnn_stage(&ctx, &known, layout, policy).map(drop),
        Command::Detect { probe, known, layout, policy, run } => {
            stages::detect_stage(&ctx, probe, &known, layout, policy, run).map(drop)
        }
        Command::Experiments => stages::experiments(&ctx).map(drop),
        Command::Plot { input, output } => {
            let out = stages::plot(&input, output.as_deref())?;
            println!("{}", out.display());
            Ok(())
        }
        Command::Pipeline => stages::pipeline(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
