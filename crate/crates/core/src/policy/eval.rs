use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::env::{reward, RlAction, RlState};
use super::td3::{CurvePoint, PolicyCheckpoint};
use crate::error::Result;
use crate::rng;
use crate::simworld::{ClassName, Episode, EpisodeOutcome, EpisodeRunner, ObjectClass};

/// Theme classes used for policy evaluation.
pub const EVAL_CLASSES: [ClassName; 5] =
    [ClassName::Cube, ClassName::Sphere, ClassName::Cylinder, ClassName::Capsule, ClassName::SmallCube];

pub const EVAL_TIMESTEPS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub class: ClassName,
    /// Completed episodes; one cut off by the step budget is dropped.
    pub episodes: Vec<Episode>,
    pub timesteps: usize,
}

impl EvalResult {
    pub fn episode_rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(Episode::total_reward).collect()
    }

    pub fn mean_episode_reward(&self) -> f64 {
        let r = self.episode_rewards();
        if r.is_empty() {
            0.0
        } else {
            r.iter().sum::<f64>() / r.len() as f64
        }
    }

    pub fn successes(&self) -> usize {
        self.episodes.iter().filter(|e| e.outcome == EpisodeOutcome::Stacked).count()
    }
}

/// Runs the frozen greedy actor on `class` for `timesteps` attempts, treating
/// the theme as if it were a cube.
pub fn evaluate_policy(policy: &PolicyCheckpoint, class: ClassName, timesteps: usize, seed: u64) -> Result<EvalResult> {
    evaluate_controller(|s| policy.act(s), class, timesteps, seed)
}

/// Same protocol as [`evaluate_policy`] for any state-to-action map.
pub fn evaluate_controller(
    mut act: impl FnMut(RlState) -> Result<RlAction>,
    class: ClassName,
    timesteps: usize,
    seed: u64,
) -> Result<EvalResult> {
    let object = ObjectClass::new(class);
    let class_seed = rng::derive(rng::derive(seed, rng::tag("eval")), rng::tag(class.as_str()));
    let mut episodes = Vec::new();
    let mut steps = 0usize;
    let mut id = 0u64;
    'outer: while steps < timesteps {
        let mut r = rng::stream(class_seed, id);
        let mut runner = EpisodeRunner::new(&object, id, &mut r);
        let mut state = RlState::START;
        while !runner.is_done(true) {
            if steps == timesteps {
                break 'outer;
            }
            let action = act(state)?;
            let rec = runner.step(action.to_placement(), &mut r, reward)?;
            state = RlState::after(rec);
            steps += 1;
        }
        episodes.push(runner.finish());
        id += 1;
    }
    Ok(EvalResult { class, episodes, timesteps })
}

/// Evaluates every class in parallel, one seeded stream per class.
pub fn evaluate_classes(policy: &PolicyCheckpoint, classes: &[ClassName], timesteps: usize, seed: u64) -> Result<Vec<EvalResult>> {
    classes.par_iter().map(|&c| evaluate_policy(policy, c, timesteps, seed)).collect()
}

/// Columns `episode,timestep,episode_reward,rolling_mean_reward,rolling_success`.
pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut s = String::from("episode,timestep,episode_reward,rolling_mean_reward,rolling_success\n");
    for p in curve {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            p.episode, p.timestep, p.episode_reward, p.rolling_mean_reward, p.rolling_success
        ));
    }
    s
}

/// Line plot of the rolling mean reward against timesteps.
pub fn curve_svg(curve: &[CurvePoint]) -> String {
    let pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.timestep as f64, p.rolling_mean_reward)).collect();
    crate::plot::line_svg(&pts, "timestep", "mean episode reward")
}
