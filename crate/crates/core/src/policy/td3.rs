use std::collections::VecDeque;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::env::{reward, RlAction, RlState};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::simworld::{ClassName, EpisodeRunner, ObjectClass};
use crate::tensornn::{Activation, Adam, LayerSpec, Network};

const STATE_DIM: usize = 3;
const ACTION_DIM: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Td3Config {
    pub hidden: usize,
    pub polyak: f64,
    pub policy_delay: u64,
    /// Target-policy smoothing noise std, in normalised action units.
    pub target_noise: f64,
    pub noise_clip: f64,
    /// Exploration noise std, in normalised action units (0.2 = 10% of the range).
    pub explore_noise: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub gamma: f64,
    /// Multiplier applied to rewards before they reach the critics.
    pub reward_scale: f64,
    /// Uniform-random steps before the actor is used.
    pub warmup_steps: u64,
    pub max_steps: u64,
    /// Episodes in the rolling success/reward window.
    pub window: usize,
    pub accurate_threshold: f64,
    pub imprecise_band: (f64, f64),
    /// Fallback position of the imprecise checkpoint, as a fraction of steps run.
    pub imprecise_fallback: f64,
    /// End training as soon as the accurate checkpoint is taken.
    pub stop_at_accurate: bool,
    pub seed: u64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Td3Config {
            hidden: 64,
            polyak: 0.995,
            policy_delay: 2,
            target_noise: 0.2,
            noise_clip: 0.5,
            explore_noise: 0.2,
            replay_capacity: 50_000,
            batch_size: 128,
            lr: 1e-3,
            gamma: 0.99,
            reward_scale: 1e-3,
            warmup_steps: 500,
            max_steps: 200_000,
            window: 100,
            accurate_threshold: 0.9,
            imprecise_band: (0.5, 0.7),
            imprecise_fallback: 0.25,
            stop_at_accurate: true,
            seed: 0,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.hidden == 0 || self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("hidden, batch_size and replay_capacity must be positive with capacity >= batch");
        }
        if !(0.0..1.0).contains(&self.polyak) || !(0.0..=1.0).contains(&self.gamma) || self.policy_delay == 0 {
            return bad("polyak in [0,1), gamma in [0,1] and policy_delay >= 1 required");
        }
        if !(self.lr > 0.0) || self.window == 0 || self.imprecise_band.0 > self.imprecise_band.1 {
            return bad("lr > 0, window >= 1 and an ordered imprecise band required");
        }
        if !(0.0..=1.0).contains(&self.imprecise_fallback) {
            return bad("imprecise_fallback must lie in [0,1]");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct Transition {
    s: [f64; STATE_DIM],
    a: [f64; ACTION_DIM],
    r: f64,
    s2: [f64; STATE_DIM],
    done: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayStats {
    pub len: usize,
    pub capacity: usize,
    pub inserted: u64,
}

/// Fixed-capacity ring buffer of transitions.
#[derive(Clone, Debug)]
struct Replay {
    items: VecDeque<Transition>,
    capacity: usize,
    inserted: u64,
}

impl Replay {
    fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
        self.inserted += 1;
    }

    fn stats(&self) -> ReplayStats {
        ReplayStats { len: self.items.len(), capacity: self.capacity, inserted: self.inserted }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyQuality {
    Accurate,
    Imprecise,
}

impl PolicyQuality {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyQuality::Accurate => "accurate",
            PolicyQuality::Imprecise => "imprecise",
        }
    }
}

impl std::str::FromStr for PolicyQuality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accurate" => Ok(PolicyQuality::Accurate),
            "imprecise" => Ok(PolicyQuality::Imprecise),
            _ => Err(Error::InvalidInput(format!("unknown policy '{s}' (accurate|imprecise)"))),
        }
    }
}

pub const POLICY_FORMAT: &str = "stackplay-policy";
pub const POLICY_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub format: String,
    pub version: u32,
    pub quality: PolicyQuality,
    pub step: u64,
    pub episodes: usize,
    pub rolling_success: f64,
    /// True when the imprecise checkpoint came from the step-fraction fallback.
    pub fallback: bool,
    pub actor: Network,
    pub actor_target: Network,
    pub critics: [Network; 2],
    pub critic_targets: [Network; 2],
    pub replay: ReplayStats,
    pub config: Td3Config,
}

impl PolicyCheckpoint {
    pub fn validate(&self) -> Result<()> {
        if self.format != POLICY_FORMAT || self.version != POLICY_VERSION {
            return Err(Error::Format(format!("unsupported policy checkpoint {} v{}", self.format, self.version)));
        }
        for n in [&self.actor, &self.actor_target, &self.critics[0], &self.critics[1], &self.critic_targets[0], &self.critic_targets[1]] {
            n.validate()?;
        }
        let shapes = |n: &Network| n.layers.iter().map(|l| l.spec.kind).collect::<Vec<_>>();
        if shapes(&self.critics[0]) != shapes(&self.critics[1])
            || shapes(&self.critics[0]) != shapes(&self.critic_targets[0])
            || shapes(&self.critics[0]) != shapes(&self.critic_targets[1])
            || shapes(&self.actor) != shapes(&self.actor_target)
        {
            return Err(Error::Format("twin or target network shapes differ".into()));
        }
        if self.actor.input_dim() != STATE_DIM || self.actor.output_dim() != ACTION_DIM {
            return Err(Error::Format("actor must map 3 state values to 2 action values".into()));
        }
        Ok(())
    }

    /// Greedy scaled action for `state`.
    pub fn act(&self, state: RlState) -> Result<RlAction> {
        let out = self.actor.forward(&state.to_vec())?.logits;
        Ok(RlAction::from_normalized([out[0], out[1]]))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: PolicyCheckpoint = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        PolicyCheckpoint::from_json(&std::fs::read_to_string(path)?)
    }
}

/// One point of the training curve, logged at the end of each episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    /// Total environment steps taken so far.
    pub timestep: u64,
    pub episode_reward: f64,
    pub rolling_mean_reward: f64,
    /// Fraction of the window's episodes stacked on their first attempt.
    pub rolling_success: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub accurate: Option<PolicyCheckpoint>,
    pub imprecise: PolicyCheckpoint,
    pub curve: Vec<CurvePoint>,
    pub steps: u64,
}

struct Agent {
    actor: Network,
    actor_t: Network,
    critics: [Network; 2],
    critics_t: [Network; 2],
    opt_actor: Adam,
    opt_critics: [Adam; 2],
    replay: Replay,
    updates: u64,
}

fn mlp(inputs: usize, hidden: usize, outputs: usize, rng: &mut Rng) -> Result<Network> {
    Network::new(
        &[
            LayerSpec::dense(inputs, hidden, Activation::Relu),
            LayerSpec::dense(hidden, hidden, Activation::Relu),
            LayerSpec::dense(hidden, outputs, Activation::Linear),
        ],
        rng,
    )
}

fn polyak(target: &mut Network, online: &Network, rho: f64) {
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        for (tw, ow) in t.weights.iter_mut().zip(&o.weights) {
            *tw = rho * *tw + (1.0 - rho) * ow;
        }
        for (tb, ob) in t.bias.iter_mut().zip(&o.bias) {
            *tb = rho * *tb + (1.0 - rho) * ob;
        }
    }
}

fn gauss(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

impl Agent {
    fn new(cfg: &Td3Config) -> Result<Self> {
        let mut r = rng::stream(rng::derive(cfg.seed, rng::tag("td3-init")), 0);
        let actor = mlp(STATE_DIM, cfg.hidden, ACTION_DIM, &mut r)?;
        let c0 = mlp(STATE_DIM + ACTION_DIM, cfg.hidden, 1, &mut r)?;
        let c1 = mlp(STATE_DIM + ACTION_DIM, cfg.hidden, 1, &mut r)?;
        Ok(Agent {
            opt_actor: Adam::new(&actor, cfg.lr, 0.0),
            opt_critics: [Adam::new(&c0, cfg.lr, 0.0), Adam::new(&c1, cfg.lr, 0.0)],
            actor_t: actor.clone(),
            actor,
            critics_t: [c0.clone(), c1.clone()],
            critics: [c0, c1],
            replay: Replay { items: VecDeque::with_capacity(cfg.replay_capacity), capacity: cfg.replay_capacity, inserted: 0 },
            updates: 0,
        })
    }

    fn raw_action(&self, s: [f64; STATE_DIM]) -> Result<[f64; ACTION_DIM]> {
        let o = self.actor.forward(&s)?.logits;
        Ok([o[0], o[1]])
    }

    fn update(&mut self, cfg: &Td3Config, rng: &mut Rng) -> Result<()> {
        let b = cfg.batch_size;
        let n = self.replay.items.len();
        let batch: Vec<Transition> = (0..b).map(|_| self.replay.items[rng.gen_range(0..n)]).collect();

        let s2: Vec<f64> = batch.iter().flat_map(|t| t.s2).collect();
        let a2_raw = self.actor_t.forward_batch(&s2, b)?;
        let mut sa2 = Vec::with_capacity(b * 5);
        for (t, a) in batch.iter().zip(a2_raw.logits().chunks_exact(ACTION_DIM)) {
            sa2.extend(t.s2);
            for &v in a {
                let noise = (cfg.target_noise * gauss(rng)).clamp(-cfg.noise_clip, cfg.noise_clip);
                sa2.push((v + noise).clamp(-1.0, 1.0));
            }
        }
        let q1t = self.critics_t[0].forward_batch(&sa2, b)?;
        let q2t = self.critics_t[1].forward_batch(&sa2, b)?;
        let y: Vec<f64> = batch
            .iter()
            .zip(q1t.logits().iter().zip(q2t.logits()))
            .map(|(t, (q1, q2))| {
                let cont = if t.done { 0.0 } else { 1.0 };
                t.r * cfg.reward_scale + cfg.gamma * cont * q1.min(*q2)
            })
            .collect();

        let sa: Vec<f64> = batch.iter().flat_map(|t| t.s.into_iter().chain(t.a)).collect();
        for i in 0..2 {
            let tr = self.critics[i].forward_batch(&sa, b)?;
            let d: Vec<f64> = tr.logits().iter().zip(&y).map(|(q, y)| 2.0 * (q - y) / b as f64).collect();
            if d.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch: 0, batch: self.updates as usize, lr: cfg.lr });
            }
            let (g, _) = self.critics[i].backward(&tr, &d, false);
            self.opt_critics[i].step(&mut self.critics[i], &g);
        }
        self.updates += 1;

        if self.updates % cfg.policy_delay == 0 {
            let s: Vec<f64> = batch.iter().flat_map(|t| t.s).collect();
            let at = self.actor.forward_batch(&s, b)?;
            let mut sa_pi = Vec::with_capacity(b * 5);
            for (t, a) in batch.iter().zip(at.logits().chunks_exact(ACTION_DIM)) {
                sa_pi.extend(t.s);
                sa_pi.extend(a.iter().map(|v| v.clamp(-1.0, 1.0)));
            }
            let mut probe = self.critics[0].clone();
            probe.layers.iter_mut().for_each(|l| l.spec.frozen = true);
            let qt = probe.forward_batch(&sa_pi, b)?;
            let (_, dx) = probe.backward(&qt, &vec![-1.0 / b as f64; b], true);
            let dx = dx.expect("input gradient requested");
            // Straight-through the clamp: maximise Q w.r.t. the raw output.
            let da: Vec<f64> = dx.chunks_exact(STATE_DIM + ACTION_DIM).flat_map(|r| [r[3], r[4]]).collect();
            let (g, _) = self.actor.backward(&at, &da, false);
            self.opt_actor.step(&mut self.actor, &g);
            polyak(&mut self.actor_t, &self.actor, cfg.polyak);
            polyak(&mut self.critics_t[0], &self.critics[0], cfg.polyak);
            polyak(&mut self.critics_t[1], &self.critics[1], cfg.polyak);
        }
        Ok(())
    }

    fn checkpoint(&self, quality: PolicyQuality, step: u64, episodes: usize, rolling: f64, cfg: &Td3Config) -> PolicyCheckpoint {
        PolicyCheckpoint {
            format: POLICY_FORMAT.into(),
            version: POLICY_VERSION,
            quality,
            step,
            episodes,
            rolling_success: rolling,
            fallback: false,
            actor: self.actor.clone(),
            actor_target: self.actor_t.clone(),
            critics: self.critics.clone(),
            critic_targets: self.critics_t.clone(),
            replay: self.replay.stats(),
            config: cfg.clone(),
        }
    }
}

struct RunState {
    agent: Agent,
    curve: Vec<CurvePoint>,
    accurate: Option<PolicyCheckpoint>,
    imprecise: Option<PolicyCheckpoint>,
    steps: u64,
}

/// Core loop; stops after `max_steps` or, if configured, at the accurate checkpoint.
fn run(cfg: &Td3Config, max_steps: u64) -> Result<RunState> {
    let cube = ObjectClass::new(ClassName::Cube);
    let mut agent = Agent::new(cfg)?;
    let mut rng = rng::stream(rng::derive(cfg.seed, rng::tag("td3-train")), 0);
    let mut curve = Vec::new();
    let mut window: VecDeque<(f64, bool)> = VecDeque::with_capacity(cfg.window);
    let mut accurate = None;
    let mut imprecise = None;
    let mut steps = 0u64;
    let mut episode = 0usize;
    'outer: while steps < max_steps {
        let mut ep_rng = rng::stream(rng::derive(cfg.seed, rng::tag("td3-episodes")), episode as u64);
        let mut runner = EpisodeRunner::new(&cube, episode as u64, &mut ep_rng);
        let mut state = RlState::START;
        while !runner.is_done(true) {
            let s = state.to_vec();
            let u = if steps < cfg.warmup_steps {
                [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)]
            } else {
                let raw = agent.raw_action(s)?;
                raw.map(|v| (v + cfg.explore_noise * gauss(&mut rng)).clamp(-1.0, 1.0))
            };
            let action = RlAction::from_normalized(u);
            let rec = runner.step(action.to_placement(), &mut ep_rng, reward)?;
            let next = RlState::after(rec);
            agent.replay.push(Transition { s, a: action.normalized(), r: rec.reward, s2: next.to_vec(), done: rec.supported });
            state = next;
            steps += 1;
            if steps >= cfg.warmup_steps && agent.replay.items.len() >= cfg.batch_size {
                agent.update(cfg, &mut rng)?;
            }
            if steps >= max_steps {
                break 'outer;
            }
        }
        let ep = runner.finish();
        let first_try = ep.records[0].supported;
        if window.len() == cfg.window {
            window.pop_front();
        }
        window.push_back((ep.total_reward(), first_try));
        let mean = window.iter().map(|w| w.0).sum::<f64>() / window.len() as f64;
        let success = window.iter().filter(|w| w.1).count() as f64 / window.len() as f64;
        curve.push(CurvePoint { episode, timestep: steps, episode_reward: ep.total_reward(), rolling_mean_reward: mean, rolling_success: success });
        episode += 1;
        if window.len() == cfg.window && steps >= cfg.warmup_steps {
            let (lo, hi) = cfg.imprecise_band;
            if imprecise.is_none() && accurate.is_none() && (lo..=hi).contains(&success) {
                imprecise = Some(agent.checkpoint(PolicyQuality::Imprecise, steps, episode, success, cfg));
            }
            if accurate.is_none() && success >= cfg.accurate_threshold {
                accurate = Some(agent.checkpoint(PolicyQuality::Accurate, steps, episode, success, cfg));
                if cfg.stop_at_accurate {
                    break;
                }
            }
        }
    }
    Ok(RunState { agent, curve, accurate, imprecise, steps })
}

/// Trains TD3 on cube-on-cube stacking and extracts the accurate and
/// imprecise checkpoints. If no episode window falls inside the imprecise
/// band before the accurate checkpoint, training is replayed (it is
/// deterministic) up to the fallback fraction of the steps run.
pub fn td3_train(cfg: &Td3Config) -> Result<TrainOutcome> {
    cfg.validate()?;
    let state = run(cfg, cfg.max_steps)?;
    let imprecise = match state.imprecise {
        Some(c) => c,
        None => {
            let at = ((state.steps as f64 * cfg.imprecise_fallback).floor() as u64).max(1);
            log::warn!("no rolling window inside the imprecise band; using the checkpoint at step {at}");
            let replay_cfg = Td3Config { stop_at_accurate: false, ..cfg.clone() };
            let early = run(&replay_cfg, at)?;
            let success = early.curve.last().map_or(0.0, |p| p.rolling_success);
            let episodes = early.curve.len();
            let mut c = early.agent.checkpoint(PolicyQuality::Imprecise, early.steps, episodes, success, cfg);
            c.fallback = true;
            c
        }
    };
    if state.accurate.is_none() {
        log::warn!("accurate threshold {} not reached within {} steps", cfg.accurate_threshold, cfg.max_steps);
    }
    Ok(TrainOutcome { accurate: state.accurate, imprecise, curve: state.curve, steps: state.steps })
}
