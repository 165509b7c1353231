//! Placement, jitter and settling of a theme object on the destination cube.
//!
//! All positions are relative to the destination cube's centre. [`Pose`]
//! stores world units; logged records use destination half-extent units.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, TAU};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::geometry::{self, norm, Vec3};
use super::objects::{ClassName, Contact, ObjectClass, Orientation};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Half extent of the destination cube (world units).
pub const DEST_HALF: f64 = 0.5;
/// Placement coordinates in (−1, 1) span this many world units from the centre.
pub const PLACEMENT_SCALE: f64 = 2.0 * DEST_HALF;
/// Support region shrink, 0.05 destination half-extent units.
pub const SUPPORT_MARGIN: f64 = 0.05 * DEST_HALF;
/// Largest release slide along the jitter direction (world units).
pub const JITTER_SLIDE: f64 = 0.1;
pub const MAX_ATTEMPTS: usize = 10;
/// Floor region the scene is re-randomised in (side length, world units).
pub const FLOOR_SIDE: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    /// Centre of the theme object relative to the destination centre.
    pub position: Vec3,
    /// Intrinsic XYZ Euler angles wrapped to `[0, 2π)`.
    pub rotation: Vec3,
    pub up_offset: f64,
}

impl Pose {
    pub fn new(position: Vec3, rotation: Vec3) -> Self {
        let rotation = geometry::wrap_euler(rotation);
        Pose { position, rotation, up_offset: geometry::up_offset(rotation) }
    }

    /// True when `up_offset` agrees with the rotation.
    pub fn is_consistent(&self) -> bool {
        (0.0..=std::f64::consts::PI).contains(&self.up_offset)
            && (geometry::up_offset(self.rotation) - self.up_offset).abs() < 1e-9
    }
}

/// A placement coordinate on the destination's top face, both components in (−1, 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementAction {
    coord: [f64; 2],
}

impl PlacementAction {
    pub fn new(x: f64, z: f64) -> Result<Self> {
        for v in [x, z] {
            if !(v.is_finite() && v > -1.0 && v < 1.0) {
                return Err(Error::InvalidInput(format!("placement coordinate {v} outside (-1, 1)")));
            }
        }
        Ok(PlacementAction { coord: [x, z] })
    }

    pub fn coord(&self) -> [f64; 2] {
        self.coord
    }

    /// Uniform over the open square.
    pub fn random(rng: &mut Rng) -> Self {
        let mut draw = || loop {
            let v: f64 = rng.gen_range(-1.0..1.0);
            if v > -1.0 {
                return v;
            }
        };
        PlacementAction { coord: [draw(), draw()] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Left resting on the destination.
    Stacked,
    /// Fell off but came to rest against the destination.
    Touch,
    /// Came to rest away from the destination.
    Miss,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub episode_id: u64,
    /// 1-based position within the episode.
    pub attempt_idx: u32,
    pub theme_class: ClassName,
    pub start_rotation: Vec3,
    pub start_up_offset: f64,
    pub action: [f64; 2],
    pub post_rotation: Vec3,
    pub post_up_offset: f64,
    pub jitter: Vec3,
    pub rel_pos_before: Vec3,
    pub rel_pos_after: Vec3,
    pub rel_pos_settled: Vec3,
    pub supported: bool,
    pub touching: bool,
    pub reward: f64,
    pub cum_reward: f64,
    pub mean_reward: f64,
    pub stack_height: u8,
}

impl AttemptRecord {
    pub fn outcome(&self) -> Outcome {
        if self.supported {
            Outcome::Stacked
        } else if self.touching {
            Outcome::Touch
        } else {
            Outcome::Miss
        }
    }

    /// Where the theme object rests after this attempt.
    pub fn resting_pose(&self) -> Pose {
        Pose::new(geometry::scale(self.rel_pos_settled, DEST_HALF), self.post_rotation)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeOutcome {
    Stacked,
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub records: Vec<AttemptRecord>,
    pub outcome: EpisodeOutcome,
}

impl Episode {
    pub fn class(&self) -> ClassName {
        self.records[0].theme_class
    }

    pub fn id(&self) -> u64 {
        self.records[0].episode_id
    }

    pub fn total_reward(&self) -> f64 {
        self.records.iter().map(|r| r.reward).sum()
    }

    /// Checks length and orientation continuity.
    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() || self.records.len() > MAX_ATTEMPTS {
            return Err(Error::InvalidInput(format!("episode length {} outside 1..=10", self.records.len())));
        }
        for w in self.records.windows(2) {
            if w[1].start_rotation != w[0].post_rotation {
                return Err(Error::InvalidInput(format!(
                    "episode {}: attempt {} does not start where attempt {} ended",
                    w[1].episode_id, w[1].attempt_idx, w[0].attempt_idx
                )));
            }
        }
        Ok(())
    }
}

fn realize(orientation: Orientation, rng: &mut Rng) -> Vec3 {
    match orientation {
        Orientation::Fixed(e) => e,
        Orientation::RollAboutX => [rng.gen_range(0.0..TAU), 0.0, 0.0],
        Orientation::Free => [rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)],
    }
}

fn draw_weighted(weights: &[f64], rng: &mut Rng) -> usize {
    WeightedIndex::new(weights).expect("rest tables carry positive weights").sample(rng)
}

fn require_rest(class: &ObjectClass, rotation: Vec3) -> Result<usize> {
    class.rest_index(rotation).ok_or_else(|| {
        Error::InvalidInput(format!("rotation {rotation:?} is not a rest orientation of {}", class.name))
    })
}

/// Direction of the post-release push.
///
/// Perpendicular to the world-space symmetry axis when the object has one,
/// otherwise uniform in the XZ plane.
pub fn apply_jitter(class: &ObjectClass, pose: &Pose, rng: &mut Rng) -> Vec3 {
    let axis = class.world_sym_axis(pose.rotation);
    loop {
        let theta: f64 = rng.gen_range(0.0..TAU);
        let d = [theta.cos(), 0.0, theta.sin()];
        let Some(a) = axis else { return d };
        let along = geometry::dot(d, a);
        let p = geometry::sub(d, geometry::scale(a, along));
        let n = norm(p);
        if n > 1e-6 {
            let j = geometry::scale(p, 1.0 / n);
            let residual = geometry::dot(j, a);
            if residual.abs() < 1e-13 {
                return j;
            }
            let j = geometry::sub(j, geometry::scale(a, residual));
            return geometry::scale(j, 1.0 / norm(j));
        }
    }
}

fn interval_overlap(center: f64, half: f64) -> (f64, f64) {
    ((center - half).max(-DEST_HALF), (center + half).min(DEST_HALF))
}

fn unit_xz(v: [f64; 2]) -> Option<[f64; 2]> {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    (n > 1e-9).then(|| [v[0] / n, v[1] / n])
}

/// Places the theme at `action`, applies jitter and lets it settle.
///
/// Flat contacts are stable iff the centre-of-mass projection lies inside the
/// overlap of the contact patch and the destination top, shrunk by
/// [`SUPPORT_MARGIN`]. Round contacts over the top roll off with the habitat's
/// rolling probability. Fallen objects land beside the cube in a habitat drawn
/// from the class transition table.
pub fn place_and_settle(
    class: &ObjectClass,
    pose: &Pose,
    action: PlacementAction,
    rng: &mut Rng,
) -> Result<AttemptRecord> {
    let rest_idx = require_rest(class, pose.rotation)?;
    let [ax, az] = action.coord();
    PlacementAction::new(ax, az)?;
    let rest = &class.rests[rest_idx];

    let offset = [ax * PLACEMENT_SCALE, az * PLACEMENT_SCALE];
    let after = [offset[0], DEST_HALF + rest.center_height, offset[1]];
    let jitter = apply_jitter(class, pose, rng);
    let slide = rng.gen_range(0.0..=JITTER_SLIDE);
    let patch_center = [offset[0] + slide * jitter[0], offset[1] + slide * jitter[2]];
    let com = [patch_center[0] + rest.com_offset[0], patch_center[1] + rest.com_offset[1]];

    let outcome = match rest.contact {
        Contact::Flat => {
            let spans = [interval_overlap(patch_center[0], rest.patch[0]), interval_overlap(patch_center[1], rest.patch[1])];
            if spans.iter().any(|(lo, hi)| lo > hi) {
                Outcome::Miss
            } else if spans
                .iter()
                .zip(com)
                .all(|((lo, hi), c)| c >= lo + SUPPORT_MARGIN && c <= hi - SUPPORT_MARGIN)
            {
                Outcome::Stacked
            } else {
                Outcome::Touch
            }
        }
        Contact::Round => {
            let over = |limit: f64| com.iter().all(|c| c.abs() <= limit);
            if over(DEST_HALF - SUPPORT_MARGIN) {
                if rng.gen_bool(rest.roll_probability) {
                    Outcome::Miss
                } else {
                    Outcome::Stacked
                }
            } else {
                // over the rim or beside the cube: rolls away
                Outcome::Miss
            }
        }
    };

    let (post_rotation, settled) = match outcome {
        Outcome::Stacked => (pose.rotation, [patch_center[0], after[1], patch_center[1]]),
        fallen => {
            let next = draw_weighted(&class.transitions[rest_idx], rng);
            let landing = &class.rests[next];
            let rotation = geometry::wrap_euler(realize(landing.orientation, rng));
            let floor_y = landing.center_height - DEST_HALF;
            let clearance = DEST_HALF + landing.reach;
            let random_dir = |rng: &mut Rng| {
                let t: f64 = rng.gen_range(0.0..TAU);
                [t.cos(), t.sin()]
            };
            let xz = match (fallen, rest.contact) {
                (Outcome::Touch, _) => {
                    let dir = unit_xz(com).unwrap_or_else(|| random_dir(rng));
                    let d = clearance + rng.gen_range(0.0..0.05);
                    [dir[0] * d, dir[1] * d]
                }
                (_, Contact::Round) => {
                    let dir = unit_xz([jitter[0], jitter[2]])
                        .or_else(|| unit_xz(com))
                        .unwrap_or_else(|| random_dir(rng));
                    let d = clearance + rng.gen_range(0.3..1.5);
                    [dir[0] * d, dir[1] * d]
                }
                _ => {
                    let dir = unit_xz(com).unwrap_or_else(|| random_dir(rng));
                    let d = (com[0] * com[0] + com[1] * com[1]).sqrt().max(clearance + 0.01);
                    [dir[0] * d, dir[1] * d]
                }
            };
            (rotation, [xz[0], floor_y, xz[1]])
        }
    };

    let supported = outcome == Outcome::Stacked;
    let to_units = |v: Vec3| geometry::scale(v, 1.0 / DEST_HALF);
    Ok(AttemptRecord {
        episode_id: 0,
        attempt_idx: 0,
        theme_class: class.name,
        start_rotation: pose.rotation,
        start_up_offset: pose.up_offset,
        action: [ax, az],
        post_rotation,
        post_up_offset: geometry::up_offset(post_rotation),
        jitter,
        rel_pos_before: to_units(pose.position),
        rel_pos_after: to_units(after),
        rel_pos_settled: to_units(settled),
        supported,
        touching: outcome != Outcome::Miss,
        reward: 0.0,
        cum_reward: 0.0,
        mean_reward: 0.0,
        stack_height: if supported { 2 } else { 1 },
    })
}

/// Re-randomises the scene: destination somewhere on the floor, theme beside it
/// in a habitat drawn from the class's starting weights.
pub fn initial_pose(class: &ObjectClass, rng: &mut Rng) -> Pose {
    let rest = &class.rests[draw_weighted(&class.initial_weights, rng)];
    let rotation = realize(rest.orientation, rng);
    let half = FLOOR_SIDE / 2.0;
    let dest = [rng.gen_range(-half..half), rng.gen_range(-half..half)];
    let min_gap = DEST_HALF + rest.reach + 0.1;
    let rel = loop {
        let theme = [rng.gen_range(-half..half), rng.gen_range(-half..half)];
        let rel = [theme[0] - dest[0], theme[1] - dest[1]];
        if rel[0].abs().max(rel[1].abs()) >= min_gap {
            break rel;
        }
    };
    Pose::new([rel[0], rest.center_height - DEST_HALF, rel[1]], rotation)
}

/// Decision context handed to an action chooser.
#[derive(Clone, Debug)]
pub struct AttemptContext<'a> {
    /// 1-based index of the attempt about to be made.
    pub attempt_idx: u32,
    pub pose: &'a Pose,
    pub history: &'a [AttemptRecord],
}

/// Runs one episode of at most ten attempts. The theme keeps the orientation
/// it settled in between attempts. Rewards are filled in by `reward`.
pub fn run_episode<C, R>(
    class: &ObjectClass,
    episode_id: u64,
    rng: &mut Rng,
    stop_on_success: bool,
    mut choose: C,
    reward: R,
) -> Result<Episode>
where
    C: FnMut(&AttemptContext<'_>, &mut Rng) -> PlacementAction,
    R: Fn(Outcome, u32) -> f64,
{
    let mut runner = EpisodeRunner::new(class, episode_id, rng);
    while !runner.is_done(stop_on_success) {
        let ctx = AttemptContext { attempt_idx: runner.next_attempt(), pose: &runner.pose, history: &runner.records };
        let action = choose(&ctx, rng);
        runner.step(action, rng, &reward)?;
    }
    Ok(runner.finish())
}

/// Attempt-by-attempt episode driver, for callers that act between attempts.
#[derive(Clone, Debug)]
pub struct EpisodeRunner<'a> {
    class: &'a ObjectClass,
    episode_id: u64,
    pose: Pose,
    records: Vec<AttemptRecord>,
    cum: f64,
}

impl<'a> EpisodeRunner<'a> {
    pub fn new(class: &'a ObjectClass, episode_id: u64, rng: &mut Rng) -> Self {
        let pose = initial_pose(class, rng);
        EpisodeRunner { class, episode_id, pose, records: Vec::with_capacity(MAX_ATTEMPTS), cum: 0.0 }
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn records(&self) -> &[AttemptRecord] {
        &self.records
    }

    /// 1-based index of the attempt `step` would make next.
    pub fn next_attempt(&self) -> u32 {
        self.records.len() as u32 + 1
    }

    pub fn is_done(&self, stop_on_success: bool) -> bool {
        self.records.len() >= MAX_ATTEMPTS || (stop_on_success && self.records.last().is_some_and(|r| r.supported))
    }

    pub fn step<R: Fn(Outcome, u32) -> f64>(&mut self, action: PlacementAction, rng: &mut Rng, reward: R) -> Result<&AttemptRecord> {
        if self.records.len() >= MAX_ATTEMPTS {
            return Err(Error::InvalidInput(format!("episode {} already used {MAX_ATTEMPTS} attempts", self.episode_id)));
        }
        let k = self.next_attempt();
        let mut rec = place_and_settle(self.class, &self.pose, action, rng)?;
        rec.episode_id = self.episode_id;
        rec.attempt_idx = k;
        rec.reward = reward(rec.outcome(), k);
        self.cum += rec.reward;
        rec.cum_reward = self.cum;
        rec.mean_reward = self.cum / f64::from(k);
        self.pose = rec.resting_pose();
        self.records.push(rec);
        Ok(self.records.last().unwrap())
    }

    pub fn finish(self) -> Episode {
        let outcome = if self.records.last().is_some_and(|r| r.supported) {
            EpisodeOutcome::Stacked
        } else {
            EpisodeOutcome::Exhausted
        };
        Episode { records: self.records, outcome }
    }
}

pub fn sample_episode(class: &ObjectClass, episode_id: u64, rng: &mut Rng) -> Result<Episode> {
    run_episode(class, episode_id, rng, false, |_, rng| PlacementAction::random(rng), |_, _| 0.0)
}

/// Flat/round label of a settled sample, from the class and its rotation alone.
pub fn label_contact(class: &ObjectClass, post_rotation: Vec3) -> Result<Contact> {
    let idx = require_rest(class, post_rotation)?;
    let up = geometry::up_offset(post_rotation);
    Ok(match class.name {
        // upright or inverted on a flat end; otherwise lying on the curved side
        ClassName::Cylinder => {
            if up < FRAC_PI_4 || up > 3.0 * FRAC_PI_4 {
                Contact::Flat
            } else {
                Contact::Round
            }
        }
        ClassName::Cone => {
            if up < FRAC_PI_3 {
                Contact::Flat
            } else {
                Contact::Round
            }
        }
        ClassName::Sphere | ClassName::Egg | ClassName::Capsule => Contact::Round,
        ClassName::Cube | ClassName::SmallCube | ClassName::RectPrism | ClassName::Pyramid => {
            debug_assert_eq!(class.rests[idx].contact, Contact::Flat);
            Contact::Flat
        }
    })
}
