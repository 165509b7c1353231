//! Fixed numeric layouts for model inputs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::sim::AttemptRecord;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureLayout {
    /// Everything logged during free play (24 values).
    Freeplay,
    /// Per-timestep policy-evaluation features (19 values).
    Rl19,
    /// `Rl19` without the three jitter components.
    Rl16NoJitter,
}

/// One scalar column of an [`AttemptRecord`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    StartRotation(usize),
    StartUpOffset,
    Action(usize),
    PostRotation(usize),
    PostUpOffset,
    Jitter(usize),
    RelPosBefore(usize),
    RelPosAfter(usize),
    RelPosSettled(usize),
    Supported,
    Touching,
    Reward,
    StackHeight,
}

const XYZ: [&str; 3] = ["x", "y", "z"];
const XZ: [&str; 2] = ["x", "z"];

impl Field {
    pub fn name(self) -> String {
        match self {
            Field::StartRotation(i) => format!("start_rot_{}", XYZ[i]),
            Field::StartUpOffset => "start_up_offset".into(),
            Field::Action(i) => format!("action_{}", XZ[i]),
            Field::PostRotation(i) => format!("post_rot_{}", XYZ[i]),
            Field::PostUpOffset => "post_up_offset".into(),
            Field::Jitter(i) => format!("jitter_{}", XYZ[i]),
            Field::RelPosBefore(i) => format!("before_{}", XYZ[i]),
            Field::RelPosAfter(i) => format!("after_{}", XYZ[i]),
            Field::RelPosSettled(i) => format!("settled_{}", XYZ[i]),
            Field::Supported => "supported".into(),
            Field::Touching => "touching".into(),
            Field::Reward => "reward".into(),
            Field::StackHeight => "stack_height".into(),
        }
    }

    pub fn get(self, r: &AttemptRecord) -> f64 {
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        match self {
            Field::StartRotation(i) => r.start_rotation[i],
            Field::StartUpOffset => r.start_up_offset,
            Field::Action(i) => r.action[i],
            Field::PostRotation(i) => r.post_rotation[i],
            Field::PostUpOffset => r.post_up_offset,
            Field::Jitter(i) => r.jitter[i],
            Field::RelPosBefore(i) => r.rel_pos_before[i],
            Field::RelPosAfter(i) => r.rel_pos_after[i],
            Field::RelPosSettled(i) => r.rel_pos_settled[i],
            Field::Supported => flag(r.supported),
            Field::Touching => flag(r.touching),
            Field::Reward => r.reward,
            Field::StackHeight => f64::from(r.stack_height),
        }
    }
}

fn triple(f: fn(usize) -> Field) -> [Field; 3] {
    [f(0), f(1), f(2)]
}

impl FeatureLayout {
    pub fn fields(self) -> Vec<Field> {
        use Field::*;
        let mut v = Vec::with_capacity(24);
        match self {
            FeatureLayout::Freeplay => {
                v.extend(triple(StartRotation));
                v.push(StartUpOffset);
                v.extend([Action(0), Action(1)]);
                v.extend(triple(PostRotation));
                v.push(PostUpOffset);
                v.extend(triple(Jitter));
                v.extend(triple(RelPosBefore));
                v.extend(triple(RelPosAfter));
                v.extend(triple(RelPosSettled));
                v.extend([Supported, Touching]);
            }
            FeatureLayout::Rl19 | FeatureLayout::Rl16NoJitter => {
                v.extend([Action(0), Action(1), StartUpOffset, PostUpOffset]);
                v.extend(triple(PostRotation));
                if self == FeatureLayout::Rl19 {
                    v.extend(triple(Jitter));
                }
                v.extend(triple(RelPosAfter));
                v.extend(triple(RelPosSettled));
                v.extend([Reward, StackHeight, Supported]);
            }
        }
        v
    }

    pub fn dim(self) -> usize {
        self.fields().len()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureLayout::Freeplay => "freeplay",
            FeatureLayout::Rl19 => "rl19",
            FeatureLayout::Rl16NoJitter => "rl16",
        }
    }

    pub fn featurize(self, r: &AttemptRecord) -> Vec<f64> {
        self.fields().into_iter().map(|f| f.get(r)).collect()
    }

    /// Pairs each value of a feature vector with the field it came from.
    pub fn decode(self, values: &[f64]) -> Result<Vec<(Field, f64)>> {
        let fields = self.fields();
        if values.len() != fields.len() {
            return Err(Error::Shape(format!(
                "{} layout has {} values, got {}",
                self.as_str(),
                fields.len(),
                values.len()
            )));
        }
        Ok(fields.into_iter().zip(values.iter().copied()).collect())
    }
}

impl fmt::Display for FeatureLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "freeplay" => Ok(FeatureLayout::Freeplay),
            "rl19" => Ok(FeatureLayout::Rl19),
            "rl16" | "rl16_nojitter" => Ok(FeatureLayout::Rl16NoJitter),
            other => Err(Error::InvalidInput(format!("unknown feature layout `{other}`"))),
        }
    }
}
