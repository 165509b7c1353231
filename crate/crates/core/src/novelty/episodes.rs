use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simworld::{ClassName, Episode, FeatureLayout, MAX_ATTEMPTS};

pub const TRAIN_EPISODES: usize = 90;
pub const DEV_EPISODES: usize = 10;

/// An episode as a fixed `10 x c` row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaddedEpisode {
    pub class: ClassName,
    pub episode_id: u64,
    pub width: usize,
    pub rows: Vec<f64>,
}

impl PaddedEpisode {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.width..(i + 1) * self.width]
    }
}

/// Extends `rows` (each `width` wide) to ten rows by repeating the last one.
/// Inputs that already have ten rows come back unchanged.
pub fn pad_rows(rows: &[f64], width: usize) -> Result<Vec<f64>> {
    if width == 0 || rows.is_empty() || rows.len() % width != 0 {
        return Err(Error::Shape(format!("{} values do not form rows of width {width}", rows.len())));
    }
    let n = rows.len() / width;
    if n > MAX_ATTEMPTS {
        return Err(Error::InvalidInput(format!("episode has {n} rows, more than {MAX_ATTEMPTS}")));
    }
    let mut out = rows.to_vec();
    let last = rows[(n - 1) * width..].to_vec();
    for _ in n..MAX_ATTEMPTS {
        out.extend_from_slice(&last);
    }
    Ok(out)
}

pub fn pad_episode(ep: &Episode, layout: FeatureLayout) -> Result<PaddedEpisode> {
    if ep.records.is_empty() {
        return Err(Error::InvalidInput("cannot pad an empty episode".into()));
    }
    let width = layout.dim();
    let flat: Vec<f64> = ep.records.iter().flat_map(|r| layout.featurize(r)).collect();
    Ok(PaddedEpisode { class: ep.class(), episode_id: ep.id(), width, rows: pad_rows(&flat, width)? })
}

/// Per-class split: first 90 for training, next 10 for development, the
/// rest as the detection pool.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassSplit {
    pub class: ClassName,
    pub train: Vec<PaddedEpisode>,
    pub dev: Vec<PaddedEpisode>,
    pub pool: Vec<PaddedEpisode>,
}

pub fn split_class(episodes: &[Episode], layout: FeatureLayout) -> Result<ClassSplit> {
    let need = TRAIN_EPISODES + DEV_EPISODES;
    let class = episodes.first().map(Episode::class).ok_or_else(|| Error::Insufficient("no episodes".into()))?;
    if episodes.len() < need {
        return Err(Error::Insufficient(format!(
            "{class} has {} episodes; {need} are needed ({} short)",
            episodes.len(),
            need - episodes.len()
        )));
    }
    if let Some(other) = episodes.iter().find(|e| e.class() != class) {
        return Err(Error::InvalidInput(format!("mixed classes in split: {class} and {}", other.class())));
    }
    let padded = episodes.iter().map(|e| pad_episode(e, layout)).collect::<Result<Vec<_>>>()?;
    let mut it = padded.into_iter();
    let train = it.by_ref().take(TRAIN_EPISODES).collect();
    let dev = it.by_ref().take(DEV_EPISODES).collect();
    Ok(ClassSplit { class, train, dev, pool: it.collect() })
}
