//! Free-play dataset generation and the CSV/JSON on-disk formats.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{FeatureLayout, Field};
use super::objects::ClassName;
use super::sim::{sample_episode, AttemptRecord, Episode, EpisodeOutcome, MAX_ATTEMPTS};
use crate::error::{Error, Result};
use crate::rng;

pub const DATASET_FORMAT: &str = "stackplay-attempts";
pub const LAYOUT_VERSION: u32 = 1;

/// Generates `n` free-play attempts for one class.
///
/// Episode `i` draws from its own stream, so the output is identical whatever
/// the worker count.
pub fn generate_freeplay(class: ClassName, n: usize, seed: u64) -> Result<Vec<AttemptRecord>> {
    if n == 0 {
        return Err(Error::InvalidInput("free-play sample count must be positive".into()));
    }
    let object = class.class();
    let class_seed = rng::derive(seed, rng::tag(class.as_str()));
    let episodes = n.div_ceil(MAX_ATTEMPTS);
    let chunks: Vec<Vec<AttemptRecord>> = (0..episodes as u64)
        .into_par_iter()
        .map(|i| sample_episode(&object, i, &mut rng::stream(class_seed, i)).map(|e| e.records))
        .collect::<Result<_>>()?;
    let mut out: Vec<AttemptRecord> = chunks.into_iter().flatten().collect();
    out.truncate(n);
    Ok(out)
}

fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = vec!["episode_id".into(), "attempt_idx".into(), "theme_class".into()];
    let numeric = FeatureLayout::Freeplay
        .fields()
        .into_iter()
        .filter(|f| !matches!(f, Field::Supported | Field::Touching));
    h.extend(numeric.map(Field::name));
    h.extend(["supported", "touching", "reward", "cum_reward", "mean_reward", "stack_height"].map(String::from));
    h
}

fn numeric_fields() -> Vec<Field> {
    FeatureLayout::Freeplay
        .fields()
        .into_iter()
        .filter(|f| !matches!(f, Field::Supported | Field::Touching))
        .collect()
}

/// Writes records as CSV (LF line endings, one row per attempt).
pub fn write_records_csv<W: Write>(out: W, records: &[AttemptRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(csv_header())?;
    let fields = numeric_fields();
    let mut row: Vec<String> = Vec::with_capacity(32);
    for r in records {
        row.clear();
        row.push(r.episode_id.to_string());
        row.push(r.attempt_idx.to_string());
        row.push(r.theme_class.as_str().to_string());
        row.extend(fields.iter().map(|f| f.get(r).to_string()));
        row.push(u8::from(r.supported).to_string());
        row.push(u8::from(r.touching).to_string());
        row.push(r.reward.to_string());
        row.push(r.cum_reward.to_string());
        row.push(r.mean_reward.to_string());
        row.push(r.stack_height.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_records(path: &Path, records: &[AttemptRecord]) -> Result<()> {
    write_records_csv(BufWriter::new(File::create(path)?), records)
}

fn parse<T: std::str::FromStr>(s: &str, col: &str, line: u64) -> Result<T> {
    s.parse::<T>().map_err(|_| Error::Format(format!("line {line}: column `{col}` has bad value `{s}`")))
}

fn parse_flag(s: &str, col: &str, line: u64) -> Result<bool> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::Format(format!("line {line}: column `{col}` must be 0 or 1, got `{s}`"))),
    }
}

pub fn read_records_csv<R: std::io::Read>(input: R) -> Result<Vec<AttemptRecord>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let expected = csv_header();
    if header != expected {
        return Err(Error::Format(format!("unexpected header, expected `{}`", expected.join(","))));
    }
    let fields = numeric_fields();
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i as u64 + 2;
        let col = |k: usize| &row[k];
        let mut rec = AttemptRecord {
            episode_id: parse(col(0), "episode_id", line)?,
            attempt_idx: parse(col(1), "attempt_idx", line)?,
            theme_class: col(2).parse()?,
            start_rotation: [0.0; 3],
            start_up_offset: 0.0,
            action: [0.0; 2],
            post_rotation: [0.0; 3],
            post_up_offset: 0.0,
            jitter: [0.0; 3],
            rel_pos_before: [0.0; 3],
            rel_pos_after: [0.0; 3],
            rel_pos_settled: [0.0; 3],
            supported: false,
            touching: false,
            reward: 0.0,
            cum_reward: 0.0,
            mean_reward: 0.0,
            stack_height: 1,
        };
        for (k, f) in fields.iter().enumerate() {
            let v: f64 = parse(col(3 + k), &f.name(), line)?;
            match *f {
                Field::StartRotation(j) => rec.start_rotation[j] = v,
                Field::StartUpOffset => rec.start_up_offset = v,
                Field::Action(j) => rec.action[j] = v,
                Field::PostRotation(j) => rec.post_rotation[j] = v,
                Field::PostUpOffset => rec.post_up_offset = v,
                Field::Jitter(j) => rec.jitter[j] = v,
                Field::RelPosBefore(j) => rec.rel_pos_before[j] = v,
                Field::RelPosAfter(j) => rec.rel_pos_after[j] = v,
                Field::RelPosSettled(j) => rec.rel_pos_settled[j] = v,
                _ => unreachable!("flags are not numeric columns"),
            }
        }
        let base = 3 + fields.len();
        rec.supported = parse_flag(col(base), "supported", line)?;
        rec.touching = parse_flag(col(base + 1), "touching", line)?;
        rec.reward = parse(col(base + 2), "reward", line)?;
        rec.cum_reward = parse(col(base + 3), "cum_reward", line)?;
        rec.mean_reward = parse(col(base + 4), "mean_reward", line)?;
        rec.stack_height = parse(col(base + 5), "stack_height", line)?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_records(path: &Path) -> Result<Vec<AttemptRecord>> {
    read_records_csv(File::open(path)?)
}

/// Regroups attempt rows into episodes. Rows of one episode must be
/// contiguous and in attempt order; an episode counts as stacked when its
/// last attempt is supported.
pub fn group_episodes(records: &[AttemptRecord]) -> Result<Vec<Episode>> {
    let mut out: Vec<Episode> = Vec::new();
    for r in records {
        match out.last_mut() {
            Some(ep) if ep.records[0].episode_id == r.episode_id && ep.records[0].theme_class == r.theme_class => {
                ep.records.push(r.clone())
            }
            _ => out.push(Episode { records: vec![r.clone()], outcome: EpisodeOutcome::Exhausted }),
        }
    }
    for ep in &mut out {
        for (i, r) in ep.records.iter().enumerate() {
            if r.attempt_idx as usize != i + 1 {
                return Err(Error::Format(format!(
                    "episode {} of {}: attempt {} found at position {}",
                    r.episode_id,
                    r.theme_class,
                    r.attempt_idx,
                    i + 1
                )));
            }
        }
        if ep.records.last().is_some_and(|r| r.supported) {
            ep.outcome = EpisodeOutcome::Stacked;
        }
        ep.validate()?;
    }
    Ok(out)
}

/// Sidecar describing a generated dataset directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub layout_version: u32,
    pub seed: u64,
    pub class_counts: BTreeMap<String, usize>,
}

impl DatasetManifest {
    pub fn new(seed: u64, counts: impl IntoIterator<Item = (ClassName, usize)>) -> Self {
        DatasetManifest {
            format: DATASET_FORMAT.to_string(),
            layout_version: LAYOUT_VERSION,
            seed,
            class_counts: counts.into_iter().map(|(c, n)| (c.as_str().to_string(), n)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_and_exact() {
        let a = generate_freeplay(ClassName::Cube, 95, 1).unwrap();
        let b = generate_freeplay(ClassName::Cube, 95, 1).unwrap();
        assert_eq!(a.len(), 95);
        assert_eq!(a, b);
        let c = generate_freeplay(ClassName::Cube, 95, 2).unwrap();
        assert_ne!(a, c);
        assert!(generate_freeplay(ClassName::Cube, 0, 1).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let recs = generate_freeplay(ClassName::Cone, 40, 3).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("episode_id,attempt_idx,"));
        assert!(!text.contains('\r'));
        let back = read_records_csv(buf.as_slice()).unwrap();
        assert_eq!(back, recs);
        let mut again = Vec::new();
        write_records_csv(&mut again, &back).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn episodes_survive_csv_round_trip() {
        let eps: Vec<Episode> = (0..30)
            .map(|i| sample_episode(&ClassName::Capsule.class(), i, &mut rng::stream(5, i)).unwrap())
            .collect();
        let flat: Vec<AttemptRecord> = eps.iter().flat_map(|e| e.records.clone()).collect();
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &flat).unwrap();
        let back = group_episodes(&read_records_csv(buf.as_slice()).unwrap()).unwrap();
        assert_eq!(back, eps);
        let mut shuffled = flat.clone();
        shuffled.swap(0, 1);
        if shuffled[0].episode_id == shuffled[1].episode_id {
            assert!(group_episodes(&shuffled).is_err());
        }
    }

    #[test]
    fn bad_header_is_rejected() {
        let err = read_records_csv("a,b\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn supported_rate_ordering() {
        // 1,000 episodes per class
        let rate = |c: ClassName| {
            let recs = generate_freeplay(c, 10_000, 11).unwrap();
            recs.iter().filter(|r| r.supported).count() as f64 / recs.len() as f64
        };
        let [cube, cyl, cap, sph] = [ClassName::Cube, ClassName::Cylinder, ClassName::Capsule, ClassName::Sphere].map(rate);
        eprintln!("supported rates: cube {cube:.3} cylinder {cyl:.3} capsule {cap:.3} sphere {sph:.3}");
        assert!(cube > cyl && cyl > cap && cap > sph, "{cube} {cyl} {cap} {sph}");
        assert_eq!(sph, 0.0);
    }

    #[test]
    fn every_generated_record_is_well_formed() {
        for c in ClassName::ALL {
            let object = c.class();
            for r in generate_freeplay(c, 500, 4).unwrap() {
                assert!(crate::simworld::label_contact(&object, r.post_rotation).is_ok());
                if let Some(axis) = object.world_sym_axis(r.start_rotation) {
                    let d: f64 = (0..3).map(|i| axis[i] * r.jitter[i]).sum();
                    assert!(d.abs() < 1e-9);
                }
                if r.supported {
                    assert_eq!(r.stack_height, 2);
                    assert!(r.rel_pos_settled[1] > 0.0);
                }
            }
        }
    }

    #[test]
    fn sphere_is_never_supported() {
        let recs = generate_freeplay(ClassName::Sphere, 100, 7).unwrap();
        assert_eq!(recs.iter().filter(|r| r.supported).count(), 0);
    }
}
