use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 25.0;
pub const Z_THRESHOLD: f64 = 3.0;
pub const MIN_BATCH: usize = 10;

/// Embeddings of one class with their column statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    pub class: String,
    pub vectors: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Population standard deviation per dimension.
    pub std: Vec<f64>,
}

impl EmbeddingSet {
    pub fn new(class: impl Into<String>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        let class = class.into();
        let dim = vectors.first().map(Vec::len).ok_or_else(|| Error::InvalidInput(format!("no embeddings for {class}")))?;
        if dim == 0 || vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::Shape(format!("embeddings for {class} have inconsistent widths")));
        }
        let (mean, std) = column_stats(&vectors);
        Ok(EmbeddingSet { class, vectors, mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

fn column_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let dim = rows[0].len();
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    (mean, var.into_iter().map(|s| (s / n).sqrt()).collect())
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `1 - cos(a, b)`. Both vectors must be nonzero.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidInput("cosine distance of a zero-norm vector".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(1.0 - dot / (na * nb))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierSet {
    /// Indices into the scored set, ascending.
    pub indices: Vec<usize>,
    pub rho: Vec<f64>,
    /// Entries with rho > 1 that the Z filter dropped.
    pub removed: Vec<usize>,
}

impl OutlierSet {
    pub fn sum(&self) -> f64 {
        self.rho.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoveltyVerdict {
    pub nearest: String,
    pub batch_size: usize,
    pub outliers_batch: OutlierSet,
    pub outliers_known: OutlierSet,
    /// `cosdist(mu_S, mu_S + sigma_S)`.
    pub spread: f64,
    /// `cosdist(mu_S, mu_N)`.
    pub shift: f64,
    pub outlier_ratio: f64,
    /// Known-set outlier mass actually used in the denominators.
    pub known_mass: f64,
    pub epsilon_used: bool,
    pub d: f64,
    /// Same quantity with the known outlier mass divided out once.
    pub d_single: f64,
    pub threshold: f64,
    pub single_division: bool,
    pub is_novel: bool,
}

fn rho_all(mean: &[f64], spread: f64, vs: &[Vec<f64>]) -> Result<Vec<f64>> {
    vs.iter().map(|v| Ok(cosine_distance(mean, v)? / spread)).collect()
}

/// Keeps `rho > 1` and then drops entries whose Z score within that subset
/// is at least [`Z_THRESHOLD`].
pub fn outlier_set(rho: &[f64]) -> OutlierSet {
    let cand: Vec<usize> = (0..rho.len()).filter(|&i| rho[i] > 1.0).collect();
    if cand.is_empty() {
        return OutlierSet { indices: vec![], rho: vec![], removed: vec![] };
    }
    let n = cand.len() as f64;
    let mu = cand.iter().map(|&i| rho[i]).sum::<f64>() / n;
    let sd = (cand.iter().map(|&i| (rho[i] - mu).powi(2)).sum::<f64>() / n).sqrt();
    let (mut indices, mut removed) = (Vec::new(), Vec::new());
    for i in cand {
        if sd > 0.0 && (rho[i] - mu) / sd >= Z_THRESHOLD {
            removed.push(i);
        } else {
            indices.push(i);
        }
    }
    let kept = indices.iter().map(|&i| rho[i]).collect();
    OutlierSet { indices, rho: kept, removed }
}

/// Decides whether `batch` comes from a class other than `known`. With
/// `single_division` the verdict uses `d_single` instead of `d`.
pub fn detect(known: &EmbeddingSet, batch: &[Vec<f64>], threshold: f64, single_division: bool) -> Result<NoveltyVerdict> {
    if batch.len() < MIN_BATCH {
        return Err(Error::InvalidInput(format!("batch has {} embeddings, at least {MIN_BATCH} required", batch.len())));
    }
    if batch.iter().any(|v| v.len() != known.dim()) {
        return Err(Error::Shape(format!("batch embeddings are not {}-dimensional", known.dim())));
    }
    if let Some(i) = known.vectors.iter().position(|v| norm(v) == 0.0) {
        return Err(Error::InvalidInput(format!("known embedding {i} of {} has zero norm", known.class)));
    }
    if let Some(i) = batch.iter().position(|v| norm(v) == 0.0) {
        return Err(Error::InvalidInput(format!("batch embedding {i} has zero norm")));
    }
    let mu_s = &known.mean;
    let shifted: Vec<f64> = mu_s.iter().zip(&known.std).map(|(m, s)| m + s).collect();
    let spread = cosine_distance(mu_s, &shifted)?;
    if spread <= 0.0 {
        return Err(Error::InvalidInput(format!("{} embeddings have no angular spread", known.class)));
    }
    let (mu_n, _) = column_stats(batch);
    let shift = cosine_distance(mu_s, &mu_n)?;

    let on = outlier_set(&rho_all(mu_s, spread, batch)?);
    let os = outlier_set(&rho_all(mu_s, spread, &known.vectors)?);
    let mut known_mass = os.sum();
    let epsilon_used = known_mass == 0.0;
    if epsilon_used {
        log::warn!("no outliers among known {} embeddings; using 1 for their outlier mass", known.class);
        known_mass = 1.0;
    }
    let outlier_ratio = on.sum() / known_mass;
    let d_single = outlier_ratio * shift / spread;
    let d = d_single / known_mass;
    let is_novel = if single_division { d_single } else { d } > threshold;
    Ok(NoveltyVerdict {
        nearest: known.class.clone(),
        batch_size: batch.len(),
        outliers_batch: on,
        outliers_known: os,
        spread,
        shift,
        outlier_ratio,
        known_mass,
        epsilon_used,
        d,
        d_single,
        threshold,
        single_division,
        is_novel,
    })
}
