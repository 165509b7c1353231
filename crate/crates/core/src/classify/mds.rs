use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdsEmbedding {
    pub coords: Vec<[f64; 2]>,
    /// Kruskal stress-1 of the embedded distances against the input distances.
    pub stress: f64,
    /// Top two eigenvalues of the double-centred Gram matrix (clamped at 0).
    pub eigenvalues: [f64; 2],
    pub true_labels: Vec<String>,
    pub predicted_labels: Vec<String>,
}

impl MdsEmbedding {
    pub fn with_labels(mut self, truth: Vec<String>, predicted: Vec<String>) -> Result<Self> {
        if truth.len() != self.coords.len() || predicted.len() != self.coords.len() {
            return Err(Error::Shape("one true and one predicted label per point required".into()));
        }
        self.true_labels = truth;
        self.predicted_labels = predicted;
        Ok(self)
    }

    /// Mean coordinate of the points whose true label is `class`.
    pub fn centroid(&self, class: &str) -> Option<[f64; 2]> {
        let pts: Vec<&[f64; 2]> =
            self.coords.iter().zip(&self.true_labels).filter(|(_, l)| *l == class).map(|(c, _)| c).collect();
        if pts.is_empty() {
            return None;
        }
        let n = pts.len() as f64;
        Some([pts.iter().map(|p| p[0]).sum::<f64>() / n, pts.iter().map(|p| p[1]).sum::<f64>() / n])
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Classical (Torgerson) MDS of `n` row vectors of width `dim` into 2-D.
/// Each axis is sign-fixed so its largest-magnitude coordinate is positive.
/// Rank-1 input gets a zero second coordinate.
pub fn mds_embed(x: &[f64], n: usize, dim: usize) -> Result<MdsEmbedding> {
    if n < 3 {
        return Err(Error::InvalidInput(format!("MDS needs at least 3 points, got {n}")));
    }
    if dim == 0 || x.len() != n * dim {
        return Err(Error::Shape(format!("{} values do not form {n} rows of width {dim}", x.len())));
    }
    let rows: Vec<&[f64]> = x.chunks_exact(dim).collect();
    let d2 = DMatrix::from_fn(n, n, |i, j| sq_dist(rows[i], rows[j]));
    let row_mean: Vec<f64> = (0..n).map(|i| d2.row(i).sum() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (d2[(i, j)] - row_mean[i] - row_mean[j] + grand));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let mut coords = vec![[0.0; 2]; n];
    let mut eigenvalues = [0.0; 2];
    for axis in 0..2 {
        let lam = eig.eigenvalues[order[axis]];
        if !(lam > RANK_TOL * top) || lam <= 0.0 {
            continue;
        }
        eigenvalues[axis] = lam;
        let v = eig.eigenvectors.column(order[axis]);
        let pivot = (0..n).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a))).unwrap();
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        let s = lam.sqrt() * sign;
        for i in 0..n {
            coords[i][axis] = v[i] * s;
        }
    }
    let stress = kruskal_stress(&rows, &coords);
    Ok(MdsEmbedding { coords, stress, eigenvalues, true_labels: Vec::new(), predicted_labels: Vec::new() })
}

fn kruskal_stress(rows: &[&[f64]], coords: &[[f64; 2]]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let d = sq_dist(rows[i], rows[j]).sqrt();
            let e = sq_dist(&coords[i], &coords[j]).sqrt();
            num += (d - e) * (d - e);
            den += d * d;
        }
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        0.0
    }
}
