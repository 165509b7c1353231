use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let k = classes.len();
        ConfusionMatrix { classes, counts: vec![vec![0; k]; k] }
    }

    pub fn from_predictions(classes: Vec<String>, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Shape(format!("{} labels vs {} predictions", truth.len(), predicted.len())));
        }
        let mut m = ConfusionMatrix::new(classes);
        let k = m.classes.len();
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= k || p >= k {
                return Err(Error::InvalidInput(format!("label pair ({t}, {p}) outside {k} classes")));
            }
            m.counts[t][p] += 1;
        }
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (0..self.len()).map(|i| self.counts[i][i]).sum::<u64>() as f64 / total as f64
    }

    pub fn index_of(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    /// Symmetric confusion count between two classes (a→b plus b→a).
    pub fn mutual(&self, a: &str, b: &str) -> Option<u64> {
        let (i, j) = (self.index_of(a)?, self.index_of(b)?);
        Some(self.counts[i][j] + self.counts[j][i])
    }

    /// Precision and recall per class; 0 where undefined.
    pub fn metrics(&self) -> Metrics {
        let k = self.len();
        let per_class = (0..k)
            .map(|i| {
                let tp = self.counts[i][i] as f64;
                let support: u64 = self.counts[i].iter().sum();
                let predicted: u64 = (0..k).map(|r| self.counts[r][i]).sum();
                ClassMetrics {
                    class: self.classes[i].clone(),
                    precision: if predicted > 0 { tp / predicted as f64 } else { 0.0 },
                    recall: if support > 0 { tp / support as f64 } else { 0.0 },
                    support,
                }
            })
            .collect();
        Metrics { accuracy: self.accuracy(), per_class }
    }
}
