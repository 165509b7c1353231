use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{argmax, softmax_cross_entropy, Network};
use super::optim::Adam;
use crate::error::{Error, Result};
use crate::rng::{stream, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
    /// Candidate rates for [`train_lr_grid`]; ignored by [`train`].
    pub lr_grid: Vec<f64>,
    /// Epochs without validation-accuracy improvement before stopping.
    /// `None` trains for all epochs but still restores the best epoch when
    /// validation data is supplied.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 1e-3, batch_size: 32, epochs: 100, weight_decay: 0.0, lr_grid: Vec::new(), patience: None, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::InvalidInput(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch_size must be at least 1".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::InvalidInput("weight_decay must be non-negative".into()));
        }
        if self.lr_grid.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidInput("lr_grid entries must be positive".into()));
        }
        Ok(())
    }
}

/// Row-major samples with integer labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Samples {
    pub x: Vec<f64>,
    pub dim: usize,
    pub y: Vec<usize>,
}

impl Samples {
    pub fn new(x: Vec<f64>, dim: usize, y: Vec<usize>) -> Result<Self> {
        if dim == 0 || x.len() != dim * y.len() {
            return Err(Error::Shape(format!("{} values do not form {} rows of width {dim}", x.len(), y.len())));
        }
        Ok(Samples { x, dim, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn subset(&self, idx: &[usize]) -> Samples {
        let mut x = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            x.extend_from_slice(self.row(i));
        }
        Samples { x, dim: self.dim, y: idx.iter().map(|&i| self.y[i]).collect() }
    }

    pub fn extend(&mut self, other: &Samples) {
        assert_eq!(self.dim, other.dim);
        self.x.extend_from_slice(&other.x);
        self.y.extend_from_slice(&other.y);
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub lr: f64,
    pub epoch_loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// 0-based epoch whose weights were kept, when validation was used.
    pub best_epoch: Option<usize>,
}

impl History {
    pub fn best_val_accuracy(&self) -> Option<f64> {
        self.best_epoch.map(|e| self.val_accuracy[e])
    }
}

pub fn accuracy(net: &Network, data: &Samples) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let pred = net.predict(&data.x, data.len())?;
    Ok(pred.iter().zip(&data.y).filter(|(p, y)| p == y).count() as f64 / data.len() as f64)
}

fn check_labels(net: &Network, data: &Samples) -> Result<()> {
    let k = net.output_dim();
    if data.dim != net.input_dim() {
        return Err(Error::Shape(format!("samples have width {} but network expects {}", data.dim, net.input_dim())));
    }
    if let Some(&bad) = data.y.iter().find(|&&y| y >= k) {
        return Err(Error::InvalidInput(format!("label {bad} outside softmax arity {k}")));
    }
    Ok(())
}

/// Mini-batch training with softmax cross-entropy and Adam. The shuffle
/// order depends only on `cfg.seed`.
pub fn train(net: &mut Network, data: &Samples, val: Option<&Samples>, cfg: &TrainConfig) -> Result<History> {
    let mut opt = Adam::new(net, cfg.lr, cfg.weight_decay);
    train_with(net, &mut opt, data, val, cfg)
}

/// As [`train`] but continues with an existing optimizer state.
pub fn train_with(
    net: &mut Network,
    opt: &mut Adam,
    data: &Samples,
    val: Option<&Samples>,
    cfg: &TrainConfig,
) -> Result<History> {
    cfg.validate()?;
    check_labels(net, data)?;
    if let Some(v) = val {
        check_labels(net, v)?;
    }
    if data.is_empty() {
        return Err(Error::Insufficient("no training samples".into()));
    }
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;
    opt.sync_shapes(net);
    let k = net.output_dim();
    let mut rng: Rng = stream(cfg.seed, 0x7472_6169_6e);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut hist = History { lr: cfg.lr, ..History::default() };
    let mut best: Option<(f64, usize, Network)> = None;
    let mut xb = Vec::with_capacity(cfg.batch_size * data.dim);
    let mut yb = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            xb.clear();
            yb.clear();
            for &i in chunk {
                xb.extend_from_slice(data.row(i));
                yb.push(data.y[i]);
            }
            let trace = net.forward_batch(&xb, chunk.len())?;
            let logits = trace.logits();
            let (loss, dlogits) = softmax_cross_entropy(logits, &yb, k);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: bi, lr: cfg.lr });
            }
            loss_sum += loss * chunk.len() as f64;
            correct += logits.chunks_exact(k).zip(&yb).filter(|(r, &y)| argmax(r) == y).count();
            let (grads, _) = net.backward(&trace, &dlogits, false);
            opt.step(net, &grads);
        }
        hist.epoch_loss.push(loss_sum / data.len() as f64);
        hist.train_accuracy.push(correct as f64 / data.len() as f64);
        if let Some(v) = val {
            let acc = accuracy(net, v)?;
            hist.val_accuracy.push(acc);
            if best.as_ref().map_or(true, |(b, _, _)| acc > *b) {
                best = Some((acc, epoch, net.clone()));
            }
            if let (Some(p), Some((_, be, _))) = (cfg.patience, best.as_ref()) {
                if epoch - be >= p {
                    break;
                }
            }
        }
    }
    if let Some((_, e, n)) = best {
        *net = n;
        hist.best_epoch = Some(e);
    }
    Ok(hist)
}

/// Trains a copy of `net` per rate in `cfg.lr_grid` (or `cfg.lr` alone) and
/// keeps the one with the highest validation accuracy. Ties go to the earlier rate.
pub fn train_lr_grid(net: &Network, data: &Samples, val: &Samples, cfg: &TrainConfig) -> Result<(Network, History)> {
    let grid = if cfg.lr_grid.is_empty() { vec![cfg.lr] } else { cfg.lr_grid.clone() };
    let mut best: Option<(Network, History)> = None;
    for lr in grid {
        let mut cand = net.clone();
        let c = TrainConfig { lr, ..cfg.clone() };
        let h = train(&mut cand, data, Some(val), &c)?;
        log::debug!("lr {lr}: best val accuracy {:?}", h.best_val_accuracy());
        let better = match &best {
            None => true,
            Some((_, bh)) => h.best_val_accuracy() > bh.best_val_accuracy(),
        };
        if better {
            best = Some((cand, h));
        }
    }
    Ok(best.expect("grid is non-empty"))
}
