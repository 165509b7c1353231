use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layer::{Activation, Layer, LayerKind, LayerSpec};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Scale applied to freshly grown head rows and inserted layers.
pub const GROWTH_INIT_GAIN: f64 = 0.1;

/// Per-feature affine input normalisation, applied cyclically when the
/// input is longer than the fitted feature count (e.g. flattened sequences).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Fits mean and population std per feature over rows of width `period`.
    /// Constant features get scale 1.
    pub fn fit(x: &[f64], period: usize) -> Result<Self> {
        if period == 0 || x.is_empty() || x.len() % period != 0 {
            return Err(Error::Shape(format!("cannot fit standardizer of period {period} on {} values", x.len())));
        }
        let rows = (x.len() / period) as f64;
        let mut mean = vec![0.0; period];
        for row in x.chunks_exact(period) {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= rows);
        let mut var = vec![0.0; period];
        for row in x.chunks_exact(period) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / rows).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn apply(&self, x: &mut [f64]) {
        let p = self.mean.len();
        for (i, v) in x.iter_mut().enumerate() {
            *v = (*v - self.mean[i % p]) / self.scale[i % p];
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
    #[serde(default)]
    pub input_scaler: Option<Standardizer>,
}

/// Every layer output of a batched forward pass. `acts[0]` is the
/// (standardised) input, `acts[i + 1]` the output of layer `i`.
#[derive(Clone, Debug)]
pub struct Trace {
    pub batch: usize,
    pub acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn logits(&self) -> &[f64] {
        self.acts.last().expect("trace holds the input")
    }

    /// Output of hidden layer `i` (0-based, excludes the head).
    pub fn hidden(&self, i: usize) -> &[f64] {
        &self.acts[i + 1]
    }
}

/// Single-sample forward result.
#[derive(Clone, Debug)]
pub struct Forward {
    pub logits: Vec<f64>,
    /// Outputs of every layer before the head.
    pub hidden: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter gradients; frozen layers hold empty vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<ParamGrad>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMutation {
    AddClass,
    AddLayer,
    AddLayerAndClass,
}

impl Network {
    /// Builds and initialises a network from layer specs.
    pub fn new(specs: &[LayerSpec], rng: &mut Rng) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        let layers = specs.iter().map(|s| Layer::init(*s, 1.0, rng)).collect();
        let net = Network { layers, input_scaler: None };
        net.validate()?;
        Ok(net)
    }

    /// Dense stack `inputs -> hidden... -> classes` with a linear head.
    pub fn mlp(inputs: usize, hidden: &[usize], classes: usize, activation: Activation, rng: &mut Rng) -> Result<Self> {
        let mut specs = Vec::with_capacity(hidden.len() + 1);
        let mut prev = inputs;
        for &h in hidden {
            specs.push(LayerSpec::dense(prev, h, activation));
            prev = h;
        }
        specs.push(LayerSpec::dense(prev, classes, Activation::Linear));
        Network::new(&specs, rng)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            l.validate()?;
            if i > 0 {
                let prev = self.layers[i - 1].spec.kind.output_size();
                if prev != l.spec.kind.input_size() {
                    return Err(Error::Shape(format!(
                        "layer {i} expects {} inputs but layer {} emits {prev}",
                        l.spec.kind.input_size(),
                        i - 1
                    )));
                }
            }
        }
        if let Some(s) = &self.input_scaler {
            if s.mean.is_empty() || s.mean.len() != s.scale.len() || self.input_dim() % s.mean.len() != 0 {
                return Err(Error::Shape("input standardizer does not fit the input width".into()));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.kind.input_size()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.spec.kind.output_size()).unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn set_frozen(&mut self, layer: usize, frozen: bool) {
        self.layers[layer].spec.frozen = frozen;
    }

    pub fn forward_batch(&self, x: &[f64], batch: usize) -> Result<Trace> {
        let dim = self.input_dim();
        if x.len() != batch * dim {
            return Err(Error::Shape(format!("expected {batch} x {dim} inputs, got {} values", x.len())));
        }
        let mut input = x.to_vec();
        if let Some(s) = &self.input_scaler {
            s.apply(&mut input);
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input);
        for layer in &self.layers {
            let y = layer.forward(acts.last().unwrap(), batch);
            acts.push(y);
        }
        Ok(Trace { batch, acts })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        let mut trace = self.forward_batch(x, 1)?;
        let logits = trace.acts.pop().unwrap();
        let hidden = trace.acts.drain(1..).collect();
        Ok(Forward { logits, hidden })
    }

    /// Backpropagates `d_logits` (batch x outputs). Frozen layers get no
    /// parameter gradient; the input gradient is only computed when asked.
    pub fn backward(&self, trace: &Trace, d_logits: &[f64], want_input_grad: bool) -> (Gradients, Option<Vec<f64>>) {
        let n = self.layers.len();
        let mut grads: Vec<ParamGrad> = self
            .layers
            .iter()
            .map(|l| {
                if l.spec.frozen {
                    ParamGrad { weights: Vec::new(), bias: Vec::new() }
                } else {
                    ParamGrad { weights: vec![0.0; l.weights.len()], bias: vec![0.0; l.bias.len()] }
                }
            })
            .collect();
        // Layers below the lowest trainable one need no input gradient.
        let lowest = self.layers.iter().position(|l| !l.spec.frozen).unwrap_or(n);
        let mut dy = d_logits.to_vec();
        let mut dx_out = None;
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            let need_input = if i == 0 { want_input_grad } else { want_input_grad || i > lowest };
            if !need_input && layer.spec.frozen {
                break;
            }
            let g = &mut grads[i];
            let params = (!layer.spec.frozen).then(|| (g.weights.as_mut_slice(), g.bias.as_mut_slice()));
            let dx = layer.backward(&trace.acts[i], &trace.acts[i + 1], &mut dy, trace.batch, params, need_input);
            match dx {
                Some(d) if i > 0 => dy = d,
                Some(d) => dx_out = Some(d),
                None => break,
            }
        }
        (Gradients { layers: grads }, dx_out)
    }

    /// Argmax predictions, fanned out over threads in read-only chunks.
    pub fn predict(&self, x: &[f64], batch: usize) -> Result<Vec<usize>> {
        let dim = self.input_dim();
        if x.len() != batch * dim {
            return Err(Error::Shape(format!("expected {batch} x {dim} inputs, got {} values", x.len())));
        }
        let k = self.output_dim();
        let chunk = 256;
        let parts: Result<Vec<Vec<usize>>> = x
            .par_chunks(chunk * dim)
            .map(|xs| {
                let t = self.forward_batch(xs, xs.len() / dim)?;
                Ok(t.logits().chunks_exact(k).map(argmax).collect())
            })
            .collect();
        Ok(parts?.concat())
    }

    /// Output of hidden layer `layer` for every row of `x`.
    pub fn activations(&self, x: &[f64], batch: usize, layer: usize) -> Result<Vec<f64>> {
        if layer >= self.layers.len() {
            return Err(Error::Shape(format!("network has no layer {layer}")));
        }
        let dim = self.input_dim();
        if x.len() != batch * dim {
            return Err(Error::Shape(format!("expected {batch} x {dim} inputs, got {} values", x.len())));
        }
        let parts: Result<Vec<Vec<f64>>> = x
            .par_chunks(256 * dim)
            .map(|xs| Ok(self.forward_batch(xs, xs.len() / dim)?.acts.swap_remove(layer + 1)))
            .collect();
        Ok(parts?.concat())
    }

    /// Grows the softmax head and/or inserts a hidden layer of `width`
    /// units below it. New parameters use [`GROWTH_INIT_GAIN`]. When `width`
    /// equals the head's input width the inserted layer starts near the
    /// identity and the trained head is kept.
    pub fn mutate_head(&mut self, mode: HeadMutation, width: usize, rng: &mut Rng) -> Result<()> {
        let head_idx = self.layers.len() - 1;
        let head = &self.layers[head_idx];
        let LayerKind::Dense { inputs, outputs } = head.spec.kind else {
            return Err(Error::Shape("head must be a dense layer".into()));
        };
        if head.spec.activation != Activation::Linear {
            return Err(Error::Shape("head must feed a softmax (linear activation)".into()));
        }
        if matches!(mode, HeadMutation::AddLayer | HeadMutation::AddLayerAndClass) {
            if width == 0 {
                return Err(Error::Shape("inserted layer needs at least one unit".into()));
            }
            let act = self
                .layers
                .iter()
                .rev()
                .skip(1)
                .map(|l| l.spec.activation)
                .next()
                .unwrap_or_else(Activation::leaky);
            let mut hidden = Layer::init(LayerSpec::dense(inputs, width, act), GROWTH_INIT_GAIN, rng);
            if width == inputs {
                // Near-identity start keeps the old head meaningful.
                for i in 0..width {
                    hidden.weights[i * inputs + i] += 1.0;
                }
                let old_head = std::mem::replace(&mut self.layers[head_idx], hidden);
                self.layers.push(old_head);
            } else {
                let new_head = Layer::init(LayerSpec::dense(width, outputs, Activation::Linear), GROWTH_INIT_GAIN, rng);
                let frozen = self.layers[head_idx].spec.frozen;
                self.layers[head_idx] = hidden;
                self.layers.push(Layer { spec: LayerSpec { frozen, ..new_head.spec }, ..new_head });
            }
        }
        if matches!(mode, HeadMutation::AddClass | HeadMutation::AddLayerAndClass) {
            let head = self.layers.last_mut().unwrap();
            let LayerKind::Dense { inputs, outputs } = head.spec.kind else { unreachable!() };
            let row = Layer::init(LayerSpec::dense(inputs, 1, Activation::Linear), GROWTH_INIT_GAIN, rng);
            head.weights.extend_from_slice(&row.weights);
            head.bias.push(0.0);
            head.spec.kind = LayerKind::Dense { inputs, outputs: outputs + 1 };
        }
        self.validate()
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Mean softmax cross-entropy over a batch and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &[f64], labels: &[usize], classes: usize) -> (f64, Vec<f64>) {
    let n = labels.len();
    let mut grad = vec![0.0; logits.len()];
    let mut loss = 0.0;
    for (i, (row, &y)) in logits.chunks_exact(classes).zip(labels).enumerate() {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        loss += lse - row[y];
        let g = &mut grad[i * classes..(i + 1) * classes];
        for (gj, z) in g.iter_mut().zip(row) {
            *gj = (z - lse).exp() / n as f64;
        }
        g[y] -= 1.0 / n as f64;
    }
    (loss / n as f64, grad)
}
