use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Default Leaky ReLU negative slope.
pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu { slope: f64 },
    Relu,
    Linear,
}

impl Activation {
    pub fn leaky() -> Self {
        Activation::LeakyRelu { slope: LEAKY_SLOPE }
    }

    pub(crate) fn apply(self, x: &mut [f64]) {
        match self {
            Activation::LeakyRelu { slope } => x.iter_mut().for_each(|v| {
                if *v < 0.0 {
                    *v *= slope
                }
            }),
            Activation::Relu => x.iter_mut().for_each(|v| {
                if *v < 0.0 {
                    *v = 0.0
                }
            }),
            Activation::Linear => {}
        }
    }

    /// Multiplies `grad` by the derivative, read off the activation output.
    pub(crate) fn backprop(self, out: &[f64], grad: &mut [f64]) {
        match self {
            Activation::LeakyRelu { slope } => grad.iter_mut().zip(out).for_each(|(g, &o)| {
                if o <= 0.0 {
                    *g *= slope
                }
            }),
            Activation::Relu => grad.iter_mut().zip(out).for_each(|(g, &o)| {
                if o <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Linear => {}
        }
    }
}

/// Layer geometry. Conv1d inputs and outputs are channels-last, so a
/// receptive field is one contiguous run of `kernel * channels` values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerKind {
    Dense { inputs: usize, outputs: usize },
    Conv1d { length: usize, channels: usize, filters: usize, kernel: usize, stride: usize },
}

impl LayerKind {
    pub fn conv1d(length: usize, channels: usize, filters: usize, kernel: usize, stride: usize) -> Result<Self> {
        if kernel == 0 || stride == 0 || kernel > length {
            return Err(Error::Shape(format!("conv1d kernel {kernel} / stride {stride} invalid for length {length}")));
        }
        Ok(LayerKind::Conv1d { length, channels, filters, kernel, stride })
    }

    /// Number of output positions of a conv layer: `floor((length - kernel) / stride) + 1`.
    pub fn out_len(self) -> usize {
        match self {
            LayerKind::Dense { .. } => 1,
            LayerKind::Conv1d { length, kernel, stride, .. } => (length - kernel) / stride + 1,
        }
    }

    pub fn input_size(self) -> usize {
        match self {
            LayerKind::Dense { inputs, .. } => inputs,
            LayerKind::Conv1d { length, channels, .. } => length * channels,
        }
    }

    pub fn output_size(self) -> usize {
        match self {
            LayerKind::Dense { outputs, .. } => outputs,
            LayerKind::Conv1d { filters, .. } => self.out_len() * filters,
        }
    }

    /// `(rows, cols)` of the weight matrix.
    pub fn weight_shape(self) -> (usize, usize) {
        match self {
            LayerKind::Dense { inputs, outputs } => (outputs, inputs),
            LayerKind::Conv1d { channels, filters, kernel, .. } => (filters, kernel * channels),
        }
    }

    pub fn bias_len(self) -> usize {
        self.weight_shape().0
    }

    fn fan_in(self) -> usize {
        self.weight_shape().1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub activation: Activation,
    #[serde(default)]
    pub frozen: bool,
}

impl LayerSpec {
    pub fn dense(inputs: usize, outputs: usize, activation: Activation) -> Self {
        LayerSpec { kind: LayerKind::Dense { inputs, outputs }, activation, frozen: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub spec: LayerSpec,
    /// Row-major, shape [`LayerKind::weight_shape`].
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    /// Kaiming-uniform weights (bound `sqrt(6 / fan_in)`) times `gain`, zero bias.
    pub fn init(spec: LayerSpec, gain: f64, rng: &mut Rng) -> Self {
        let (rows, cols) = spec.kind.weight_shape();
        let bound = gain * (6.0 / spec.kind.fan_in() as f64).sqrt();
        let weights = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
        Layer { spec, weights, bias: vec![0.0; rows] }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (r, c) = self.spec.kind.weight_shape();
        if self.weights.len() != r * c || self.bias.len() != r {
            return Err(Error::Shape(format!(
                "layer {:?} expects {}x{} weights and {} biases, found {} and {}",
                self.spec.kind,
                r,
                c,
                r,
                self.weights.len(),
                self.bias.len()
            )));
        }
        if let LayerKind::Conv1d { kernel, stride, length, .. } = self.spec.kind {
            if kernel == 0 || stride == 0 || kernel > length {
                return Err(Error::Shape(format!("invalid conv1d geometry {:?}", self.spec.kind)));
            }
        }
        Ok(())
    }

    /// Forward pass for `batch` rows of `x`; returns post-activation outputs.
    pub(crate) fn forward(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let kind = self.spec.kind;
        let out_size = kind.output_size();
        let mut y = vec![0.0; batch * out_size];
        match kind {
            LayerKind::Dense { inputs, outputs } => {
                gemm(batch, inputs, outputs, x, (inputs, 1), &self.weights, (1, inputs), 0.0, &mut y, (outputs, 1));
                for row in y.chunks_exact_mut(outputs) {
                    row.iter_mut().zip(&self.bias).for_each(|(v, b)| *v += b);
                }
            }
            LayerKind::Conv1d { channels, filters, kernel, .. } => {
                let kc = kernel * channels;
                let patches = im2col(kind, x, batch);
                gemm(batch * kind.out_len(), kc, filters, &patches, (kc, 1), &self.weights, (1, kc), 0.0, &mut y, (filters, 1));
                for row in y.chunks_exact_mut(filters) {
                    row.iter_mut().zip(&self.bias).for_each(|(v, b)| *v += b);
                }
            }
        }
        self.spec.activation.apply(&mut y);
        y
    }

    /// Backward pass. `dy` holds dLoss/d(output) and is turned into
    /// dLoss/d(pre-activation) in place. Accumulates parameter gradients into
    /// `dw`/`db` when given and returns dLoss/d(input) when requested.
    pub(crate) fn backward(
        &self,
        x: &[f64],
        y: &[f64],
        dy: &mut [f64],
        batch: usize,
        params: Option<(&mut [f64], &mut [f64])>,
        want_input: bool,
    ) -> Option<Vec<f64>> {
        self.spec.activation.backprop(y, dy);
        let kind = self.spec.kind;
        match kind {
            LayerKind::Dense { inputs, outputs } => {
                if let Some((dw, db)) = params {
                    // dW += dZ^T X
                    gemm(outputs, batch, inputs, dy, (1, outputs), x, (inputs, 1), 1.0, dw, (inputs, 1));
                    for row in dy.chunks_exact(outputs) {
                        db.iter_mut().zip(row).for_each(|(b, g)| *b += g);
                    }
                }
                want_input.then(|| {
                    let mut dx = vec![0.0; batch * inputs];
                    gemm(batch, outputs, inputs, dy, (outputs, 1), &self.weights, (inputs, 1), 0.0, &mut dx, (inputs, 1));
                    dx
                })
            }
            LayerKind::Conv1d { channels, filters, kernel, stride, .. } => {
                let rows = batch * kind.out_len();
                let kc = kernel * channels;
                if let Some((dw, db)) = params {
                    let patches = im2col(kind, x, batch);
                    // dW (F x KC) += dZ^T (F x rows) * P (rows x KC)
                    gemm(filters, rows, kc, dy, (1, filters), &patches, (kc, 1), 1.0, dw, (kc, 1));
                    for row in dy.chunks_exact(filters) {
                        db.iter_mut().zip(row).for_each(|(b, g)| *b += g);
                    }
                }
                want_input.then(|| {
                    let mut dpatch = vec![0.0; rows * kc];
                    gemm(rows, filters, kc, dy, (filters, 1), &self.weights, (kc, 1), 0.0, &mut dpatch, (kc, 1));
                    let (in_size, l, step) = (kind.input_size(), kind.out_len(), stride * channels);
                    let mut dx = vec![0.0; batch * in_size];
                    for (r, drow) in dpatch.chunks_exact(kc).enumerate() {
                        let start = (r / l) * in_size + (r % l) * step;
                        dx[start..start + kc].iter_mut().zip(drow).for_each(|(a, g)| *a += g);
                    }
                    dx
                })
            }
        }
    }
}

/// Stacks every receptive field of every sample as one row.
fn im2col(kind: LayerKind, x: &[f64], batch: usize) -> Vec<f64> {
    let LayerKind::Conv1d { channels, kernel, stride, .. } = kind else { unreachable!("im2col on a dense layer") };
    let (in_size, l, kc) = (kind.input_size(), kind.out_len(), kernel * channels);
    let mut p = Vec::with_capacity(batch * l * kc);
    for s in 0..batch {
        for q in 0..l {
            let start = s * in_size + q * stride * channels;
            p.extend_from_slice(&x[start..start + kc]);
        }
    }
    p
}

/// `C = A B + beta C` with explicit (row, col) strides for each operand.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let reach = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs + 1;
    if k > 0 {
        assert!(a.len() >= reach(m, k, rsa, csa) && b.len() >= reach(k, n, rsb, csb));
    }
    assert!(c.len() >= reach(m, n, rsc, csc));
    // SAFETY: the bounds checks above cover every element the kernel touches,
    // and `c` is borrowed mutably so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}
