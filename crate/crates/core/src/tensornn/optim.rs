use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub m_w: Vec<f64>,
    pub v_w: Vec<f64>,
    pub m_b: Vec<f64>,
    pub v_b: Vec<f64>,
}

/// Adam with decoupled weight decay: `p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)`.
/// Frozen layers are skipped entirely.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub t: u64,
    pub moments: Vec<Moments>,
}

impl Adam {
    pub fn new(net: &Network, lr: f64, weight_decay: f64) -> Self {
        let moments = net
            .layers
            .iter()
            .map(|l| Moments {
                m_w: vec![0.0; l.weights.len()],
                v_w: vec![0.0; l.weights.len()],
                m_b: vec![0.0; l.bias.len()],
                v_b: vec![0.0; l.bias.len()],
            })
            .collect();
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, t: 0, moments }
    }

    /// Re-sizes moment buffers after the network changed shape. Layers whose
    /// parameter count is unchanged keep their state.
    pub fn sync_shapes(&mut self, net: &Network) {
        let fresh = Adam::new(net, self.lr, self.weight_decay);
        let mut old = std::mem::take(&mut self.moments).into_iter();
        self.moments = fresh
            .moments
            .into_iter()
            .map(|f| match old.next() {
                Some(o) if o.m_w.len() == f.m_w.len() && o.m_b.len() == f.m_b.len() => o,
                _ => f,
            })
            .collect();
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((layer, g), m) in net.layers.iter_mut().zip(&grads.layers).zip(&mut self.moments) {
            if layer.spec.frozen {
                continue;
            }
            let hp = Hyper { lr: self.lr, b1: self.beta1, b2: self.beta2, eps: self.eps, wd: self.weight_decay, c1, c2 };
            update(&mut layer.weights, &g.weights, &mut m.m_w, &mut m.v_w, hp);
            update(&mut layer.bias, &g.bias, &mut m.m_b, &mut m.v_b, hp);
        }
    }
}

#[derive(Clone, Copy)]
struct Hyper {
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    wd: f64,
    c1: f64,
    c2: f64,
}

fn update(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], h: Hyper) {
    for i in 0..p.len() {
        m[i] = h.b1 * m[i] + (1.0 - h.b1) * g[i];
        v[i] = h.b2 * v[i] + (1.0 - h.b2) * g[i] * g[i];
        let mh = m[i] / h.c1;
        let vh = v[i] / h.c2;
        p[i] -= h.lr * (mh / (vh.sqrt() + h.eps) + h.wd * p[i]);
    }
}
