use super::network::{softmax_cross_entropy, Network};
use crate::error::{Error, Result};

/// Worst disagreement found by [`grad_check_detail`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradAudit {
    pub max_rel_error: f64,
    pub layer: usize,
    /// Index into the layer's weights, then biases.
    pub param: usize,
    pub checked: usize,
}

fn loss(net: &Network, input: &[f64], label: usize) -> Result<f64> {
    let f = net.forward(input)?;
    Ok(softmax_cross_entropy(&f.logits, &[label], net.output_dim()).0)
}

/// Max relative error between backprop and central differences of the
/// single-sample cross-entropy loss over every parameter, frozen or not.
pub fn grad_check(net: &Network, input: &[f64], label: usize, h: f64) -> Result<f64> {
    Ok(grad_check_detail(net, input, label, h)?.max_rel_error)
}

pub fn grad_check_detail(net: &Network, input: &[f64], label: usize, h: f64) -> Result<GradAudit> {
    grad_check_floored(net, input, label, h, 1e-12)
}

/// As [`grad_check_detail`] with a custom denominator floor. Central
/// differences carry roughly `eps * |loss| / h` of cancellation noise, so a
/// floor near that scale judges vanishing gradients on absolute error.
pub fn grad_check_floored(net: &Network, input: &[f64], label: usize, h: f64, floor: f64) -> Result<GradAudit> {
    if label >= net.output_dim() {
        return Err(Error::InvalidInput(format!("label {label} outside softmax arity {}", net.output_dim())));
    }
    let mut probe = net.clone();
    probe.layers.iter_mut().for_each(|l| l.spec.frozen = false);
    let trace = probe.forward_batch(input, 1)?;
    let (_, dlogits) = softmax_cross_entropy(trace.logits(), &[label], probe.output_dim());
    let (grads, _) = probe.backward(&trace, &dlogits, false);

    let mut audit = GradAudit { max_rel_error: 0.0, layer: 0, param: 0, checked: 0 };
    for li in 0..probe.layers.len() {
        let nw = probe.layers[li].weights.len();
        let nb = probe.layers[li].bias.len();
        for pi in 0..nw + nb {
            let analytic = if pi < nw { grads.layers[li].weights[pi] } else { grads.layers[li].bias[pi - nw] };
            let orig = param(&mut probe, li, pi, nw).to_owned();
            *param(&mut probe, li, pi, nw) = orig + h;
            let up = loss(&probe, input, label)?;
            *param(&mut probe, li, pi, nw) = orig - h;
            let down = loss(&probe, input, label)?;
            *param(&mut probe, li, pi, nw) = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
            audit.checked += 1;
            if rel > audit.max_rel_error {
                audit.max_rel_error = rel;
                audit.layer = li;
                audit.param = pi;
            }
        }
    }
    Ok(audit)
}

fn param(net: &mut Network, li: usize, pi: usize, nw: usize) -> &mut f64 {
    let l = &mut net.layers[li];
    if pi < nw {
        &mut l.weights[pi]
    } else {
        &mut l.bias[pi - nw]
    }
}
