//! Verification of analytic parameter gradients against central finite
//! differences.

use rand::Rng;

use crate::nn::loss::{bce_loss, mse_loss};
use crate::nn::network::Network;
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Bce,
    Mse,
}

fn loss_value(kind: LossKind, pred: &Tensor, target: &Tensor) -> f64 {
    match kind {
        LossKind::Bce => bce_loss(pred, target).0,
        LossKind::Mse => mse_loss(pred, target).0,
    }
}

/// Maximum relative error between analytic and numeric gradients over up
/// to `max_coords` randomly sampled parameter coordinates.
pub fn grad_check(
    net: &Network,
    input: &Tensor,
    target: &Tensor,
    kind: LossKind,
    epsilon: f64,
    max_coords: usize,
    rng: &mut impl Rng,
) -> f64 {
    let (pred, cache) = net.forward(input);
    let grad_loss = match kind {
        LossKind::Bce => bce_loss(&pred, target).1,
        LossKind::Mse => mse_loss(&pred, target).1,
    };
    let (grads, _) = net.backward(&cache, &grad_loss);

    let n = net.param_count();
    let coords: Vec<usize> = if n <= max_coords {
        (0..n).collect()
    } else {
        (0..max_coords).map(|_| rng.gen_range(0..n)).collect()
    };

    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for &i in &coords {
        let orig = probe.param_get(i);
        probe.param_set(i, orig + epsilon);
        let (pred_p, _) = probe.forward(input);
        let lp = loss_value(kind, &pred_p, target);
        probe.param_set(i, orig - epsilon);
        let (pred_m, _) = probe.forward(input);
        let lm = loss_value(kind, &pred_m, target);
        probe.param_set(i, orig);
        let numeric = (lp - lm) / (2.0 * epsilon);
        let analytic = grads.param_get(i);
        let rel = (numeric - analytic).abs() / (numeric.abs() + analytic.abs() + 1e-8);
        worst = worst.max(rel);
    }
    worst
}
