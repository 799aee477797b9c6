//! Loss functions returning (value, gradient w.r.t. the prediction).

use crate::nn::tensor::Tensor;

/// Clamp bound keeping log() finite for saturated probabilities.
pub const PROB_CLAMP: f64 = 1e-12;

/// Binary cross-entropy, averaged per element (and so per sample across
/// the batch). Predictions are clamped into [PROB_CLAMP, 1 - PROB_CLAMP].
pub fn bce_loss(pred: &Tensor, labels: &Tensor) -> (f64, Tensor) {
    assert_eq!(pred.shape, labels.shape, "bce shape mismatch");
    let n = pred.numel() as f64;
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(pred.shape);
    for i in 0..pred.numel() {
        let p = pred.data[i].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let y = labels.data[i];
        loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        grad.data[i] = (-(y / p) + (1.0 - y) / (1.0 - p)) / n;
    }
    (loss / n, grad)
}

/// Mean squared error per element.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> (f64, Tensor) {
    assert_eq!(pred.shape, target.shape, "mse shape mismatch");
    let n = pred.numel() as f64;
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(pred.shape);
    for i in 0..pred.numel() {
        let d = pred.data[i] - target.data[i];
        loss += d * d;
        grad.data[i] = 2.0 * d / n;
    }
    (loss / n, grad)
}
