//! Softmax link, gradient pairs and multiclass log-loss.

use crate::matrix::Matrix;
use crate::preprocess::ClassLabel;

/// Probabilities are clipped to `[EPS, 1 - EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-15;

/// First and second derivative of the loss with respect to one class margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientPair {
    pub g: f64,
    pub h: f64,
}

/// Numerically stable softmax (max-margin subtraction).
pub fn softmax(margins: &[f64]) -> Vec<f64> {
    let max = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = margins.iter().map(|m| (m - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `g = p - 1{y = k}`, `h = p (1 - p)`.
pub fn gradient(p: f64, is_target: bool) -> GradientPair {
    GradientPair { g: p - if is_target { 1.0 } else { 0.0 }, h: p * (1.0 - p) }
}

/// Mean negative log probability of the true class.
///
/// Panics if `labels` and the rows of `probs` differ in length.
pub fn mlogloss(probs: &Matrix, labels: &[ClassLabel]) -> f64 {
    assert_eq!(probs.rows(), labels.len(), "one probability row per label");
    if labels.is_empty() {
        return 0.0;
    }
    let total: f64 =
        labels.iter().enumerate().map(|(i, y)| -probs.get(i, y.index()).clamp(PROB_EPS, 1.0 - PROB_EPS).ln()).sum();
    total / labels.len() as f64
}

/// Log-loss computed straight from a margin matrix.
pub(crate) fn mlogloss_from_margins(margins: &Matrix, labels: &[ClassLabel]) -> f64 {
    let probs: Vec<Vec<f64>> = margins.iter_rows().map(softmax).collect();
    mlogloss(&Matrix::from_rows(&probs), labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(i: usize) -> ClassLabel {
        ClassLabel::new(i).unwrap()
    }

    #[test]
    fn uniform_loss_is_ln10() {
        let p = Matrix::new(2, 10, vec![0.1; 20]);
        assert!((mlogloss(&p, &[label(0), label(7)]) - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction() {
        let mut row = vec![0.0; 10];
        row[4] = 1.0;
        let loss = mlogloss(&Matrix::from_rows(&[row]), &[label(4)]);
        assert!(loss >= 0.0 && loss <= 1e-14, "{loss}");
    }

    #[test]
    fn half_probability() {
        let p = Matrix::from_rows(&[[0.5, 0.5]]);
        assert!((mlogloss(&p, &[label(1)]) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn softmax_is_shift_invariant_and_normalized() {
        let m = [1.0, -2.0, 0.5, 700.0];
        let a = softmax(&m);
        let b = softmax(&m.map(|v| v - 1234.5));
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(softmax(&[0.0; 10]), vec![0.1; 10]);
    }

    #[test]
    fn gradient_bounds() {
        for i in 0..=100 {
            let p = i as f64 / 100.0;
            for t in [true, false] {
                let gp = gradient(p, t);
                assert!((-1.0..=1.0).contains(&gp.g));
                assert!((0.0..=0.25).contains(&gp.h));
            }
        }
    }
}
