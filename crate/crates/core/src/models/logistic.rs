//! Multinomial logistic regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::{softmax_in_place, Hyper, N_LABELS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub dim: usize,
    /// Row-major `N_LABELS x dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LogisticParams {
    pub fn zeros(dim: usize) -> Self {
        LogisticParams { dim, weights: vec![0.0; N_LABELS * dim], bias: vec![0.0; N_LABELS] }
    }

    /// Flattened `[weights, bias]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut theta = self.weights.clone();
        theta.extend_from_slice(&self.bias);
        theta
    }

    pub fn from_flat(dim: usize, theta: &[f64]) -> Self {
        let (w, b) = theta.split_at(N_LABELS * dim);
        LogisticParams { dim, weights: w.to_vec(), bias: b.to_vec() }
    }

    pub fn predict_proba(&self, x: &[f64]) -> [f64; N_LABELS] {
        let mut z = [0.0; N_LABELS];
        for (c, zc) in z.iter_mut().enumerate() {
            let w = &self.weights[c * self.dim..(c + 1) * self.dim];
            *zc = self.bias[c] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        softmax_in_place(&mut z);
        z
    }
}

/// Mean cross-entropy plus `lambda/2 * |W|^2`, and its gradient with respect
/// to the flattened parameters.
pub fn loss_and_grad(theta: &[f64], x: &[Vec<f64>], y: &[usize], lambda: f64) -> (f64, Vec<f64>) {
    let dim = x.first().map_or(0, Vec::len);
    let params = LogisticParams::from_flat(dim, theta);
    let n = x.len() as f64;
    let mut grad = vec![0.0; theta.len()];
    let mut loss = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let p = params.predict_proba(row);
        loss -= p[label].max(f64::MIN_POSITIVE).ln() / n;
        for c in 0..N_LABELS {
            let err = (p[c] - if c == label { 1.0 } else { 0.0 }) / n;
            let g = &mut grad[c * dim..(c + 1) * dim];
            g.iter_mut().zip(row).for_each(|(gi, xi)| *gi += err * xi);
            grad[N_LABELS * dim + c] += err;
        }
    }
    for (i, w) in params.weights.iter().enumerate() {
        loss += 0.5 * lambda * w * w;
        grad[i] += lambda * w;
    }
    (loss, grad)
}

pub fn fit(x: &[Vec<f64>], y: &[usize], hyper: &Hyper) -> LogisticParams {
    let dim = x.first().map_or(0, Vec::len);
    let mut theta = LogisticParams::zeros(dim).to_flat();
    for _ in 0..hyper.iterations {
        let (_, grad) = loss_and_grad(&theta, x, y, hyper.lambda);
        theta.iter_mut().zip(&grad).for_each(|(t, g)| *t -= hyper.learning_rate * g);
    }
    LogisticParams::from_flat(dim, &theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_are_uniform() {
        let p = LogisticParams::zeros(3).predict_proba(&[1.0, -2.0, 5.0]);
        for v in p {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_weight_feature_is_ignored() {
        let mut params = LogisticParams::zeros(2);
        params.weights = vec![1.0, 0.0, -1.0, 0.0, 0.5, 0.0, 2.0, 0.0, 0.0, 0.0];
        assert_eq!(params.predict_proba(&[0.3, 1.0]), params.predict_proba(&[0.3, -40.0]));
    }

    #[test]
    fn loss_decreases() {
        let x = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]];
        let y = vec![1, 2, 3];
        let theta0 = LogisticParams::zeros(2).to_flat();
        let fitted = fit(&x, &y, &Hyper { iterations: 50, ..Default::default() });
        let (l0, _) = loss_and_grad(&theta0, &x, &y, 1e-4);
        let (l1, _) = loss_and_grad(&fitted.to_flat(), &x, &y, 1e-4);
        assert!(l1 < l0);
    }
}
