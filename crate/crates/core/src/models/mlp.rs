//! One-hidden-layer ReLU network with softmax output, trained by mini-batch
//! SGD on cross-entropy.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{softmax_in_place, Hyper, N_LABELS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub dim: usize,
    pub hidden: usize,
    /// Row-major `hidden x dim`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Row-major `N_LABELS x hidden`.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl NetParams {
    pub fn n_params(dim: usize, hidden: usize) -> usize {
        hidden * dim + hidden + N_LABELS * hidden + N_LABELS
    }

    pub fn to_flat(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn from_flat(dim: usize, hidden: usize, theta: &[f64]) -> Self {
        let (w1, rest) = theta.split_at(hidden * dim);
        let (b1, rest) = rest.split_at(hidden);
        let (w2, b2) = rest.split_at(N_LABELS * hidden);
        NetParams { dim, hidden, w1: w1.to_vec(), b1: b1.to_vec(), w2: w2.to_vec(), b2: b2.to_vec() }
    }

    /// He-initialized weights, zero biases.
    pub fn init(dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = crate::rng::seeded(seed);
        let n1 = Normal::new(0.0, (2.0 / dim.max(1) as f64).sqrt()).expect("finite scale");
        let n2 = Normal::new(0.0, (2.0 / hidden.max(1) as f64).sqrt()).expect("finite scale");
        NetParams {
            dim,
            hidden,
            w1: (0..hidden * dim).map(|_| n1.sample(&mut rng)).collect(),
            b1: vec![0.0; hidden],
            w2: (0..N_LABELS * hidden).map(|_| n2.sample(&mut rng)).collect(),
            b2: vec![0.0; N_LABELS],
        }
    }

    /// Hidden pre-activations and output probabilities.
    fn forward(&self, x: &[f64]) -> (Vec<f64>, [f64; N_LABELS]) {
        let pre: Vec<f64> = (0..self.hidden)
            .map(|h| {
                let w = &self.w1[h * self.dim..(h + 1) * self.dim];
                self.b1[h] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        let mut z = [0.0; N_LABELS];
        for (c, zc) in z.iter_mut().enumerate() {
            let w = &self.w2[c * self.hidden..(c + 1) * self.hidden];
            *zc = self.b2[c] + w.iter().zip(&pre).map(|(a, p)| a * p.max(0.0)).sum::<f64>();
        }
        softmax_in_place(&mut z);
        (pre, z)
    }

    pub fn predict_proba(&self, x: &[f64]) -> [f64; N_LABELS] {
        self.forward(x).1
    }
}

/// Mean cross-entropy over the rows and its gradient with respect to the
/// flattened parameters.
pub fn loss_and_grad(theta: &[f64], dim: usize, hidden: usize, x: &[Vec<f64>], y: &[usize]) -> (f64, Vec<f64>) {
    let net = NetParams::from_flat(dim, hidden, theta);
    let n = x.len() as f64;
    let mut grad = vec![0.0; theta.len()];
    let (o_b1, o_w2) = (hidden * dim, hidden * dim + hidden);
    let o_b2 = o_w2 + N_LABELS * hidden;
    let mut loss = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let (pre, p) = net.forward(row);
        loss -= p[label].max(f64::MIN_POSITIVE).ln() / n;
        let mut d_hidden = vec![0.0; hidden];
        for c in 0..N_LABELS {
            let err = (p[c] - if c == label { 1.0 } else { 0.0 }) / n;
            grad[o_b2 + c] += err;
            for h in 0..hidden {
                grad[o_w2 + c * hidden + h] += err * pre[h].max(0.0);
                d_hidden[h] += err * net.w2[c * hidden + h];
            }
        }
        for h in 0..hidden {
            if pre[h] <= 0.0 {
                continue;
            }
            grad[o_b1 + h] += d_hidden[h];
            let g = &mut grad[h * dim..(h + 1) * dim];
            g.iter_mut().zip(row).for_each(|(gi, xi)| *gi += d_hidden[h] * xi);
        }
    }
    (loss, grad)
}

pub fn fit(x: &[Vec<f64>], y: &[usize], hyper: &Hyper, seed: u64) -> NetParams {
    let dim = x.first().map_or(0, Vec::len);
    let hidden = hyper.hidden.max(1);
    let mut theta = NetParams::init(dim, hidden, seed).to_flat();
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut rng = crate::rng::substream(seed, 1);
    let batch = hyper.batch_size.max(1);
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let bx: Vec<Vec<f64>> = chunk.iter().map(|&i| x[i].clone()).collect();
            let by: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
            let (_, grad) = loss_and_grad(&theta, dim, hidden, &bx, &by);
            theta.iter_mut().zip(&grad).for_each(|(t, g)| *t -= hyper.nn_learning_rate * g);
        }
    }
    NetParams::from_flat(dim, hidden, &theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip() {
        let net = NetParams::init(3, 4, 1);
        assert_eq!(net.to_flat().len(), NetParams::n_params(3, 4));
        assert_eq!(NetParams::from_flat(3, 4, &net.to_flat()), net);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let net = NetParams::init(3, 8, 2);
        let p = net.predict_proba(&[0.5, -1.0, 2.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
