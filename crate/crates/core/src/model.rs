//! Generalized linear models trained by clients: least-squares regression
//! and multinomial logistic regression.
//!
//! Parameter layout: regression uses `(w_0, .., w_{p-1}, bias)`; the
//! logistic model stacks one such block per class.

use serde::{Deserialize, Serialize};

use crate::datagen::{ClientDataset, Targets};
use crate::vecmath::ModelParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    /// Loss `(theta . (x, 1) - y)^2`, no one-half factor.
    LinearRegressionMse,
    /// Mean softmax cross-entropy.
    MultinomialLogistic,
}

impl ModelFamily {
    pub fn dim(self, num_features: usize, num_classes: usize) -> usize {
        match self {
            ModelFamily::LinearRegressionMse => num_features + 1,
            ModelFamily::MultinomialLogistic => num_classes * (num_features + 1),
        }
    }
}

fn affine(theta: &[f64], x: &[f64]) -> f64 {
    let p = x.len();
    theta[..p].iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + theta[p]
}

fn logits(theta: &[f64], x: &[f64], classes: usize) -> Vec<f64> {
    let block = x.len() + 1;
    (0..classes).map(|c| affine(&theta[c * block..(c + 1) * block], x)).collect()
}

fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

fn classes_of(theta: &ModelParams, ds: &ClientDataset) -> usize {
    theta.dim() / (ds.num_features() + 1)
}

/// Loss of a single example.
fn point_loss(theta: &ModelParams, ds: &ClientDataset, i: usize) -> f64 {
    let x = &ds.features[i];
    match &ds.targets {
        Targets::Regression(y) => (affine(&theta.0, x) - y[i]).powi(2),
        Targets::Labels(y) => {
            let ls = log_softmax(&logits(&theta.0, x, classes_of(theta, ds)));
            -ls[y[i]]
        }
    }
}

/// Mean loss over the rows `idx` of `ds`.
pub fn mean_loss_on(theta: &ModelParams, ds: &ClientDataset, idx: impl Iterator<Item = usize>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for i in idx {
        s += point_loss(theta, ds, i);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Empirical loss `F_i(theta)` over the whole dataset.
pub fn empirical_loss(theta: &ModelParams, ds: &ClientDataset) -> f64 {
    mean_loss_on(theta, ds, 0..ds.len())
}

/// Mean gradient over the rows `idx`, accumulated into a fresh vector.
pub fn mean_gradient(theta: &ModelParams, ds: &ClientDataset, idx: &[usize]) -> ModelParams {
    let mut g = vec![0.0; theta.dim()];
    if idx.is_empty() {
        return ModelParams(g);
    }
    for &i in idx {
        let x = &ds.features[i];
        let p = x.len();
        match &ds.targets {
            Targets::Regression(y) => {
                let r = 2.0 * (affine(&theta.0, x) - y[i]);
                for j in 0..p {
                    g[j] += r * x[j];
                }
                g[p] += r;
            }
            Targets::Labels(y) => {
                let classes = classes_of(theta, ds);
                let ls = log_softmax(&logits(&theta.0, x, classes));
                for (c, l) in ls.iter().enumerate() {
                    let r = l.exp() - if y[i] == c { 1.0 } else { 0.0 };
                    let base = c * (p + 1);
                    for j in 0..p {
                        g[base + j] += r * x[j];
                    }
                    g[base + p] += r;
                }
            }
        }
    }
    let n = idx.len() as f64;
    ModelParams(g.into_iter().map(|v| v / n).collect())
}

/// Predicted label for classification models.
pub fn predict_label(theta: &ModelParams, ds: &ClientDataset, i: usize) -> usize {
    let z = logits(&theta.0, &ds.features[i], classes_of(theta, ds));
    let mut best = 0;
    for (c, v) in z.iter().enumerate() {
        if *v > z[best] {
            best = c;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_point(x: f64, y: f64) -> ClientDataset {
        ClientDataset {
            client_id: 0,
            features: vec![vec![x]],
            targets: Targets::Regression(vec![y]),
            true_cluster: None,
        }
    }

    #[test]
    fn mse_gradient_by_hand() {
        let g = mean_gradient(&ModelParams(vec![0.0, 0.0]), &one_point(1.0, 2.0), &[0]);
        assert_eq!(g.0, vec![-4.0, -4.0]);
        assert_eq!(empirical_loss(&ModelParams(vec![0.0, 0.0]), &one_point(1.0, 2.0)), 4.0);
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let ds = ClientDataset {
            client_id: 0,
            features: vec![vec![0.3, -1.2], vec![1.5, 0.4], vec![-0.7, 0.9]],
            targets: Targets::Labels(vec![0, 2, 1]),
            true_cluster: None,
        };
        let theta = ModelParams((0..9).map(|i| 0.1 * i as f64 - 0.4).collect());
        let g = mean_gradient(&theta, &ds, &[0, 1, 2]);
        let h = 1e-6;
        for j in 0..9 {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (empirical_loss(&up, &ds) - empirical_loss(&dn, &ds)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-7, "coord {j}: {fd} vs {}", g[j]);
        }
    }
}
