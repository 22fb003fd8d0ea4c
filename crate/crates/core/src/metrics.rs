//! Evaluation metrics and calculators for the analytic misclustering and
//! convergence bounds.

use serde::{Deserialize, Serialize};

use crate::cluster_engine::assign_by_loss;
use crate::datagen::{ClientDataset, Targets};
use crate::error::{Error, Result};
use crate::fedsim::Client;
use crate::model::{empirical_loss, predict_label, ModelFamily};
use crate::vecmath::ModelParams;

/// Largest `k` accepted by the brute-force label matching.
pub const MAX_MATCHING_K: usize = 8;

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

/// Fraction of clients whose predicted cluster matches the truth under the
/// best relabeling of predictions.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    if k > MAX_MATCHING_K {
        return Err(Error::Unsupported(format!("clustering accuracy needs k <= {MAX_MATCHING_K}, got {k}")));
    }
    if pred.len() != truth.len() {
        return Err(Error::Config("pred and truth lengths differ".into()));
    }
    if pred.is_empty() {
        return Ok(1.0);
    }
    if pred.iter().chain(truth).any(|&c| c >= k) {
        return Err(Error::Config(format!("cluster index outside 0..{k}")));
    }
    // confusion[p][t]
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        confusion[p][t] += 1;
    }
    let best = permutations(k)
        .iter()
        .map(|perm| (0..k).map(|p| confusion[p][perm[p]]).sum::<usize>())
        .max()
        .unwrap_or(0);
    Ok(best as f64 / pred.len() as f64)
}

/// Number of clusters that received fewer than `threshold` updates over the
/// trailing `window` rounds of `history` (post-rebalance group sizes).
pub fn detect_collapse(history: &[Vec<usize>], window: usize, threshold: usize) -> usize {
    assert!(window >= 1, "window must be positive");
    let Some(first) = history.first() else { return 0 };
    let start = history.len().saturating_sub(window);
    (0..first.len())
        .filter(|&j| history[start..].iter().map(|s| s[j]).sum::<usize>() < threshold)
        .count()
}

/// Mean held-out loss pooled over all examples, plus accuracy for classifiers.
pub fn eval_model(model: &ModelParams, datasets: &[ClientDataset], family: ModelFamily) -> (f64, Option<f64>) {
    let (mut loss, mut correct, mut n) = (0.0, 0usize, 0usize);
    for ds in datasets {
        loss += empirical_loss(model, ds) * ds.len() as f64;
        n += ds.len();
        if let Targets::Labels(y) = &ds.targets {
            correct += (0..ds.len()).filter(|&i| predict_label(model, ds, i) == y[i]).count();
        }
    }
    if n == 0 {
        return (0.0, None);
    }
    let acc = (family == ModelFamily::MultinomialLogistic).then(|| correct as f64 / n as f64);
    (loss / n as f64, acc)
}

/// Metrics of a set of cluster models over the whole federation.
#[derive(Clone, Debug, PartialEq)]
pub struct FederationEval {
    /// Mean over clients of the training loss of their chosen model.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: Option<f64>,
    /// Present when every client carries a ground-truth cluster.
    pub clustering_accuracy: Option<f64>,
    /// Chosen model per client (minimal training loss).
    pub assignments: Vec<usize>,
}

/// Each client is served by the model with minimal loss on its training split.
pub fn evaluate_federation(models: &[ModelParams], clients: &[Client], family: ModelFamily) -> FederationEval {
    let n = clients.len().max(1) as f64;
    let mut assignments = Vec::with_capacity(clients.len());
    let (mut tr, mut va, mut acc) = (0.0, 0.0, 0.0);
    for c in clients {
        let j = assign_by_loss(&c.train, models).argmax();
        assignments.push(j);
        tr += empirical_loss(&models[j], &c.train);
        let (l, a) = eval_model(&models[j], std::slice::from_ref(&c.val), family);
        va += l;
        acc += a.unwrap_or(0.0);
    }
    let truth: Option<Vec<usize>> = clients.iter().map(Client::true_cluster).collect();
    let clustering_accuracy = truth.and_then(|t| {
        let k = t.iter().copied().max().map_or(0, |m| m + 1).max(models.len());
        clustering_accuracy(&assignments, &t, k).ok()
    });
    FederationEval {
        train_loss: tr / n,
        val_loss: va / n,
        val_accuracy: (family == ModelFamily::MultinomialLogistic).then(|| acc / n),
        clustering_accuracy,
        assignments,
    }
}

/// Constants of the convex analysis of loss-based clustering with rebalancing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisParams {
    /// Strong convexity λ.
    pub lambda_sc: f64,
    /// Smoothness L.
    pub l_smooth: f64,
    /// Loss variance bound η².
    pub eta2: f64,
    /// Gradient variance bound v².
    pub v2: f64,
    /// Cluster-size variance bound μ².
    pub mu2: f64,
    /// Gradient norm bound G.
    pub g: f64,
    /// Separation slack β ∈ (0, 1/2).
    pub beta: f64,
    /// Initialization slack α₀ ∈ (0, 1/2).
    pub alpha0: f64,
    /// Minimum distance Δ between optimal cluster models.
    pub delta_sep: f64,
    pub m: u64,
    pub k: u64,
    pub b: u64,
    pub gamma: f64,
    pub sigma_s: f64,
    pub sigma_theta: f64,
    pub c_theta: f64,
    /// Failure probability δ_c.
    pub delta_c: f64,
    pub d: u64,
}

impl AnalysisParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_sc", self.lambda_sc),
            ("l_smooth", self.l_smooth),
            ("delta_sep", self.delta_sep),
            ("gamma", self.gamma),
            ("delta_c", self.delta_c),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("eta2", self.eta2), ("v2", self.v2), ("mu2", self.mu2), ("sigma_s", self.sigma_s), ("sigma_theta", self.sigma_theta), ("c_theta", self.c_theta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        if !(self.beta > 0.0 && self.beta < 0.5) {
            return Err(Error::Domain(format!("beta must lie in (0, 1/2), got {}", self.beta)));
        }
        if self.lambda_sc > self.l_smooth {
            return Err(Error::Domain("strong convexity must not exceed smoothness".into()));
        }
        if self.k == 0 {
            return Err(Error::Domain("k must be positive".into()));
        }
        if (self.m as f64) / (self.k as f64) <= self.b as f64 {
            return Err(Error::Domain(format!(
                "need M/k > B, got M = {}, k = {}, B = {}",
                self.m, self.k, self.b
            )));
        }
        Ok(())
    }
}

/// Upper bound on the per-round probability that a client update lands in a wrong cluster.
pub fn tau_bound(p: &AnalysisParams) -> Result<f64> {
    p.validate()?;
    let k = p.k as f64;
    let separation = 8.0 * p.eta2 * k / (p.beta.powi(2) * p.lambda_sc.powi(2) * p.delta_sep.powi(4));
    let identifier = if p.sigma_s == 0.0 {
        0.0
    } else {
        p.sigma_s * k / std::f64::consts::PI.sqrt() * (-1.0 / (4.0 * p.sigma_s * p.sigma_s)).exp()
    };
    let gap = p.m as f64 / k - p.b as f64;
    let size = k * k * p.mu2 / (gap * gap);
    Ok(separation + identifier + size)
}

/// The four additive terms of the one-step error floor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorTerms {
    pub gradient_noise: f64,
    pub misclustering: f64,
    pub cross_cluster: f64,
    pub privacy: f64,
}

impl FloorTerms {
    pub fn total(&self) -> f64 {
        self.gradient_noise + self.misclustering + self.cross_cluster + self.privacy
    }
}

/// Outcome of [`contraction_params`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ContractionBound {
    Bounded {
        tau: f64,
        rho: f64,
        /// Per-round contraction factor K.
        contraction: f64,
        eps_floor: f64,
        terms: FloorTerms,
    },
    /// `B δ_c <= 4 τ M`: the error floor is undefined.
    Vacuous { tau: f64, reason: String },
}

/// Privacy term of the error floor alone; defined whenever `B > 0`.
pub fn privacy_floor_term(p: &AnalysisParams) -> f64 {
    let d = p.d as f64;
    let l4 = (4.0 / p.delta_c).ln();
    2.0 * p.gamma * p.sigma_theta * p.c_theta / p.b as f64 * (d + 2.0 * (d * l4).sqrt() + 2.0 * l4).sqrt()
}

pub fn contraction_params(p: &AnalysisParams) -> Result<ContractionBound> {
    let tau = tau_bound(p)?;
    let (m, k, b) = (p.m as f64, p.k as f64, p.b as f64);
    let dc = p.delta_c;
    if !(b * dc > 4.0 * tau * m) {
        return Ok(ContractionBound::Vacuous {
            tau,
            reason: format!("B * delta_c = {} does not exceed 4 tau M = {}", b * dc, 4.0 * tau * m),
        });
    }
    let rho = m - (k - 1.0) * b;
    let contraction = p.gamma * p.l_smooth * (b - 2.0 * tau * m / dc) / (2.0 * rho);
    let v = p.v2.sqrt();
    let terms = FloorTerms {
        gradient_noise: 4.0 * v / (dc * (b * dc - 4.0 * tau * m)).sqrt(),
        misclustering: 6.0 * tau * p.gamma * p.l_smooth * p.delta_sep * m / (dc * b),
        cross_cluster: 8.0 * p.gamma * v * k * (tau * k * m).sqrt() / (b * dc * dc.sqrt()),
        privacy: privacy_floor_term(p),
    };
    Ok(ContractionBound::Bounded { tau, rho, contraction, eps_floor: terms.total(), terms })
}

/// Round count after which every cluster model is within `2 eps / K` of its optimum.
///
/// `None` when the bound is vacuous or the contraction factor lies outside `(0, 1)`.
pub fn rounds_to_converge(p: &AnalysisParams, bound: &ContractionBound) -> Option<f64> {
    let ContractionBound::Bounded { contraction, eps_floor, .. } = bound else { return None };
    let kf = *contraction;
    if !(kf > 0.0 && kf < 1.0) || !(*eps_floor > 0.0) || !(p.alpha0 > 0.0 && p.alpha0 < 0.5) {
        return None;
    }
    let eps_t = 2.0 * eps_floor / kf;
    let scale = p.delta_sep * p.lambda_sc.sqrt() / p.l_smooth.sqrt();
    Some((scale / (2.0 * eps_t)).ln() / kf + (scale / (8.0 * (0.5 - p.alpha0))).ln() / (1.0 - kf).ln())
}
