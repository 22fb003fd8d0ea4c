//! Synthetic reproductions on the four-line regression task.
//!
//! [`CollapseStudy`] compares rebalanced and plain clustering without noise
//! on an imbalanced population; [`TradeoffStudy`] sweeps the rebalancing
//! threshold under a fixed privacy budget.

use rayon::prelude::*;
use serde::Serialize;

use crate::datagen::{gen_synthetic, train_val_split, SyntheticSpec};
use crate::error::Result;
use crate::experiment::four_lines;
use crate::fedsim::{run_experiment, Client, Method, NoiseParams, RunSpec, TrainConfig};
use crate::model::ModelFamily;
use crate::privacy::{calibrate, default_alpha_grid, Calibration, PrivacyConfig, DEFAULT_DELTA};
use crate::vecmath::ModelParams;

/// Train/validation clients for one seed of `spec`.
pub fn split_clients(spec: &SyntheticSpec, seed: u64, train_frac: f64) -> Result<Vec<Client>> {
    gen_synthetic(spec, seed)?
        .iter()
        .map(|ds| {
            let (train, val) = train_val_split(ds, train_frac, seed)?;
            Ok(Client { train, val })
        })
        .collect()
}

/// Smallest achievable worst-case slope error over matchings of models to lines.
pub fn slope_error(models: &[ModelParams], slopes: &[f64]) -> f64 {
    fn go(models: &[ModelParams], slopes: &[f64], used: &mut Vec<bool>, j: usize, worst: f64, best: &mut f64) {
        if worst >= *best {
            return;
        }
        if j == slopes.len() {
            *best = worst;
            return;
        }
        for i in 0..models.len() {
            if !used[i] {
                used[i] = true;
                let e = (models[i][0] - slopes[j]).abs();
                go(models, slopes, used, j + 1, worst.max(e), best);
                used[i] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(models, slopes, &mut vec![false; models.len()], 0, 0.0, &mut best);
    best
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Result of one seed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub slopes: Vec<f64>,
    pub slope_error: f64,
    pub clustering_accuracy: f64,
    pub collapsed_clusters: usize,
}

impl SeedOutcome {
    pub fn recovered(&self, tol: f64, min_accuracy: f64) -> bool {
        self.slope_error <= tol && self.clustering_accuracy >= min_accuracy
    }
}

/// Training settings shared by both studies.
pub fn study_train() -> TrainConfig {
    TrainConfig {
        gamma: 1.0,
        local_lr: 0.1,
        local_epochs: 5,
        batch_size: 4,
        model_family: ModelFamily::LinearRegressionMse,
        num_classes: 2,
    }
}

/// Non-private run on a 5:1:1:1 population of four lines.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CollapseStudy {
    pub data: SyntheticSpec,
    pub seeds: Vec<u64>,
    pub rounds: u32,
    pub b: usize,
    pub train: TrainConfig,
    pub init_std: f64,
    pub train_frac: f64,
    pub c_theta: f64,
}

impl Default for CollapseStudy {
    fn default() -> Self {
        Self {
            data: four_lines(vec![40, 8, 8, 8]),
            seeds: (0..10).collect(),
            rounds: 1000,
            // round(q M) / k at q = 1, halved
            b: 8,
            train: TrainConfig { local_lr: 0.3, local_epochs: 1, ..study_train() },
            init_std: 0.3,
            train_frac: 0.8,
            c_theta: 100.0,
        }
    }
}

impl CollapseStudy {
    pub fn run(&self, method: Method) -> Result<Vec<SeedOutcome>> {
        let slopes: Vec<f64> = self.data.lines.iter().map(|l| l.0).collect();
        self.seeds
            .par_iter()
            .map(|&seed| {
                let clients = split_clients(&self.data, seed, self.train_frac)?;
                let spec = RunSpec {
                    method,
                    k: self.data.k,
                    q: 1.0,
                    rounds: self.rounds,
                    b: self.b,
                    train: self.train.clone(),
                    noise: NoiseParams::non_private(self.c_theta),
                    init_std: self.init_std,
                    eval_every: 1,
                    seed,
                };
                let h = run_experiment(&spec, &clients)?;
                let last = h.evals.last().expect("round 0 is always evaluated");
                let models = &h.final_state.cluster_models;
                Ok(SeedOutcome {
                    seed,
                    slopes: models.iter().map(|m| m[0]).collect(),
                    slope_error: slope_error(models, &slopes),
                    clustering_accuracy: last.eval.clustering_accuracy.unwrap_or(0.0),
                    collapsed_clusters: last.collapsed_clusters,
                })
            })
            .collect()
    }
}

/// Threshold sweep at a calibrated privacy budget.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TradeoffStudy {
    pub data: SyntheticSpec,
    pub seeds: Vec<u64>,
    pub rounds: u32,
    pub q: f64,
    pub target_eps: f64,
    pub delta: f64,
    pub identifier_share: f64,
    pub c_theta: f64,
    pub c_s: f64,
    pub bs: Vec<usize>,
    pub train: TrainConfig,
    pub init_std: f64,
    pub train_frac: f64,
}

impl Default for TradeoffStudy {
    fn default() -> Self {
        Self {
            data: four_lines(vec![40, 8, 8, 8]),
            seeds: (0..20).collect(),
            // eps = 4 is only reachable for short runs at q = 0.5
            rounds: 6,
            q: 0.5,
            target_eps: 4.0,
            delta: DEFAULT_DELTA,
            identifier_share: 0.5,
            c_theta: 1.0,
            c_s: 0.1,
            bs: vec![0, 2, 4, 6],
            train: study_train(),
            init_std: 0.1,
            train_frac: 0.8,
        }
    }
}

/// Final clustering accuracies for one threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub b: usize,
    pub accuracies: Vec<f64>,
    pub median_accuracy: f64,
    pub median_slope_error: f64,
}

impl TradeoffStudy {
    pub fn noise(&self) -> Result<Calibration> {
        let template = PrivacyConfig {
            c_theta: self.c_theta,
            c_s: self.c_s,
            sigma_theta: 1.0,
            sigma_s: 1.0,
            q: self.q,
            rounds: self.rounds,
            delta: self.delta,
            alpha_grid: default_alpha_grid(),
        };
        calibrate(self.target_eps, &template, self.identifier_share)
    }

    pub fn run(&self) -> Result<Vec<TradeoffPoint>> {
        let sigmas = self.noise()?;
        let slopes: Vec<f64> = self.data.lines.iter().map(|l| l.0).collect();
        let noise = NoiseParams {
            c_theta: self.c_theta,
            c_s: self.c_s,
            sigma_theta: sigmas.sigma_theta,
            sigma_s: sigmas.sigma_s,
        };
        let jobs: Vec<(usize, u64)> =
            self.bs.iter().flat_map(|&b| self.seeds.iter().map(move |&s| (b, s))).collect();
        let results: Vec<(usize, f64, f64)> = jobs
            .par_iter()
            .map(|&(b, seed)| {
                let clients = split_clients(&self.data, seed, self.train_frac)?;
                let spec = RunSpec {
                    method: if b == 0 { Method::DpIfca } else { Method::RrIfca },
                    k: self.data.k,
                    q: self.q,
                    rounds: self.rounds,
                    b,
                    train: self.train.clone(),
                    noise,
                    init_std: self.init_std,
                    eval_every: self.rounds.max(1),
                    seed,
                };
                let h = run_experiment(&spec, &clients)?;
                let acc = h.evals.last().and_then(|e| e.eval.clustering_accuracy).unwrap_or(0.0);
                Ok((b, acc, slope_error(&h.final_state.cluster_models, &slopes)))
            })
            .collect::<Result<_>>()?;
        Ok(self
            .bs
            .iter()
            .map(|&b| {
                let mut acc: Vec<f64> = results.iter().filter(|r| r.0 == b).map(|r| r.1).collect();
                let mut err: Vec<f64> = results.iter().filter(|r| r.0 == b).map(|r| r.2).collect();
                TradeoffPoint { b, accuracies: acc.clone(), median_accuracy: median(&mut acc), median_slope_error: median(&mut err) }
            })
            .collect())
    }
}
