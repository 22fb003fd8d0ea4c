//! Round orchestration for clustered federated training.
//!
//! A round samples a fixed-size subset of clients, lets each of them pick a
//! cluster and train locally, then runs the server pipeline from
//! [`crate::cluster_engine`]: identifier privatization and decoding,
//! optional rebalancing, server-side clipping, noisy aggregation and the
//! cluster model step.
//!
//! Every random draw is keyed by `(seed, round, client id, purpose)`, so a
//! run is a pure function of its inputs whatever the worker count.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster_engine::{
    assign_by_distance, assign_by_loss, decode_identifiers, noisy_mean, privatize_identifier,
    rebalance, server_update, OneHotIdentifier, RoundAssignment,
};
use crate::datagen::ClientDataset;
use crate::error::{Error, Result};
use crate::metrics::{detect_collapse, evaluate_federation, FederationEval};
use crate::model::{empirical_loss, mean_gradient, ModelFamily};
use crate::vecmath::{clip, derive_stream, ModelParams, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "RR_IFCA")]
    RrIfca,
    #[serde(rename = "RR_FESEM")]
    RrFesem,
    #[serde(rename = "DP_IFCA")]
    DpIfca,
    #[serde(rename = "DP_FESEM")]
    DpFesem,
    #[serde(rename = "DP_FEDAVG")]
    DpFedavg,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::RrIfca => "RR_IFCA",
            Method::RrFesem => "RR_FESEM",
            Method::DpIfca => "DP_IFCA",
            Method::DpFesem => "DP_FESEM",
            Method::DpFedavg => "DP_FEDAVG",
        }
    }

    pub fn rebalances(self) -> bool {
        matches!(self, Method::RrIfca | Method::RrFesem)
    }

    pub fn is_clustered(self) -> bool {
        self != Method::DpFedavg
    }

    fn uses_distance(self) -> bool {
        matches!(self, Method::RrFesem | Method::DpFesem)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Server step size applied to the aggregated update.
    pub gamma: f64,
    pub local_lr: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub model_family: ModelFamily,
    #[serde(default = "default_classes")]
    pub num_classes: usize,
}

fn default_classes() -> usize {
    2
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !(self.local_lr >= 0.0) {
            return Err(Error::Config("gamma must be positive and local_lr nonnegative".into()));
        }
        if self.local_epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("local_epochs and batch_size must be positive".into()));
        }
        if self.model_family == ModelFamily::MultinomialLogistic && self.num_classes < 2 {
            return Err(Error::Config("num_classes must be at least 2".into()));
        }
        Ok(())
    }
}

/// Noise and clipping used by the simulator for one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub c_theta: f64,
    pub c_s: f64,
    pub sigma_theta: f64,
    pub sigma_s: f64,
}

impl NoiseParams {
    pub fn non_private(c_theta: f64) -> Self {
        Self { c_theta, c_s: 0.1, sigma_theta: 0.0, sigma_s: 0.0 }
    }
}

/// Everything a run needs besides the data.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub method: Method,
    pub k: usize,
    pub q: f64,
    pub rounds: u32,
    pub b: usize,
    pub train: TrainConfig,
    pub noise: NoiseParams,
    pub init_std: f64,
    pub eval_every: u32,
    pub seed: u64,
}

impl RunSpec {
    pub fn validate(&self, num_clients: usize) -> Result<()> {
        self.train.validate()?;
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if self.method == Method::DpFedavg && self.k != 1 {
            return Err(Error::Config("DP_FEDAVG requires k = 1".into()));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::Config(format!("q must lie in (0, 1], got {}", self.q)));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be positive".into()));
        }
        let n = sampled_count(num_clients, self.q);
        if n == 0 {
            return Err(Error::Config("q * M rounds to zero sampled clients".into()));
        }
        if self.method.rebalances() && self.b > 0 && self.b > n / self.k {
            return Err(Error::Config(format!(
                "B = {} exceeds floor(round(qM)/k) = {}",
                self.b,
                n / self.k
            )));
        }
        Ok(())
    }

    fn effective_b(&self) -> usize {
        if self.method.rebalances() {
            self.b
        } else {
            0
        }
    }
}

/// Server state between rounds.
#[derive(Clone, Debug, PartialEq)]
pub struct FederationState {
    pub cluster_models: Vec<ModelParams>,
    pub round: u32,
    pub method: Method,
    pub rng_root: u64,
}

impl FederationState {
    /// Cluster models drawn as `N(0, init_std^2)` around zero, one stream per cluster.
    pub fn init(method: Method, k: usize, dim: usize, init_std: f64, rng_root: u64) -> Result<Self> {
        let normal = Normal::new(0.0, init_std).map_err(|e| Error::Config(e.to_string()))?;
        let cluster_models = (0..k)
            .map(|j| {
                let mut rng = derive_stream(rng_root, &[("init", j as u64)]).rng();
                ModelParams((0..dim).map(|_| normal.sample(&mut rng)).collect())
            })
            .collect();
        Ok(Self { cluster_models, round: 0, method, rng_root })
    }
}

/// A client's local data as seen by the simulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Client {
    pub train: ClientDataset,
    pub val: ClientDataset,
}

impl Client {
    pub fn id(&self) -> u64 {
        self.train.client_id
    }

    pub fn true_cluster(&self) -> Option<usize> {
        self.train.true_cluster
    }
}

pub fn sampled_count(m: usize, q: f64) -> usize {
    (q * m as f64).round() as usize
}

/// Exactly `round(qM)` distinct indices in `0..m`, uniform without replacement, ascending.
pub fn sample_clients(m: usize, q: f64, stream: &RngStream) -> Result<Vec<usize>> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Config(format!("q must lie in (0, 1], got {q}")));
    }
    let n = sampled_count(m, q);
    let mut idx: Vec<usize> = if n == m {
        (0..m).collect()
    } else {
        rand::seq::index::sample(&mut stream.rng(), m, n).into_vec()
    };
    idx.sort_unstable();
    Ok(idx)
}

/// Mini-batch gradient descent on the client's empirical loss.
pub fn local_train(ds: &ClientDataset, start: &ModelParams, cfg: &TrainConfig, stream: &RngStream) -> ModelParams {
    let mut theta = start.clone();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    for epoch in 0..cfg.local_epochs {
        order.shuffle(&mut stream.child("epoch", epoch as u64).rng());
        for batch in order.chunks(cfg.batch_size) {
            let g = mean_gradient(&theta, ds, batch);
            theta.axpy(-cfg.local_lr, &g);
        }
    }
    theta
}

/// What happened in one round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    /// 1-based index of the round just executed.
    pub round: u32,
    pub selected: Vec<u64>,
    pub pre_sizes: Vec<usize>,
    pub post_sizes: Vec<usize>,
    pub donors: usize,
    /// `noise std / |S_j|` per cluster; `None` for an empty (frozen) cluster.
    pub effective_noise_std: Vec<Option<f64>>,
    /// Mean over selected clients of the loss of the model they started from.
    pub mean_client_loss: f64,
    pub assignment: RoundAssignment,
}

struct ClientOutput {
    id: u64,
    start_loss: f64,
    identifier: OneHotIdentifier,
    update: ModelParams,
}

/// Executes one round and advances `state`.
pub fn run_round(state: &FederationState, clients: &[Client], spec: &RunSpec) -> Result<(FederationState, RoundRecord)> {
    let k = state.cluster_models.len();
    let models = &state.cluster_models;
    let round_stream = derive_stream(state.rng_root, &[("round", state.round as u64)]);
    let picked = sample_clients(clients.len(), spec.q, &round_stream.child("sample", 0))?;

    let outputs: Vec<Result<ClientOutput>> = picked
        .par_iter()
        .map(|&pos| {
            let c = &clients[pos];
            let cs = round_stream.child("client", c.id());
            let (j, local, start_loss) = if spec.method.uses_distance() {
                let mut start = ModelParams::zeros(models[0].dim());
                for m in models {
                    start.axpy(1.0 / k as f64, m);
                }
                let local = local_train(&c.train, &start, &spec.train, &cs.child("train", 0));
                let j = assign_by_distance(&local, models).argmax();
                (j, local, empirical_loss(&start, &c.train))
            } else {
                let s = assign_by_loss(&c.train, models);
                let j = s.argmax();
                let local = local_train(&c.train, &models[j], &spec.train, &cs.child("train", 0));
                (j, local, empirical_loss(&models[j], &c.train))
            };
            let raw = OneHotIdentifier::one_hot(k, j);
            let identifier = if spec.method.is_clustered() {
                privatize_identifier(&raw, spec.noise.c_s, spec.noise.sigma_s, &cs.child("identifier", 0))?
            } else {
                raw
            };
            Ok(ClientOutput { id: c.id(), start_loss, identifier, update: local.sub(&models[j]) })
        })
        .collect();
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;

    let decoded = decode_identifiers(
        k,
        &outputs.iter().map(|o| (o.id, o.identifier.clone())).collect::<Vec<_>>(),
    );
    let pre_sizes = decoded.sizes();
    let assignment = rebalance(&decoded, spec.effective_b(), &round_stream.child("rebalance", 0))?;

    let updates: HashMap<u64, ModelParams> = outputs
        .iter()
        .map(|o| Ok((o.id, clip(&o.update, spec.noise.c_theta)?)))
        .collect::<Result<_>>()?;
    // the single-model path has sensitivity c_theta; clustered paths 2 c_theta
    let sum_noise_std = if spec.method.is_clustered() {
        2.0 * spec.noise.c_theta * spec.noise.sigma_theta
    } else {
        spec.noise.c_theta * spec.noise.sigma_theta
    };

    let mut next = models.clone();
    let mut effective = Vec::with_capacity(k);
    for (j, group) in assignment.groups.iter().enumerate() {
        if group.is_empty() {
            effective.push(None);
            continue;
        }
        let ups: Vec<ModelParams> = group.iter().map(|id| updates[id].clone()).collect();
        let delta = noisy_mean(&ups, sum_noise_std, &round_stream.child("noise", j as u64));
        next[j] = server_update(&models[j], &delta, spec.train.gamma);
        effective.push(Some(sum_noise_std / group.len() as f64));
    }

    let mean_client_loss = if outputs.is_empty() {
        0.0
    } else {
        outputs.iter().map(|o| o.start_loss).sum::<f64>() / outputs.len() as f64
    };
    let record = RoundRecord {
        round: state.round + 1,
        selected: outputs.iter().map(|o| o.id).collect(),
        pre_sizes,
        post_sizes: assignment.sizes(),
        donors: assignment.donors.len(),
        effective_noise_std: effective,
        mean_client_loss,
        assignment,
    };
    let state = FederationState {
        cluster_models: next,
        round: state.round + 1,
        method: state.method,
        rng_root: state.rng_root,
    };
    Ok((state, record))
}

/// One evaluation row.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPoint {
    pub round: u32,
    pub eval: FederationEval,
    pub min_group_size: usize,
    pub max_group_size: usize,
    pub donors_this_round: usize,
    pub collapsed_clusters: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsHistory {
    pub evals: Vec<EvalPoint>,
    pub records: Vec<RoundRecord>,
    pub final_state: FederationState,
}

/// Trailing window and threshold used for the collapse column.
pub const COLLAPSE_WINDOW: usize = 10;
pub const COLLAPSE_THRESHOLD: usize = 1;

/// Builds a rayon pool with `workers` threads (`None`: rayon's default).
pub fn worker_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// [`run_experiment`] on a dedicated pool of `workers` threads.
pub fn run_experiment_with_workers(spec: &RunSpec, clients: &[Client], workers: Option<usize>) -> Result<MetricsHistory> {
    worker_pool(workers)?.install(|| run_experiment(spec, clients))
}

/// Runs `spec.rounds` rounds, evaluating at round 0 and every `eval_every` rounds.
///
/// Client work runs on the ambient rayon pool.
pub fn run_experiment(spec: &RunSpec, clients: &[Client]) -> Result<MetricsHistory> {
    spec.validate(clients.len())?;
    let first = clients.first().ok_or_else(|| Error::Config("no clients".into()))?;
    let dim = spec.train.model_family.dim(first.train.num_features(), spec.train.num_classes);

    let mut state = FederationState::init(spec.method, spec.k, dim, spec.init_std, spec.seed)?;
    let mut records: Vec<RoundRecord> = Vec::with_capacity(spec.rounds as usize);
    let mut evals = Vec::new();
    let eval_at = |state: &FederationState, records: &[RoundRecord]| -> EvalPoint {
        let last = records.last();
        let sizes = last.map(|r| r.post_sizes.clone()).unwrap_or_default();
        let history: Vec<Vec<usize>> = records.iter().map(|r| r.post_sizes.clone()).collect();
        EvalPoint {
            round: state.round,
            eval: evaluate_federation(&state.cluster_models, clients, spec.train.model_family),
            min_group_size: sizes.iter().copied().min().unwrap_or(0),
            max_group_size: sizes.iter().copied().max().unwrap_or(0),
            donors_this_round: last.map_or(0, |r| r.donors),
            collapsed_clusters: detect_collapse(&history, COLLAPSE_WINDOW, COLLAPSE_THRESHOLD),
        }
    };
    evals.push(eval_at(&state, &records));
    for _ in 0..spec.rounds {
        let (next, rec) = run_round(&state, clients, spec)?;
        state = next;
        records.push(rec);
        if state.round % spec.eval_every == 0 {
            evals.push(eval_at(&state, &records));
        }
    }
    Ok(MetricsHistory { evals, records, final_state: state })
}
