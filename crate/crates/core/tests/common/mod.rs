#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrcluster::cluster_engine::{decode_identifiers, privatize_identifier, rebalance, OneHotIdentifier, RoundAssignment};
use rrcluster::vecmath::{clip, derive_stream, ModelParams};

/// Relative error with an absolute floor for exact zeros.
pub fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

/// One coupled adjacency trial: a selected set of `m` clients and the same
/// set with one client removed, sharing every random stream. Returns the
/// largest L2 change of a cluster's pre-noise sum, in units of `c_theta`.
pub fn sensitivity_trial(trial: u64, m: usize, k: usize, b: usize) -> f64 {
    let c_theta = 0.7;
    let mut rng = ChaCha8Rng::seed_from_u64(trial);
    let root = derive_stream(trial, &[("trial", 0)]);
    let sigma_s = [0.0, 0.5, 2.0][rng.random_range(0..3)];
    // skewed cluster popularity so that rebalancing has work to do
    let weights: Vec<f64> = (0..k).map(|_| rng.random::<f64>().powi(3) + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    let mut idents = Vec::with_capacity(m);
    let mut updates = HashMap::new();
    for id in 0..m as u64 {
        let mut u = rng.random::<f64>() * total;
        let mut j = 0;
        while j + 1 < k && u >= weights[j] {
            u -= weights[j];
            j += 1;
        }
        let s = privatize_identifier(&OneHotIdentifier::one_hot(k, j), 0.1, sigma_s, &root.child("client", id))
            .expect("valid clip bound");
        idents.push((id, s));
        let scale = 3.0 * c_theta * rng.random::<f64>();
        let raw = ModelParams((0..3).map(|_| scale * (rng.random::<f64>() - 0.5)).collect());
        updates.insert(id, clip(&raw, c_theta).expect("valid clip bound"));
    }
    let removed = rng.random_range(0..m as u64);
    let neighbour: Vec<_> = idents.iter().filter(|(id, _)| *id != removed).cloned().collect();

    let stream = root.child("rebalance", 0);
    let full = rebalance(&decode_identifiers(k, &idents), b, &stream).expect("feasible");
    let less = rebalance(&decode_identifiers(k, &neighbour), b, &stream).expect("feasible");
    let sum = |g: &[u64]| {
        let mut s = ModelParams::zeros(3);
        for id in g {
            s.axpy(1.0, &updates[id]);
        }
        s
    };
    (0..k)
        .map(|j| sum(&full.groups[j]).distance(&sum(&less.groups[j])) / c_theta)
        .fold(0.0, f64::max)
}

/// Checks every rebalance invariant on one random round; `Err` names the broken one.
pub fn rebalance_round(trial: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial);
    let k = rng.random_range(1..=6);
    let m = rng.random_range(k..=40);
    let b = rng.random_range(0..=m / k);
    let mut groups = vec![Vec::new(); k];
    let hot = rng.random_range(0..k);
    for id in 0..m as u64 {
        let j = if rng.random_bool(0.5) { hot } else { rng.random_range(0..k) };
        groups[j].push(id * 7 + 3);
    }
    let before = RoundAssignment { groups, donors: vec![] };
    let stream = derive_stream(trial, &[("rebalance", 0)]);
    let after = rebalance(&before, b, &stream).map_err(|e| format!("feasible B rejected: {e}"))?;

    if after.sizes().iter().any(|&s| s < b) {
        return Err(format!("group below B = {b}: {:?}", after.sizes()));
    }
    let ids = |a: &RoundAssignment| a.groups.iter().flatten().copied().collect::<BTreeSet<u64>>();
    if ids(&before) != ids(&after) || after.total() != m {
        return Err("partition not preserved".into());
    }
    let moved: Vec<u64> = after.donors.iter().map(|d| d.client_id).collect();
    if moved.iter().collect::<BTreeSet<_>>().len() != moved.len() {
        return Err("client moved twice".into());
    }
    for j in 0..k {
        let gave = after.donors.iter().any(|d| d.from == j);
        if gave && after.groups[j].len() < b {
            return Err(format!("donor group {j} ended below B"));
        }
    }
    for d in &after.donors {
        if before.cluster_of(d.client_id) != Some(d.from) || after.cluster_of(d.client_id) != Some(d.to) {
            return Err("move log inconsistent".into());
        }
    }
    if b > 0 && k > 0 {
        let too_big = m / k + 1;
        if rebalance(&before, too_big, &stream).is_ok() {
            return Err(format!("infeasible B = {too_big} accepted"));
        }
    }
    Ok(())
}

/// Four-line regression task, `rounds` rounds, one `(method, B)` run per seed.
pub fn small_config(method: &str, b: usize, rounds: u32, seeds: &[u64]) -> rrcluster::experiment::ExperimentConfig {
    let doc = serde_json::json!({
        "method": method,
        "k": 4,
        "q": 1.0,
        "rounds": rounds,
        "b": b,
        "train": { "gamma": 1.0, "local_lr": 0.1, "local_epochs": 2, "batch_size": 5,
                   "model_family": "linear_regression_mse" },
        "data": { "synthetic": { "k": 4, "lines": [[-2.0, 0.0], [-0.5, 0.0], [0.5, 0.0], [2.0, 0.0]],
                                 "noise_std": 0.05, "clients_per_cluster": [10, 2, 2, 2],
                                 "samples_per_client": 10 } },
        "privacy": { "c_theta": 1.0, "sigma_theta": 0.0, "sigma_s": 0.0 },
        "seeds": seeds,
    });
    rrcluster::experiment::ExperimentConfig::from_json(&doc.to_string()).expect("valid config")
}

/// Evaluation history and final models of a 50-round run on the small config.
pub fn trajectory(
    noise: rrcluster::fedsim::NoiseParams,
    method: rrcluster::fedsim::Method,
    k: usize,
    b: usize,
    seed: u64,
) -> (Vec<rrcluster::fedsim::EvalPoint>, Vec<rrcluster::vecmath::ModelParams>) {
    let cfg = small_config("RR_IFCA", 0, 50, &[seed]);
    let clients = cfg.clients(seed).unwrap();
    let spec = rrcluster::fedsim::RunSpec {
        method,
        k,
        q: 0.5,
        rounds: 50,
        b,
        train: cfg.train.clone(),
        noise,
        init_std: 0.1,
        eval_every: 1,
        seed,
    };
    let h = rrcluster::fedsim::run_experiment(&spec, &clients).unwrap();
    (h.evals, h.final_state.cluster_models)
}
