//! Server-side handling of one round: cluster identifiers, partitioning,
//! random rebalancing and noisy per-cluster aggregation.

use serde::{Deserialize, Serialize};

use crate::datagen::ClientDataset;
use crate::error::{Error, Result};
use crate::model::empirical_loss;
use crate::vecmath::{add_gaussian, clip, ModelParams, RngStream};

/// Length-`k` cluster identifier; one-hot before privatization.
#[derive(Clone, Debug, PartialEq)]
pub struct OneHotIdentifier(pub Vec<f64>);

impl OneHotIdentifier {
    pub fn one_hot(k: usize, j: usize) -> Self {
        assert!(j < k);
        let mut v = vec![0.0; k];
        v[j] = 1.0;
        Self(v)
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    /// Index of the largest entry, smallest index on ties.
    pub fn argmax(&self) -> usize {
        argmin_by(self.0.iter().map(|v| -v))
    }
}

fn argmin_by(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for (j, v) in values.enumerate() {
        if v < best_v {
            best = j;
            best_v = v;
        }
    }
    best
}

/// Loss-based rule: the cluster model with minimal empirical loss on `ds`.
pub fn assign_by_loss(ds: &ClientDataset, models: &[ModelParams]) -> OneHotIdentifier {
    let j = argmin_by(models.iter().map(|m| empirical_loss(m, ds)));
    OneHotIdentifier::one_hot(models.len(), j)
}

/// Distance-based rule: the cluster model closest in L2 to the client's local model.
pub fn assign_by_distance(local: &ModelParams, models: &[ModelParams]) -> OneHotIdentifier {
    let j = argmin_by(models.iter().map(|m| m.distance(local)));
    OneHotIdentifier::one_hot(models.len(), j)
}

/// Clip to `c_s`, then add `N(0, (c_s sigma_s)^2)` per coordinate.
pub fn privatize_identifier(
    s: &OneHotIdentifier,
    c_s: f64,
    sigma_s: f64,
    stream: &RngStream,
) -> Result<OneHotIdentifier> {
    if !(sigma_s >= 0.0 && sigma_s.is_finite()) {
        return Err(Error::Config(format!("sigma_s must be finite and nonnegative, got {sigma_s}")));
    }
    let clipped = clip(&ModelParams(s.0.clone()), c_s)?;
    Ok(OneHotIdentifier(add_gaussian(&clipped, c_s * sigma_s, stream).0))
}

/// One client moved by rebalancing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub client_id: u64,
    pub from: usize,
    pub to: usize,
}

/// Partition of a round's selected clients into `k` groups.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RoundAssignment {
    pub groups: Vec<Vec<u64>>,
    pub donors: Vec<Move>,
}

impl RoundAssignment {
    pub fn k(&self) -> usize {
        self.groups.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Cluster of each client, if present.
    pub fn cluster_of(&self, client_id: u64) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(&client_id))
    }
}

/// Appends each client to the group of its identifier's argmax.
pub fn decode_identifiers(k: usize, clients: &[(u64, OneHotIdentifier)]) -> RoundAssignment {
    let mut groups = vec![Vec::new(); k];
    for (id, s) in clients {
        assert_eq!(s.k(), k, "identifier length mismatch");
        groups[s.argmax()].push(*id);
    }
    RoundAssignment { groups, donors: Vec::new() }
}

/// Draw priority of a client in the rebalancing lottery.
///
/// Keyed by client id so that two runs over adjacent client sets make the
/// same random choices for every client they share.
fn priority(stream: &RngStream, client_id: u64) -> u64 {
    stream.child("client", client_id).first_u64()
}

/// Fills every group smaller than `b` up to exactly `b` with clients drawn
/// uniformly without replacement from groups holding more than `b`.
///
/// Small groups are filled in ascending index. Each draw takes the client of
/// lowest priority in the current donor pool, which is a uniform draw from
/// that pool. `b = 0` disables rebalancing.
pub fn rebalance(a: &RoundAssignment, b: usize, stream: &RngStream) -> Result<RoundAssignment> {
    let k = a.k();
    if b == 0 {
        return Ok(a.clone());
    }
    if k == 0 || b > a.total() / k {
        return Err(Error::Config(format!(
            "rebalancing threshold B = {b} infeasible for {} clients in {k} clusters",
            a.total()
        )));
    }
    let mut groups = a.groups.clone();
    let mut donors = a.donors.clone();
    let prio: Vec<Vec<(u64, u64)>> = groups
        .iter()
        .map(|g| g.iter().map(|&id| (priority(stream, id), id)).collect())
        .collect();
    let mut prio = prio;

    for small in 0..k {
        while groups[small].len() < b {
            // pool: members of groups that stay >= b after giving one up
            let mut pick: Option<(usize, usize)> = None;
            for (g, members) in prio.iter().enumerate() {
                if g == small || groups[g].len() <= b {
                    continue;
                }
                for (pos, key) in members.iter().enumerate() {
                    if pick.map_or(true, |(pg, pp)| *key < prio[pg][pp]) {
                        pick = Some((g, pos));
                    }
                }
            }
            let (from, pos) = pick.expect("feasible B always leaves a donor");
            let (_, id) = prio[from].remove(pos);
            let gpos = groups[from].iter().position(|&c| c == id).expect("consistent groups");
            groups[from].remove(gpos);
            groups[small].push(id);
            prio[small].push((u64::MAX, id));
            donors.push(Move { client_id: id, from, to: small });
        }
    }
    Ok(RoundAssignment { groups, donors })
}

/// `(sum(updates) + N(0, noise_std^2)) / |updates|`.
pub fn noisy_mean(updates: &[ModelParams], noise_std: f64, stream: &RngStream) -> ModelParams {
    assert!(!updates.is_empty(), "aggregating an empty cluster");
    let mut sum = ModelParams::zeros(updates[0].dim());
    for u in updates {
        sum.axpy(1.0, u);
    }
    add_gaussian(&sum, noise_std, stream).scale(1.0 / updates.len() as f64)
}

/// Noisy mean of already clipped updates with sum-level noise std `2 c_theta sigma_theta`.
pub fn aggregate_cluster(
    updates: &[ModelParams],
    c_theta: f64,
    sigma_theta: f64,
    stream: &RngStream,
) -> ModelParams {
    noisy_mean(updates, 2.0 * c_theta * sigma_theta, stream)
}

/// `theta + gamma * delta`.
pub fn server_update(theta: &ModelParams, delta: &ModelParams, gamma: f64) -> ModelParams {
    let mut out = theta.clone();
    out.axpy(gamma, delta);
    out
}
