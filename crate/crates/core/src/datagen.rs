//! Federated datasets: synthetic mixtures of lines with known cluster
//! membership, CSV ingestion and per-client train/validation splits.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecmath::derive_stream;

/// Local targets of one client.
#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Regression(Vec<f64>),
    Labels(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Regression(v) => v.len(),
            Targets::Labels(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Regression(v) => Targets::Regression(idx.iter().map(|&i| v[i]).collect()),
            Targets::Labels(v) => Targets::Labels(idx.iter().map(|&i| v[i]).collect()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Regression,
    Classification,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClientDataset {
    pub client_id: u64,
    /// Row-major, `n_i` rows of `p` features.
    pub features: Vec<Vec<f64>>,
    pub targets: Targets,
    pub true_cluster: Option<usize>,
}

impl ClientDataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    fn select(&self, idx: &[usize]) -> ClientDataset {
        ClientDataset {
            client_id: self.client_id,
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            targets: self.targets.select(idx),
            true_cluster: self.true_cluster,
        }
    }
}

/// Ground-truth generator: `k` lines `y = slope * x + intercept + N(0, noise_std^2)`.
///
/// With `task = Classification` each line is reused as a class-mean offset:
/// two-feature points are drawn around `±(slope, intercept)` with the sign
/// given by a uniform binary label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub k: usize,
    pub lines: Vec<(f64, f64)>,
    pub noise_std: f64,
    pub clients_per_cluster: Vec<usize>,
    pub samples_per_client: usize,
    #[serde(default = "default_x_range")]
    pub x_range: (f64, f64),
    #[serde(default = "default_task")]
    pub task: TargetKind,
}

fn default_x_range() -> (f64, f64) {
    (-1.0, 1.0)
}

fn default_task() -> TargetKind {
    TargetKind::Regression
}

impl SyntheticSpec {
    pub fn num_clients(&self) -> usize {
        self.clients_per_cluster.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("synthetic k must be positive".into()));
        }
        if self.lines.len() != self.k {
            return Err(Error::Config(format!(
                "synthetic lines has {} entries, expected k = {}",
                self.lines.len(),
                self.k
            )));
        }
        if self.clients_per_cluster.len() != self.k || self.clients_per_cluster.contains(&0) {
            return Err(Error::Config(
                "clients_per_cluster needs k positive entries".into(),
            ));
        }
        if self.samples_per_client == 0 {
            return Err(Error::Config("samples_per_client must be positive".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config("noise_std must be finite and nonnegative".into()));
        }
        let (lo, hi) = self.x_range;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::Config("x_range must be a finite interval lo < hi".into()));
        }
        Ok(())
    }
}

/// Draws every client's data. Client ids run `0..M` in cluster order.
pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Vec<ClientDataset>> {
    spec.validate()?;
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let (lo, hi) = spec.x_range;
    let mut out = Vec::with_capacity(spec.num_clients());
    let mut id = 0u64;
    for (cluster, (&count, &(slope, intercept))) in
        spec.clients_per_cluster.iter().zip(&spec.lines).enumerate()
    {
        for _ in 0..count {
            let mut rng = derive_stream(seed, &[("data", 0), ("client", id)]).rng();
            let n = spec.samples_per_client;
            let (features, targets) = match spec.task {
                TargetKind::Regression => {
                    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
                    let ys = xs
                        .iter()
                        .map(|&x| slope * x + intercept + noise.sample(&mut rng))
                        .collect();
                    (xs.into_iter().map(|x| vec![x]).collect(), Targets::Regression(ys))
                }
                TargetKind::Classification => {
                    let mut rows = Vec::with_capacity(n);
                    let mut labels = Vec::with_capacity(n);
                    for _ in 0..n {
                        let label = rng.random_range(0..2usize);
                        let sign = if label == 1 { 1.0 } else { -1.0 };
                        rows.push(vec![
                            sign * slope + noise.sample(&mut rng),
                            sign * intercept + noise.sample(&mut rng),
                        ]);
                        labels.push(label);
                    }
                    (rows, Targets::Labels(labels))
                }
            };
            out.push(ClientDataset { client_id: id, features, targets, true_cluster: Some(cluster) });
            id += 1;
        }
    }
    Ok(out)
}

/// Formats a float with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Writes datasets in the `client_id, feature_0.., target[, true_cluster]` layout.
pub fn write_csv(path: impl AsRef<Path>, datasets: &[ClientDataset]) -> Result<()> {
    let first = datasets
        .first()
        .ok_or_else(|| Error::Config("refusing to write an empty dataset list".into()))?;
    let p = first.num_features();
    let with_cluster = datasets.iter().all(|d| d.true_cluster.is_some());
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    let mut header = vec!["client_id".to_string()];
    header.extend((0..p).map(|j| format!("feature_{j}")));
    header.push("target".into());
    if with_cluster {
        header.push("true_cluster".into());
    }
    w.write_record(&header).map_err(csv_io)?;
    for ds in datasets {
        if ds.num_features() != p {
            return Err(Error::Schema(format!("client {} has inconsistent feature count", ds.client_id)));
        }
        for (i, row) in ds.features.iter().enumerate() {
            let mut rec = vec![ds.client_id.to_string()];
            rec.extend(row.iter().map(|&x| format_float(x)));
            rec.push(match &ds.targets {
                Targets::Regression(v) => format_float(v[i]),
                Targets::Labels(v) => v[i].to_string(),
            });
            if with_cluster {
                rec.push(ds.true_cluster.unwrap_or_default().to_string());
            }
            w.write_record(&rec).map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Schema(format!("{other:?}")),
    }
}

/// Reads a per-client CSV, grouping rows by `client_id` (ascending).
pub fn load_csv(path: impl AsRef<Path>, kind: TargetKind) -> Result<Vec<ClientDataset>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(csv_io)?;
    let header = rdr.headers().map_err(csv_io)?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Schema("empty file: header row required".into()));
    }
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols[0] != "client_id" {
        return Err(Error::Schema(format!("first column must be client_id, found {:?}", cols[0])));
    }
    let with_cluster = cols.last() == Some(&"true_cluster");
    let target_col = if with_cluster { cols.len() - 2 } else { cols.len() - 1 };
    if target_col < 1 || cols[target_col] != "target" {
        return Err(Error::Schema("missing target column".into()));
    }
    let p = target_col - 1;
    for (j, name) in cols[1..target_col].iter().enumerate() {
        if *name != format!("feature_{j}") {
            return Err(Error::Schema(format!("expected column feature_{j}, found {name:?}")));
        }
    }

    struct Acc {
        features: Vec<Vec<f64>>,
        reg: Vec<f64>,
        labels: Vec<usize>,
        cluster: Option<usize>,
    }
    let mut groups: BTreeMap<u64, Acc> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_io)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != cols.len() {
            return Err(Error::Schema(format!(
                "line {line}: {} fields, header has {}",
                rec.len(),
                cols.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            let v: f64 = s.trim().parse().map_err(|_| Error::Parse { line, msg: format!("bad number {s:?}") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, msg: format!("non-finite value {s:?}") });
            }
            Ok(v)
        };
        let parse_u = |s: &str| -> Result<u64> {
            s.trim().parse().map_err(|_| Error::Parse { line, msg: format!("bad integer {s:?}") })
        };
        let id = parse_u(&rec[0])?;
        let row = (1..=p).map(|j| parse_f(&rec[j])).collect::<Result<Vec<_>>>()?;
        let cluster = if with_cluster { Some(parse_u(&rec[target_col + 1])? as usize) } else { None };
        let acc = groups.entry(id).or_insert(Acc { features: vec![], reg: vec![], labels: vec![], cluster });
        if acc.cluster != cluster {
            return Err(Error::Parse { line, msg: format!("client {id} has conflicting true_cluster") });
        }
        match kind {
            TargetKind::Regression => acc.reg.push(parse_f(&rec[target_col])?),
            TargetKind::Classification => acc.labels.push(parse_u(&rec[target_col])? as usize),
        }
        acc.features.push(row);
    }
    if groups.is_empty() {
        return Err(Error::Schema("file contains no data rows".into()));
    }
    Ok(groups
        .into_iter()
        .map(|(client_id, a)| ClientDataset {
            client_id,
            features: a.features,
            targets: match kind {
                TargetKind::Regression => Targets::Regression(a.reg),
                TargetKind::Classification => Targets::Labels(a.labels),
            },
            true_cluster: a.cluster,
        })
        .collect())
}

/// Deterministic disjoint split into `(train, validation)`.
pub fn train_val_split(ds: &ClientDataset, frac: f64, seed: u64) -> Result<(ClientDataset, ClientDataset)> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::Config(format!("client {} has {n} samples, need at least 2 to split", ds.client_id)));
    }
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::Config(format!("split fraction must lie in (0, 1), got {frac}")));
    }
    let n_train = ((frac * n as f64).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut derive_stream(seed, &[("split", 0), ("client", ds.client_id)]).rng());
    let (train, val) = idx.split_at_mut(n_train);
    train.sort_unstable();
    val.sort_unstable();
    Ok((ds.select(train), ds.select(val)))
}
