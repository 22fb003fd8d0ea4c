//! Experiment configuration, presets and result emission.
//!
//! A config is a strict JSON object (unknown keys are rejected). A run
//! expands the optional `sweep` block into variants, executes every
//! `(variant, seed)` pair and writes one CSV row per evaluation point plus
//! a JSON sidecar holding the resolved config and the accountant report.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::datagen::{format_float, gen_synthetic, load_csv, train_val_split, ClientDataset, SyntheticSpec, TargetKind};
use crate::error::{Error, Result};
use crate::fedsim::{run_experiment, sampled_count, worker_pool, Client, Method, NoiseParams, RunSpec, TrainConfig};
use crate::metrics::{contraction_params, rounds_to_converge, tau_bound, AnalysisParams};
use crate::model::ModelFamily;
use crate::privacy::{
    account, calibrate, calibrate_model_only, default_alpha_grid, Calibration, PrivacyConfig, DEFAULT_DELTA,
};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "RRCLUSTER_WORKERS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv { path: PathBuf, targets: TargetKind },
}

/// Five log-spaced clip bounds from 1e-1 down to 1e-3.
pub fn default_c_theta_grid() -> Vec<f64> {
    (0..5).map(|i| 10f64.powf(-1.0 - 0.5 * i as f64)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySettings {
    /// Model-update clip bound; when absent it is picked from `c_theta_grid`
    /// by validation loss on the first seed.
    #[serde(default)]
    pub c_theta: Option<f64>,
    #[serde(default = "default_c_theta_grid")]
    pub c_theta_grid: Vec<f64>,
    #[serde(default = "default_c_s")]
    pub c_s: f64,
    #[serde(default)]
    pub sigma_theta: Option<f64>,
    #[serde(default)]
    pub sigma_s: Option<f64>,
    #[serde(default)]
    pub target_eps: Option<f64>,
    /// Share of the order-2 per-round budget spent on identifiers when calibrating.
    #[serde(default = "default_share")]
    pub identifier_share: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<u32>,
}

fn default_c_s() -> f64 {
    0.1
}
fn default_share() -> f64 {
    0.5
}
fn default_delta() -> f64 {
    DEFAULT_DELTA
}

impl Default for PrivacySettings {
    fn default() -> Self {
        Self {
            c_theta: None,
            c_theta_grid: default_c_theta_grid(),
            c_s: default_c_s(),
            sigma_theta: None,
            sigma_s: None,
            target_eps: None,
            identifier_share: default_share(),
            delta: default_delta(),
            alpha_grid: default_alpha_grid(),
        }
    }
}

/// Optional cartesian sweep; an empty list keeps the top-level value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default)]
    pub method: Vec<Method>,
    #[serde(default)]
    pub b: Vec<usize>,
    #[serde(default)]
    pub target_eps: Vec<f64>,
}

impl Sweep {
    fn is_empty(&self) -> bool {
        self.method.is_empty() && self.b.is_empty() && self.target_eps.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub k: usize,
    /// Number of clients; checked against the data when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub q: f64,
    pub rounds: u32,
    #[serde(default)]
    pub b: usize,
    pub train: TrainConfig,
    pub data: DataSource,
    #[serde(default)]
    pub privacy: PrivacySettings,
    #[serde(default = "default_init_std")]
    pub init_std: f64,
    /// Fraction of each client's samples used for training.
    #[serde(default = "default_train_frac")]
    pub train_frac: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Fixed data seed; by default each run seed also draws its own data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
    #[serde(default = "default_eval_every")]
    pub eval_every: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Sweep::is_empty")]
    pub sweep: Sweep,
}

fn default_init_std() -> f64 {
    0.1
}
fn default_train_frac() -> f64 {
    0.8
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_eval_every() -> u32 {
    1
}

/// One point of the sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Variant {
    pub method: Method,
    pub k: usize,
    /// Effective threshold (0 for methods that never rebalance).
    pub b: usize,
    pub target_eps: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn num_clients(&self) -> Result<usize> {
        match &self.data {
            DataSource::Synthetic(s) => Ok(s.num_clients()),
            DataSource::Csv { path, targets } => Ok(load_csv(path, *targets)?.len()),
        }
    }

    pub fn variants(&self) -> Vec<Variant> {
        let methods = if self.sweep.method.is_empty() { vec![self.method] } else { self.sweep.method.clone() };
        let bs = if self.sweep.b.is_empty() { vec![self.b] } else { self.sweep.b.clone() };
        let eps: Vec<Option<f64>> = if self.sweep.target_eps.is_empty() {
            vec![self.privacy.target_eps]
        } else {
            self.sweep.target_eps.iter().map(|&e| Some(e)).collect()
        };
        let mut out = Vec::new();
        for &method in &methods {
            for &b in &bs {
                for &target_eps in &eps {
                    let v = Variant {
                        method,
                        k: if method.is_clustered() { self.k } else { 1 },
                        b: if method.rebalances() { b } else { 0 },
                        target_eps,
                    };
                    if !out.contains(&v) {
                        out.push(v);
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.privacy;
        let calibrating = p.target_eps.is_some() || !self.sweep.target_eps.is_empty();
        let explicit = p.sigma_theta.is_some() || p.sigma_s.is_some();
        if calibrating && explicit {
            return Err(Error::Config(
                "privacy: give either sigma_theta/sigma_s or target_eps, not both".into(),
            ));
        }
        if !calibrating && p.sigma_theta.is_none() {
            return Err(Error::Config("privacy: sigma_theta or target_eps is required".into()));
        }
        if let Some(s) = p.sigma_theta {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config("privacy.sigma_theta must be finite and nonnegative".into()));
            }
        }
        if let Some(s) = p.sigma_s {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config("privacy.sigma_s must be finite and nonnegative".into()));
            }
        }
        if let Some(e) = p.target_eps {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::Config("privacy.target_eps must be positive".into()));
            }
        }
        if let Some(c) = p.c_theta {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config("privacy.c_theta must be positive".into()));
            }
        } else if p.c_theta_grid.is_empty() || p.c_theta_grid.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::Config("privacy.c_theta_grid needs positive entries".into()));
        }
        if !(p.c_s > 0.0) {
            return Err(Error::Config("privacy.c_s must be positive".into()));
        }
        if !(p.delta > 0.0 && p.delta < 1.0) {
            return Err(Error::Config("privacy.delta must lie in (0, 1)".into()));
        }
        if !(p.identifier_share > 0.0 && p.identifier_share < 1.0) {
            return Err(Error::Config("privacy.identifier_share must lie in (0, 1)".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::Config("train_frac must lie in (0, 1)".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::Config("q must lie in (0, 1]".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be positive".into()));
        }
        self.train.validate()?;
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
        }
        let m = self.num_clients()?;
        if let Some(given) = self.m {
            if given != m {
                return Err(Error::Config(format!("m = {given} but the data holds {m} clients")));
            }
        }
        let n = sampled_count(m, self.q);
        if n == 0 {
            return Err(Error::Config("q * M rounds to zero sampled clients".into()));
        }
        for v in self.variants() {
            if v.b > n / v.k {
                return Err(Error::Config(format!(
                    "b = {} exceeds floor(round(qM)/k) = {} (qM = {n}, k = {})",
                    v.b,
                    n / v.k,
                    v.k
                )));
            }
        }
        Ok(())
    }

    fn privacy_template(&self, variant: &Variant, c_theta: f64) -> PrivacyConfig {
        PrivacyConfig {
            c_theta,
            c_s: self.privacy.c_s,
            sigma_theta: 0.0,
            sigma_s: if variant.method.is_clustered() { 0.0 } else { f64::INFINITY },
            q: self.q,
            rounds: self.rounds.max(1),
            delta: self.privacy.delta,
            alpha_grid: self.privacy.alpha_grid.clone(),
        }
    }

    /// Noise multipliers for `variant`: explicit values or calibrated ones.
    pub fn resolve_sigmas(&self, variant: &Variant) -> Result<Calibration> {
        match variant.target_eps {
            Some(eps) => {
                let t = self.privacy_template(variant, 1.0);
                if variant.method.is_clustered() {
                    calibrate(eps, &t, self.privacy.identifier_share)
                } else {
                    calibrate_model_only(eps, &t)
                }
            }
            None => Ok(Calibration {
                sigma_theta: self.privacy.sigma_theta.unwrap_or(0.0),
                sigma_s: self.privacy.sigma_s.unwrap_or(0.0),
            }),
        }
    }

    /// Accounted `(eps, best_alpha)` for the whole run; `+inf` without noise.
    pub fn eps_dp(&self, variant: &Variant, sigmas: &Calibration, c_theta: f64) -> (f64, Option<u32>) {
        if self.rounds == 0 {
            return (0.0, None);
        }
        let mut cfg = self.privacy_template(variant, c_theta);
        cfg.sigma_theta = sigmas.sigma_theta;
        if variant.method.is_clustered() {
            cfg.sigma_s = sigmas.sigma_s;
        }
        match account(&cfg) {
            Ok(r) => (r.eps, Some(r.best_alpha)),
            Err(_) => (f64::INFINITY, None),
        }
    }

    fn run_spec(&self, variant: &Variant, noise: NoiseParams, seed: u64) -> RunSpec {
        RunSpec {
            method: variant.method,
            k: variant.k,
            q: self.q,
            rounds: self.rounds,
            b: variant.b,
            train: self.train.clone(),
            noise,
            init_std: self.init_std,
            eval_every: self.eval_every,
            seed,
        }
    }

    /// Client datasets for `seed`, split into train and validation parts.
    pub fn clients(&self, seed: u64) -> Result<Vec<Client>> {
        let raw: Vec<ClientDataset> = match &self.data {
            DataSource::Synthetic(s) => gen_synthetic(s, self.data_seed.unwrap_or(seed))?,
            DataSource::Csv { path, targets } => load_csv(path, *targets)?,
        };
        raw.iter()
            .map(|ds| {
                let (train, val) = train_val_split(ds, self.train_frac, seed)?;
                Ok(Client { train, val })
            })
            .collect()
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.as_ref().display())))?;
    ExperimentConfig::from_json(&text)
}

/// Applies `dotted.key=value` overrides to a JSON document. Values parse as
/// JSON when possible and fall back to strings.
pub fn apply_overrides(doc: &mut Value, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut cur = &mut *doc;
        let parts: Vec<&str> = key.split('.').collect();
        for part in &parts[..parts.len() - 1] {
            cur = cur
                .as_object_mut()
                .ok_or_else(|| Error::Config(format!("override {key}: not an object")))?
                .entry(part.to_string())
                .or_insert_with(|| json!({}));
        }
        cur.as_object_mut()
            .ok_or_else(|| Error::Config(format!("override {key}: not an object")))?
            .insert(parts[parts.len() - 1].to_string(), value);
    }
    Ok(())
}

/// Column order of the results CSV.
pub const CSV_COLUMNS: [&str; 15] = [
    "seed",
    "round",
    "method",
    "B",
    "eps_dp",
    "sigma_theta",
    "sigma_s",
    "train_loss",
    "val_loss",
    "val_accuracy",
    "clustering_accuracy",
    "min_group_size",
    "max_group_size",
    "donors_this_round",
    "collapsed_clusters",
];

#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub seed: u64,
    pub round: u32,
    pub method: Method,
    pub b: usize,
    pub eps_dp: f64,
    pub sigma_theta: f64,
    pub sigma_s: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: Option<f64>,
    pub clustering_accuracy: Option<f64>,
    pub min_group_size: usize,
    pub max_group_size: usize,
    pub donors_this_round: usize,
    pub collapsed_clusters: usize,
    /// Sweep position, used only to order rows.
    pub variant: usize,
}

impl CsvRow {
    pub fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| format_float(v.unwrap_or(f64::NAN));
        vec![
            self.seed.to_string(),
            self.round.to_string(),
            self.method.name().to_string(),
            self.b.to_string(),
            format_float(self.eps_dp),
            format_float(self.sigma_theta),
            format_float(self.sigma_s),
            format_float(self.train_loss),
            format_float(self.val_loss),
            opt(self.val_accuracy),
            opt(self.clustering_accuracy),
            self.min_group_size.to_string(),
            self.max_group_size.to_string(),
            self.donors_this_round.to_string(),
            self.collapsed_clusters.to_string(),
        ]
    }
}

/// Resolved parameters of one variant, as written to the sidecar.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariantReport {
    pub method: Method,
    pub k: usize,
    pub b: usize,
    pub target_eps: Option<f64>,
    pub c_theta: f64,
    pub sigma_theta: f64,
    pub sigma_s: f64,
    pub eps_dp: f64,
    pub best_alpha: Option<u32>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub rows: Vec<CsvRow>,
    pub variants: Vec<VariantReport>,
    pub config: ExperimentConfig,
}

impl RunReport {
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
        w.write_record(CSV_COLUMNS).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.record()).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn sidecar(&self) -> Value {
        let finite = |x: f64| if x.is_finite() { json!(x) } else { json!(format_float(x)) };
        let runs: Vec<Value> = self
            .variants
            .iter()
            .map(|v| {
                json!({
                    "method": v.method,
                    "k": v.k,
                    "B": v.b,
                    "target_eps": v.target_eps,
                    "c_theta": v.c_theta,
                    "sigma_theta": finite(v.sigma_theta),
                    "sigma_s": finite(v.sigma_s),
                    "accountant": { "eps": finite(v.eps_dp), "best_alpha": v.best_alpha },
                })
            })
            .collect();
        json!({ "config": self.config, "runs": runs })
    }

    /// Writes the CSV to `path` and the sidecar next to it (`.json` extension).
    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_csv_string()?)?;
        std::fs::write(path.with_extension("json"), serde_json::to_string_pretty(&self.sidecar())? + "\n")?;
        Ok(())
    }
}

fn pick_c_theta(cfg: &ExperimentConfig, variant: &Variant, sigmas: &Calibration) -> Result<f64> {
    if let Some(c) = cfg.privacy.c_theta {
        return Ok(c);
    }
    let seed = cfg.seeds[0];
    let clients = cfg.clients(seed)?;
    let mut best: Option<(f64, f64)> = None;
    for &c in &cfg.privacy.c_theta_grid {
        let noise = NoiseParams { c_theta: c, c_s: cfg.privacy.c_s, sigma_theta: sigmas.sigma_theta, sigma_s: sigmas.sigma_s };
        let h = run_experiment(&cfg.run_spec(variant, noise, seed), &clients)?;
        let loss = h.evals.last().map_or(f64::INFINITY, |e| e.eval.val_loss);
        if best.map_or(true, |(_, l)| loss < l) {
            best = Some((c, loss));
        }
    }
    Ok(best.expect("nonempty grid").0)
}

/// Executes every `(variant, seed)` pair of a validated config.
pub fn run_config(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<RunReport> {
    cfg.validate()?;
    let variants = cfg.variants();
    worker_pool(workers)?.install(|| {
        let resolved: Vec<(Variant, NoiseParams, VariantReport)> = variants
            .par_iter()
            .map(|v| {
                let sigmas = cfg.resolve_sigmas(v)?;
                let c_theta = pick_c_theta(cfg, v, &sigmas)?;
                let (eps_dp, best_alpha) = cfg.eps_dp(v, &sigmas, c_theta);
                let sigma_s = if v.method.is_clustered() { sigmas.sigma_s } else { f64::INFINITY };
                let noise = NoiseParams { c_theta, c_s: cfg.privacy.c_s, sigma_theta: sigmas.sigma_theta, sigma_s };
                let report = VariantReport {
                    method: v.method,
                    k: v.k,
                    b: v.b,
                    target_eps: v.target_eps,
                    c_theta,
                    sigma_theta: sigmas.sigma_theta,
                    sigma_s,
                    eps_dp,
                    best_alpha,
                };
                Ok((*v, noise, report))
            })
            .collect::<Result<Vec<_>>>()?;

        let jobs: Vec<(usize, u64)> = (0..resolved.len())
            .flat_map(|vi| cfg.seeds.iter().map(move |&s| (vi, s)))
            .collect();
        let chunks: Vec<Vec<CsvRow>> = jobs
            .par_iter()
            .map(|&(vi, seed)| {
                let (variant, noise, report) = &resolved[vi];
                let clients = cfg.clients(seed)?;
                let history = run_experiment(&cfg.run_spec(variant, *noise, seed), &clients)?;
                Ok(history
                    .evals
                    .iter()
                    .map(|e| CsvRow {
                        seed,
                        round: e.round,
                        method: variant.method,
                        b: variant.b,
                        eps_dp: report.eps_dp,
                        sigma_theta: report.sigma_theta,
                        sigma_s: report.sigma_s,
                        train_loss: e.eval.train_loss,
                        val_loss: e.eval.val_loss,
                        val_accuracy: e.eval.val_accuracy,
                        clustering_accuracy: e.eval.clustering_accuracy,
                        min_group_size: e.min_group_size,
                        max_group_size: e.max_group_size,
                        donors_this_round: e.donors_this_round,
                        collapsed_clusters: e.collapsed_clusters,
                        variant: vi,
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rows: Vec<CsvRow> = chunks.into_iter().flatten().collect();
        rows.sort_by_key(|r| (r.seed, r.round, r.variant));
        Ok(RunReport {
            rows,
            variants: resolved.into_iter().map(|(_, _, r)| r).collect(),
            config: cfg.clone(),
        })
    })
}

/// Runs a config and writes its outputs to `output` (or the config's own output path).
pub fn cmd_run(cfg: &ExperimentConfig, output: Option<&Path>, workers: Option<usize>) -> Result<RunReport> {
    let report = run_config(cfg, workers)?;
    if let Some(path) = output.map(Path::to_path_buf).or_else(|| cfg.output.clone()) {
        report.write(&path)?;
    }
    Ok(report)
}

/// `{"eps": .., "best_alpha": ..}` for a privacy config.
pub fn cmd_account(cfg: &PrivacyConfig) -> Result<Value> {
    let r = account(cfg)?;
    Ok(json!({ "eps": r.eps, "best_alpha": r.best_alpha }))
}

/// Input of [`cmd_calibrate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateRequest {
    pub target_eps: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub q: f64,
    pub rounds: u32,
    #[serde(default = "default_share")]
    pub identifier_share: f64,
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<u32>,
}

/// `{"sigma_theta": .., "sigma_s": ..}` hitting the requested budget.
pub fn cmd_calibrate(req: &CalibrateRequest) -> Result<Value> {
    let template = PrivacyConfig {
        c_theta: 1.0,
        c_s: default_c_s(),
        sigma_theta: 1.0,
        sigma_s: 1.0,
        q: req.q,
        rounds: req.rounds,
        delta: req.delta,
        alpha_grid: req.alpha_grid.clone(),
    };
    template.validate()?;
    let c = calibrate(req.target_eps, &template, req.identifier_share)?;
    Ok(json!({ "sigma_theta": c.sigma_theta, "sigma_s": c.sigma_s }))
}

/// Misclustering bound, contraction factor, error floor and round count.
pub fn cmd_bounds(p: &AnalysisParams) -> Result<Value> {
    let tau = tau_bound(p)?;
    let bound = contraction_params(p)?;
    let rounds = rounds_to_converge(p, &bound);
    Ok(json!({ "tau": tau, "contraction": bound, "rounds_to_converge": rounds }))
}

/// The mixture-of-lines task used by the presets: slopes {-2, -0.5, 0.5, 2}.
pub fn four_lines(clients_per_cluster: Vec<usize>) -> SyntheticSpec {
    SyntheticSpec {
        k: 4,
        lines: vec![(-2.0, 0.0), (-0.5, 0.0), (0.5, 0.0), (2.0, 0.0)],
        noise_std: 0.05,
        clients_per_cluster,
        samples_per_client: 20,
        x_range: (-1.0, 1.0),
        task: TargetKind::Regression,
    }
}

fn preset_train() -> TrainConfig {
    TrainConfig {
        gamma: 1.0,
        local_lr: 0.1,
        local_epochs: 5,
        batch_size: 4,
        model_family: ModelFamily::LinearRegressionMse,
        num_classes: 2,
    }
}

pub const PRESETS: [&str; 4] = ["balanced4", "imbalanced", "bsweep", "epsweep"];

/// Shipped experiment configs.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let non_private = PrivacySettings { c_theta: Some(10.0), sigma_theta: Some(0.0), sigma_s: Some(0.0), ..Default::default() };
    let private = |eps: f64| PrivacySettings { c_theta: Some(1.0), target_eps: Some(eps), ..Default::default() };
    let base = ExperimentConfig {
        method: Method::RrIfca,
        k: 4,
        m: None,
        q: 1.0,
        rounds: 50,
        b: 8,
        train: preset_train(),
        data: DataSource::Synthetic(four_lines(vec![16, 16, 16, 16])),
        privacy: non_private.clone(),
        init_std: 0.1,
        train_frac: 0.8,
        seeds: (0..10).collect(),
        data_seed: None,
        eval_every: 5,
        output: None,
        sweep: Sweep::default(),
    };
    let cfg = match name {
        "balanced4" => ExperimentConfig { output: Some("results/balanced4.csv".into()), ..base },
        "imbalanced" => ExperimentConfig {
            k: 3,
            q: 0.1,
            b: 4,
            rounds: 40,
            data: DataSource::Synthetic(SyntheticSpec {
                k: 3,
                lines: vec![(-2.0, 0.0), (0.0, 0.0), (2.0, 0.0)],
                ..four_lines(vec![80, 40, 40])
            }),
            privacy: private(4.0),
            sweep: Sweep { method: vec![Method::RrIfca, Method::DpIfca, Method::DpFedavg], ..Sweep::default() },
            output: Some("results/imbalanced.csv".into()),
            ..base
        },
        // small q keeps eps <= 4 reachable over tens of rounds
        "bsweep" => ExperimentConfig {
            q: 0.1,
            rounds: 40,
            data: DataSource::Synthetic(four_lines(vec![200, 40, 40, 40])),
            privacy: private(4.0),
            sweep: Sweep { b: vec![0, 2, 4, 6, 8], ..Sweep::default() },
            output: Some("results/bsweep.csv".into()),
            ..base
        },
        "epsweep" => ExperimentConfig {
            q: 0.1,
            rounds: 30,
            b: 4,
            data: DataSource::Synthetic(four_lines(vec![200, 40, 40, 40])),
            privacy: private(4.0),
            sweep: Sweep {
                method: vec![Method::RrIfca, Method::DpIfca, Method::DpFedavg],
                target_eps: vec![2.0, 4.0, 8.0],
                ..Sweep::default()
            },
            output: Some("results/epsweep.csv".into()),
            ..base
        },
        other => return Err(Error::Config(format!("unknown preset {other:?}; known: {PRESETS:?}"))),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> Value {
        json!({
            "method": "RR_IFCA",
            "k": 2,
            "q": 1.0,
            "rounds": 3,
            "b": 1,
            "train": { "gamma": 1.0, "local_lr": 0.1, "local_epochs": 1, "batch_size": 4,
                       "model_family": "linear_regression_mse" },
            "data": { "synthetic": { "k": 2, "lines": [[1.0, 0.0], [-1.0, 0.0]], "noise_std": 0.1,
                                     "clients_per_cluster": [4, 4], "samples_per_client": 10 } },
            "privacy": { "c_theta": 1.0, "sigma_theta": 0.0, "sigma_s": 0.0 }
        })
    }

    #[test]
    fn defaults_are_filled() {
        let cfg = ExperimentConfig::from_json(&minimal().to_string()).unwrap();
        assert_eq!(cfg.privacy.delta, 1e-3);
        assert_eq!(cfg.privacy.c_s, 0.1);
        assert_eq!(cfg.privacy.c_theta_grid.len(), 5);
        assert!((cfg.privacy.c_theta_grid[0] - 0.1).abs() < 1e-15);
        assert!((cfg.privacy.c_theta_grid[4] - 0.001).abs() < 1e-15);
        assert_eq!(cfg.seeds, vec![0]);
    }

    #[test]
    fn infeasible_b_is_named() {
        let mut v = minimal();
        v["b"] = json!(100);
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.starts_with("b = 100")), "{err}");
    }

    #[test]
    fn explicit_and_target_conflict() {
        let mut v = minimal();
        v["privacy"]["target_eps"] = json!(4.0);
        assert!(matches!(ExperimentConfig::from_json(&v.to_string()), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v = minimal();
        v["bogus"] = json!(1);
        assert!(matches!(ExperimentConfig::from_json(&v.to_string()), Err(Error::Config(_))));
        let mut v = minimal();
        v["privacy"]["sigma"] = json!(1);
        assert!(matches!(ExperimentConfig::from_json(&v.to_string()), Err(Error::Config(_))));
    }

    #[test]
    fn overrides_patch_nested_keys() {
        let mut v = minimal();
        apply_overrides(&mut v, &["b=2".into(), "privacy.c_theta=0.5".into(), "method=DP_IFCA".into()]).unwrap();
        assert_eq!(v["b"], json!(2));
        assert_eq!(v["privacy"]["c_theta"], json!(0.5));
        assert_eq!(v["method"], json!("DP_IFCA"));
        assert!(apply_overrides(&mut v, &["novalue".into()]).is_err());
    }

    #[test]
    fn sweep_expansion_normalizes_baselines() {
        let mut v = minimal();
        v["privacy"] = json!({ "c_theta": 1.0, "target_eps": 4.0 });
        v["sweep"] = json!({ "method": ["RR_IFCA", "DP_IFCA", "DP_FEDAVG"], "b": [0, 1] });
        let cfg = ExperimentConfig::from_json(&v.to_string()).unwrap();
        let vs = cfg.variants();
        // RR_IFCA x {0,1}, DP_IFCA and DP_FEDAVG collapse to B = 0
        assert_eq!(vs.len(), 4);
        assert!(vs.iter().filter(|v| v.method == Method::DpFedavg).all(|v| v.k == 1 && v.b == 0));
    }

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            preset(name).unwrap();
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn preset_budgets_are_reachable() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            for v in cfg.variants() {
                if let Some(eps) = v.target_eps {
                    let sigmas = cfg.resolve_sigmas(&v).unwrap_or_else(|e| panic!("{name} {v:?}: {e}"));
                    let (got, _) = cfg.eps_dp(&v, &sigmas, 1.0);
                    assert!((got - eps).abs() <= 1e-3 * eps, "{name} {v:?}: {got}");
                }
            }
        }
    }
}
