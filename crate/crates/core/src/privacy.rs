//! Rényi-DP accounting for the clustered pipeline.
//!
//! One round releases two Gaussian mechanisms: the privatized cluster
//! identifiers (noise multiplier `sigma_s`) and the per-cluster sums of clipped
//! updates (noise multiplier `sigma_theta`, sensitivity `2 C_theta`). Their
//! RDP curves add by adaptive composition, the sum is amplified by sampling
//! clients without replacement, composed over `T` rounds and finally converted
//! to `(eps, delta)`-DP at the best order of the grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `{2, 3, ..., 64} ∪ {96, 128, 192, 256}`.
pub fn default_alpha_grid() -> Vec<u32> {
    (2..=64).chain([96, 128, 192, 256]).collect()
}

pub const DEFAULT_DELTA: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyConfig {
    /// Clip bound for model updates.
    pub c_theta: f64,
    /// Clip bound for cluster identifiers.
    pub c_s: f64,
    /// Noise multiplier of the model mechanism; std is `2 c_theta sigma_theta`.
    pub sigma_theta: f64,
    /// Noise multiplier of the identifier mechanism. `+inf` means no identifier release.
    pub sigma_s: f64,
    /// Client sampling ratio.
    pub q: f64,
    pub rounds: u32,
    pub delta: f64,
    pub alpha_grid: Vec<u32>,
}

impl PrivacyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_theta > 0.0 && self.c_theta.is_finite()) {
            return Err(Error::Config(format!("c_theta must be positive, got {}", self.c_theta)));
        }
        if !(self.c_s > 0.0 && self.c_s.is_finite()) {
            return Err(Error::Config(format!("c_s must be positive, got {}", self.c_s)));
        }
        if !(self.sigma_theta >= 0.0) || self.sigma_theta.is_nan() {
            return Err(Error::Config("sigma_theta must be nonnegative".into()));
        }
        if !(self.sigma_s >= 0.0) || self.sigma_s.is_nan() {
            return Err(Error::Config("sigma_s must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::Config(format!("q must lie in [0, 1], got {}", self.q)));
        }
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        validate_grid(&self.alpha_grid)
    }
}

fn validate_grid(grid: &[u32]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("alpha_grid must be nonempty".into()));
    }
    if grid[0] < 2 {
        return Err(Error::Config("alpha_grid entries must be >= 2".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("alpha_grid must be strictly increasing".into()));
    }
    Ok(())
}

/// The order-infinity value of an RDP curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsInfinity {
    Finite(f64),
    /// Gaussian mechanisms are not pure-DP.
    Infinite,
}

/// RDP curve sampled at every integer order `2..=max_order`.
#[derive(Clone, Debug, PartialEq)]
pub struct RdpCurve {
    // eps[j - 2] = eps(j)
    eps: Vec<f64>,
    pub eps_at_infinity: EpsInfinity,
}

impl RdpCurve {
    pub fn from_fn(max_order: u32, eps_at: impl Fn(u32) -> f64, eps_at_infinity: EpsInfinity) -> Self {
        assert!(max_order >= 2);
        Self { eps: (2..=max_order).map(eps_at).collect(), eps_at_infinity }
    }

    pub fn max_order(&self) -> u32 {
        self.eps.len() as u32 + 1
    }

    pub fn eps_at(&self, alpha: u32) -> f64 {
        assert!(alpha >= 2 && alpha <= self.max_order(), "order {alpha} outside curve");
        self.eps[(alpha - 2) as usize]
    }
}

/// RDP of the Gaussian mechanism at order `alpha` for noise multiplier `sigma`.
pub fn rdp_gaussian(alpha: u32, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return f64::INFINITY;
    }
    if sigma.is_infinite() {
        return 0.0;
    }
    alpha as f64 / (2.0 * sigma * sigma)
}

/// Unamplified per-round curve: identifier mechanism composed with the model mechanism.
pub fn per_round_curve(cfg: &PrivacyConfig) -> RdpCurve {
    let max_order = cfg.alpha_grid.iter().copied().max().unwrap_or(2).max(2);
    per_round_curve_to(cfg.sigma_theta, cfg.sigma_s, max_order)
}

pub(crate) fn per_round_curve_to(sigma_theta: f64, sigma_s: f64, max_order: u32) -> RdpCurve {
    RdpCurve::from_fn(
        max_order,
        |a| rdp_gaussian(a, sigma_s) + rdp_gaussian(a, sigma_theta),
        EpsInfinity::Infinite,
    )
}

/// `ln(e^x - 1)` for `x >= 0`.
fn ln_expm1(x: f64) -> f64 {
    if x > 1.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `ln min{2, (e^{eps_inf} - 1)^j}`.
fn ln_min_two(eps_inf: EpsInfinity, j: u32) -> f64 {
    match eps_inf {
        EpsInfinity::Infinite => std::f64::consts::LN_2,
        EpsInfinity::Finite(e) => (j as f64 * ln_expm1(e)).min(std::f64::consts::LN_2),
    }
}

/// RDP at order `alpha` of the mechanism described by `curve` run on a subsample
/// drawn without replacement at ratio `q`.
pub fn amplify_subsample(curve: &RdpCurve, q: f64, alpha: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Config(format!("sampling ratio must lie in [0, 1], got {q}")));
    }
    if alpha < 2 {
        return Err(Error::Config(format!("order must be >= 2, got {alpha}")));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    if (2..=alpha).any(|j| curve.eps_at(j).is_infinite()) {
        return Ok(f64::INFINITY);
    }
    let ln_q = q.ln();
    let a = alpha as f64;
    let mut terms = Vec::with_capacity(alpha as usize - 1);

    // ln C(alpha, 2)
    let mut ln_binom = (a * (a - 1.0) / 2.0).ln();
    let e2 = curve.eps_at(2);
    let first = (4.0f64.ln() + ln_expm1(e2)).min(e2 + ln_min_two(curve.eps_at_infinity, 2));
    terms.push(2.0 * ln_q + ln_binom + first);

    for j in 3..=alpha {
        let jf = j as f64;
        ln_binom += ((a - jf + 1.0) / jf).ln();
        terms.push(
            jf * ln_q
                + ln_binom
                + (jf - 1.0) * curve.eps_at(j)
                + ln_min_two(curve.eps_at_infinity, j),
        );
    }
    Ok(ln_one_plus_sum_exp(&terms) / (a - 1.0))
}

/// `ln(1 + sum_i e^{t_i})` without overflow.
fn ln_one_plus_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return 0.0;
    }
    if m <= 0.0 {
        let s: f64 = terms.iter().map(|t| t.exp()).sum();
        s.ln_1p()
    } else {
        let s: f64 = terms.iter().map(|t| (t - m).exp()).sum();
        m + ((-m).exp() + s).ln()
    }
}

/// Adaptive composition of `rounds` identical rounds.
pub fn compose_rounds(eps_per_round: f64, rounds: u32) -> f64 {
    eps_per_round * rounds as f64
}

/// RDP to approximate DP: `eps + ln(1/delta) / (alpha - 1)`.
pub fn rdp_to_dp(eps_alpha: f64, alpha: u32, delta: f64) -> f64 {
    eps_alpha + (1.0 / delta).ln() / (alpha as f64 - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccountReport {
    pub eps: f64,
    pub best_alpha: u32,
}

/// Final `(eps, delta)` guarantee, minimized over the order grid.
pub fn account(cfg: &PrivacyConfig) -> Result<AccountReport> {
    cfg.validate()?;
    let curve = per_round_curve(cfg);
    let mut best: Option<AccountReport> = None;
    for &alpha in &cfg.alpha_grid {
        let per_round = amplify_subsample(&curve, cfg.q, alpha)?;
        let eps = rdp_to_dp(compose_rounds(per_round, cfg.rounds), alpha, cfg.delta);
        if !eps.is_finite() {
            continue;
        }
        // strict < keeps the smaller order on ties
        if best.map_or(true, |b| eps < b.eps) {
            best = Some(AccountReport { eps, best_alpha: alpha });
        }
    }
    best.ok_or(Error::InsufficientNoise)
}

/// `sigma_s / sigma_theta` that makes the identifier mechanism consume
/// fraction `ratio` of the per-round RDP at order 2.
pub fn identifier_sigma_factor(ratio: f64) -> f64 {
    ((1.0 - ratio) / ratio).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub sigma_theta: f64,
    pub sigma_s: f64,
}

const SIGMA_MIN: f64 = 1e-2;
const SIGMA_MAX: f64 = 1e4;

/// Finds noise multipliers whose accounted budget matches `target_eps` to 0.1%.
///
/// `template` supplies `q`, `rounds`, `delta` and the order grid; its noise
/// multipliers are ignored. `ratio` is the share of the order-2 per-round
/// budget spent on cluster identifiers.
pub fn calibrate(target_eps: f64, template: &PrivacyConfig, ratio: f64) -> Result<Calibration> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("identifier budget ratio must lie in (0, 1), got {ratio}")));
    }
    let factor = identifier_sigma_factor(ratio);
    calibrate_coupled(target_eps, template, |s| s * factor)
}

/// Calibration when only the model mechanism is released (single-model training).
pub fn calibrate_model_only(target_eps: f64, template: &PrivacyConfig) -> Result<Calibration> {
    calibrate_coupled(target_eps, template, |_| f64::INFINITY)
}

fn calibrate_coupled(
    target_eps: f64,
    template: &PrivacyConfig,
    sigma_s_of: impl Fn(f64) -> f64,
) -> Result<Calibration> {
    if !(target_eps > 0.0 && target_eps.is_finite()) {
        return Err(Error::Config(format!("target eps must be positive, got {target_eps}")));
    }
    let eval = |sigma: f64| -> Result<f64> {
        let cfg = PrivacyConfig { sigma_theta: sigma, sigma_s: sigma_s_of(sigma), ..template.clone() };
        account(&cfg).map(|r| r.eps)
    };

    if eval(SIGMA_MAX)? > target_eps {
        return Err(Error::Calibration(format!(
            "target eps {target_eps} needs sigma_theta above {SIGMA_MAX}"
        )));
    }
    if eval(SIGMA_MIN)? < target_eps {
        return Err(Error::Calibration(format!(
            "target eps {target_eps} is above the budget at sigma_theta = {SIGMA_MIN}"
        )));
    }
    let (mut lo, mut hi) = (SIGMA_MIN.ln(), SIGMA_MAX.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let eps = eval(mid.exp())?;
        if (eps - target_eps).abs() <= 1e-6 * target_eps {
            hi = mid;
            break;
        }
        if eps > target_eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // hi is always on the safe side of the target
    let sigma = hi.exp();
    let eps = eval(sigma)?;
    if (eps - target_eps).abs() > 1e-3 * target_eps {
        return Err(Error::Calibration(format!(
            "bisection ended at eps {eps}, target {target_eps}"
        )));
    }
    Ok(Calibration { sigma_theta: sigma, sigma_s: sigma_s_of(sigma) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(sigma_theta: f64, sigma_s: f64, q: f64, rounds: u32) -> PrivacyConfig {
        PrivacyConfig {
            c_theta: 0.1,
            c_s: 0.1,
            sigma_theta,
            sigma_s,
            q,
            rounds,
            delta: 1e-3,
            alpha_grid: default_alpha_grid(),
        }
    }

    #[test]
    fn gaussian_rdp_examples() {
        assert_eq!(rdp_gaussian(2, 1.0), 1.0);
        assert_eq!(rdp_gaussian(8, 2.0), 1.0);
        assert_eq!(rdp_gaussian(2, 0.5), 4.0);
        assert_eq!(rdp_gaussian(2, 0.0), f64::INFINITY);
    }

    #[test]
    fn per_round_examples() {
        assert_eq!(per_round_curve(&cfg(1.0, 1.0, 0.1, 1)).eps_at(2), 2.0);
        let c = per_round_curve(&cfg(1.0, f64::INFINITY, 0.1, 1));
        for a in [2, 5, 17] {
            assert_eq!(c.eps_at(a), a as f64 / 2.0);
        }
        assert_eq!(per_round_curve(&cfg(2.0, 2.0, 0.1, 1)).eps_at(4), 1.0);
        assert_eq!(c.eps_at_infinity, EpsInfinity::Infinite);
    }

    #[test]
    fn zero_noise_propagates_infinity() {
        let c = per_round_curve(&cfg(0.0, 1.0, 0.1, 1));
        assert!(c.eps_at(3).is_infinite());
        assert!(amplify_subsample(&c, 0.1, 3).unwrap().is_infinite());
        assert!(matches!(account(&cfg(0.0, 1.0, 0.1, 10)), Err(Error::InsufficientNoise)));
    }

    #[test]
    fn amplification_at_zero_rate() {
        let c = per_round_curve(&cfg(0.7, 1.3, 0.1, 1));
        for a in [2, 3, 64, 256] {
            assert_eq!(amplify_subsample(&c, 0.0, a).unwrap(), 0.0);
        }
    }

    #[test]
    fn amplification_rejects_bad_rate() {
        let c = per_round_curve(&cfg(1.0, 1.0, 0.1, 1));
        assert!(matches!(amplify_subsample(&c, 1.5, 2), Err(Error::Config(_))));
        assert!(matches!(amplify_subsample(&c, -0.1, 2), Err(Error::Config(_))));
    }

    #[test]
    fn finite_infinity_order_takes_the_tighter_branch() {
        // with eps(inf) tiny, min{2, (e^eps_inf - 1)^j} < 2 and the bound shrinks
        let inf = RdpCurve::from_fn(8, |a| a as f64 * 0.01, EpsInfinity::Infinite);
        let fin = RdpCurve::from_fn(8, |a| a as f64 * 0.01, EpsInfinity::Finite(0.05));
        for a in 2..=8 {
            assert!(amplify_subsample(&fin, 0.3, a).unwrap() < amplify_subsample(&inf, 0.3, a).unwrap());
        }
    }

    #[test]
    fn compose_and_convert_examples() {
        assert_eq!(compose_rounds(0.05, 1), 0.05);
        assert!((compose_rounds(0.05, 100) - 5.0).abs() < 1e-12);
        assert_eq!(compose_rounds(0.0, 17), 0.0);
        assert!((rdp_to_dp(1.0, 11, (-10.0f64).exp()) - 2.0).abs() < 1e-12);
        assert!((rdp_to_dp(0.0, 2, 0.5) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((rdp_to_dp(3.0, 101, (-100.0f64).exp()) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_rate_picks_largest_order() {
        let r = account(&cfg(1.0, 1.0, 0.0, 10)).unwrap();
        assert_eq!(r.best_alpha, 256);
        assert!((r.eps - (1e3f64).ln() / 255.0).abs() < 1e-15);
    }

    #[test]
    fn grid_validation() {
        let mut c = cfg(1.0, 1.0, 0.1, 10);
        c.alpha_grid = vec![3, 2];
        assert!(matches!(account(&c), Err(Error::Config(_))));
        c.alpha_grid = vec![1, 2];
        assert!(matches!(account(&c), Err(Error::Config(_))));
        c.alpha_grid = vec![];
        assert!(matches!(account(&c), Err(Error::Config(_))));
    }

    #[test]
    fn doubling_sigma_theta_lowers_eps() {
        let a = account(&cfg(1.0, 2.0, 0.05, 100)).unwrap().eps;
        let b = account(&cfg(2.0, 2.0, 0.05, 100)).unwrap().eps;
        assert!(b < a);
    }

    #[test]
    fn even_split_gives_equal_sigmas() {
        let c = calibrate(4.0, &cfg(1.0, 1.0, 0.1, 200), 0.5).unwrap();
        assert_eq!(c.sigma_s, c.sigma_theta);
    }

    #[test]
    fn calibrate_rejects_bad_inputs() {
        let t = cfg(1.0, 1.0, 0.1, 200);
        assert!(matches!(calibrate(0.0, &t, 0.5), Err(Error::Config(_))));
        assert!(matches!(calibrate(1.0, &t, 1.0), Err(Error::Config(_))));
        // ln(1/delta)/255 is a floor no noise level can beat
        assert!(matches!(calibrate(0.01, &t, 0.5), Err(Error::Calibration(_))));
    }

    #[test]
    fn longer_runs_need_more_noise() {
        let short = calibrate(4.0, &cfg(1.0, 1.0, 0.1, 50), 0.5).unwrap();
        let long = calibrate(4.0, &cfg(1.0, 1.0, 0.1, 400), 0.5).unwrap();
        assert!(long.sigma_theta > short.sigma_theta);
    }

    proptest! {
        #[test]
        fn curves_nondecreasing_in_order(st in 0.05f64..50.0, ss in 0.05f64..50.0) {
            let c = per_round_curve(&cfg(st, ss, 0.1, 1));
            for a in 2..c.max_order() {
                prop_assert!(c.eps_at(a) <= c.eps_at(a + 1));
            }
        }

        #[test]
        fn amplification_never_hurts_at_moderate_noise(sigma in 1.0f64..2.0, q in 0.0f64..0.5, alpha in 2u32..128) {
            // the bound's higher-order terms do not vanish as sigma grows, so
            // this only holds near sigma = 1
            let c = per_round_curve_to(sigma, f64::INFINITY, 128);
            prop_assert!(amplify_subsample(&c, q, alpha).unwrap() <= c.eps_at(alpha));
        }

        #[test]
        fn amplification_nondecreasing_in_rate(sigma in 0.5f64..20.0, q in 0.01f64..0.9, alpha in 2u32..128) {
            let c = per_round_curve_to(sigma, f64::INFINITY, 128);
            let lo = amplify_subsample(&c, q, alpha).unwrap();
            let hi = amplify_subsample(&c, q + 0.1, alpha).unwrap();
            prop_assert!(lo <= hi * (1.0 + 1e-12));
        }
    }
}
