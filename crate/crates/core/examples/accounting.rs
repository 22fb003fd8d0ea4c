//! Privacy accounting for the subsampled two-mechanism release.
//!
//! Prints the per-round amplified RDP curve at a few orders and the final
//! `(eps, delta)` guarantee with the optimal order.

use rrcluster::privacy::{account, amplify_subsample, default_alpha_grid, per_round_curve, rdp_gaussian, PrivacyConfig};

fn main() -> rrcluster::Result<()> {
    let cfg = PrivacyConfig {
        c_theta: 0.1,
        c_s: 0.1,
        sigma_theta: 4.0,
        sigma_s: 4.0,
        q: 0.1,
        rounds: 200,
        delta: 1e-3,
        alpha_grid: default_alpha_grid(),
    };
    cfg.validate()?;
    println!("gaussian rdp at order 2, sigma 1: {}", rdp_gaussian(2, 1.0));

    let curve = per_round_curve(&cfg);
    println!("{:>6} {:>14} {:>14}", "alpha", "unamplified", "subsampled");
    for alpha in [2, 4, 8, 16, 32, 64] {
        println!("{alpha:>6} {:>14.6e} {:>14.6e}", curve.eps_at(alpha), amplify_subsample(&curve, cfg.q, alpha)?);
    }

    let report = account(&cfg)?;
    println!("T = {} rounds at q = {}: eps = {:.4} (delta = {}, best alpha = {})", cfg.rounds, cfg.q, report.eps, cfg.delta, report.best_alpha);

    let model_only = PrivacyConfig { sigma_s: f64::INFINITY, ..cfg };
    println!("without identifier release: eps = {:.4}", account(&model_only)?.eps);
    Ok(())
}
