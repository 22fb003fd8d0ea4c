//! Noise calibration: find the multipliers that hit a target budget.
//!
//! `cargo run --example calibration -- [identifier_share]`

use rrcluster::privacy::{account, calibrate, default_alpha_grid, PrivacyConfig};

fn main() -> rrcluster::Result<()> {
    let share: f64 = std::env::args().nth(1).map_or(0.5, |s| s.parse().expect("identifier share"));
    let template = PrivacyConfig {
        c_theta: 0.1,
        c_s: 0.1,
        sigma_theta: 1.0,
        sigma_s: 1.0,
        q: 0.1,
        rounds: 200,
        delta: 1e-3,
        alpha_grid: default_alpha_grid(),
    };
    println!("{:>6} {:>12} {:>12} {:>12}", "target", "sigma_theta", "sigma_s", "accounted");
    for target in [2.0, 4.0, 8.0] {
        match calibrate(target, &template, share) {
            Ok(c) => {
                let eps = account(&PrivacyConfig { sigma_theta: c.sigma_theta, sigma_s: c.sigma_s, ..template.clone() })?.eps;
                println!("{target:>6} {:>12.5} {:>12.5} {eps:>12.6}", c.sigma_theta, c.sigma_s);
            }
            Err(e) => println!("{target:>6} unreachable: {e}"),
        }
    }
    // Higher-order subsampling terms do not vanish with noise, so the budget has a floor.
    let floor = account(&PrivacyConfig { sigma_theta: 1e4, sigma_s: 1e4, ..template })?;
    println!("floor at sigma = 1e4: eps = {:.5} (alpha = {})", floor.eps, floor.best_alpha);
    Ok(())
}
