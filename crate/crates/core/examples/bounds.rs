//! Analytic misclustering probability, contraction factor and error floor,
//! and how they move with the rebalancing threshold.

use rrcluster::metrics::{contraction_params, privacy_floor_term, rounds_to_converge, tau_bound, AnalysisParams, ContractionBound};

fn main() -> rrcluster::Result<()> {
    let base = AnalysisParams {
        lambda_sc: 0.5,
        l_smooth: 2.0,
        eta2: 1e-6,
        v2: 1e-4,
        mu2: 1e-3,
        g: 5.0,
        beta: 0.25,
        alpha0: 0.2,
        delta_sep: 3.0,
        m: 1000,
        k: 2,
        b: 100,
        gamma: 0.5,
        sigma_s: 0.05,
        sigma_theta: 1.0,
        c_theta: 0.1,
        delta_c: 0.5,
        d: 10,
    };
    println!("{:>5} {:>12} {:>12} {:>12} {:>12} {:>10}", "B", "tau", "K", "floor", "privacy", "rounds");
    for b in [1, 10, 50, 100, 200, 300] {
        let p = AnalysisParams { b, ..base.clone() };
        let tau = tau_bound(&p)?;
        let bound = contraction_params(&p)?;
        match &bound {
            ContractionBound::Bounded { contraction, eps_floor, .. } => {
                let t = rounds_to_converge(&p, &bound).map_or("-".to_string(), |t| format!("{t:.1}"));
                println!(
                    "{b:>5} {tau:>12.4e} {contraction:>12.4e} {eps_floor:>12.4e} {:>12.4e} {t:>10}",
                    privacy_floor_term(&p)
                );
            }
            ContractionBound::Vacuous { reason, .. } => println!("{b:>5} {tau:>12.4e}  vacuous: {reason}"),
        }
    }
    Ok(())
}
