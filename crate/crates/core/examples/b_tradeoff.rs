//! Clustering accuracy against the rebalancing threshold at a fixed budget.
//!
//! `cargo run --release --example b_tradeoff -- [eps] [seeds] [rounds] [c_theta] [q] [lr] [epochs]`

use rrcluster::studies::TradeoffStudy;

fn main() -> rrcluster::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut study = TradeoffStudy::default();
    if let Some(e) = args.first() {
        study.target_eps = e.parse().expect("eps");
    }
    if let Some(n) = args.get(1) {
        study.seeds = (0..n.parse().expect("seeds")).collect();
    }
    if let Some(r) = args.get(2) {
        study.rounds = r.parse().expect("rounds");
    }
    if let Some(c) = args.get(3) {
        study.c_theta = c.parse().expect("c_theta");
    }
    if let Some(q) = args.get(4) {
        study.q = q.parse().expect("q");
    }
    if let Some(lr) = args.get(5) {
        study.train.local_lr = lr.parse().expect("lr");
    }
    if let Some(e) = args.get(6) {
        study.train.local_epochs = e.parse().expect("epochs");
    }
    let noise = study.noise()?;
    println!(
        "eps = {} over {} rounds at q = {}: sigma_theta = {:.4}, sigma_s = {:.4}",
        study.target_eps, study.rounds, study.q, noise.sigma_theta, noise.sigma_s
    );
    for p in study.run()? {
        println!(
            "B = {:>2}: median clustering accuracy {:.3}, median slope error {:.3}",
            p.b, p.median_accuracy, p.median_slope_error
        );
    }
    Ok(())
}
