//! Rebalanced vs plain clustering on a 5:1:1:1 population of four lines.
//!
//! `cargo run --release --example collapse_study -- [rounds] [lr] [epochs] [init_std] [seeds] [samples] [batch] [gamma] [c_theta]`

use rrcluster::fedsim::Method;
use rrcluster::studies::CollapseStudy;

fn main() -> rrcluster::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut study = CollapseStudy::default();
    if let Some(r) = args.first() {
        study.rounds = r.parse().expect("rounds");
    }
    if let Some(lr) = args.get(1) {
        study.train.local_lr = lr.parse().expect("lr");
    }
    if let Some(e) = args.get(2) {
        study.train.local_epochs = e.parse().expect("epochs");
    }
    if let Some(s) = args.get(3) {
        study.init_std = s.parse().expect("init_std");
    }
    if let Some(n) = args.get(4) {
        study.seeds = (0..n.parse().expect("seeds")).collect();
    }
    if let Some(n) = args.get(5) {
        study.data.samples_per_client = n.parse().expect("samples");
    }
    if let Some(n) = args.get(6) {
        study.train.batch_size = n.parse().expect("batch");
    }
    if let Some(g) = args.get(7) {
        study.train.gamma = g.parse().expect("gamma");
    }
    if let Some(c) = args.get(8) {
        study.c_theta = c.parse().expect("c_theta");
    }
    for method in [Method::RrIfca, Method::DpIfca] {
        println!("{method}");
        let outcomes = study.run(method)?;
        for o in &outcomes {
            let slopes: Vec<String> = o.slopes.iter().map(|s| format!("{s:+.3}")).collect();
            println!(
                "  seed {:>2}  slopes [{}]  err {:.3}  acc {:.3}  collapsed {}",
                o.seed,
                slopes.join(", "),
                o.slope_error,
                o.clustering_accuracy,
                o.collapsed_clusters
            );
        }
        let ok = outcomes.iter().filter(|o| o.recovered(0.1, 0.95)).count();
        let collapsed = outcomes.iter().filter(|o| o.collapsed_clusters >= 1).count();
        println!("  recovered {ok}/{}  with a collapsed cluster {collapsed}/{}", outcomes.len(), outcomes.len());
    }
    Ok(())
}
