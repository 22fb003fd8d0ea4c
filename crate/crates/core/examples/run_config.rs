//! Runs an experiment config (a JSON file or a shipped preset) and writes
//! the results CSV plus its JSON sidecar.
//!
//! `cargo run --release --example run_config -- preset:bsweep out/bsweep.csv`
//! `cargo run --release --example run_config -- my_config.json out/run.csv`

use std::path::PathBuf;

use rrcluster::experiment::{cmd_run, parse_config, preset};

fn main() -> rrcluster::Result<()> {
    let mut args = std::env::args().skip(1);
    let source = args.next().unwrap_or_else(|| "preset:balanced4".into());
    let out = PathBuf::from(args.next().unwrap_or_else(|| "results/run.csv".into()));
    let cfg = match source.strip_prefix("preset:") {
        Some(name) => preset(name)?,
        None => parse_config(&source)?,
    };
    let report = cmd_run(&cfg, Some(&out), None)?;
    for v in &report.variants {
        println!(
            "{} B={} sigma_theta={:.4} sigma_s={:.4} eps={:.4}",
            v.method, v.b, v.sigma_theta, v.sigma_s, v.eps_dp
        );
    }
    println!("{} rows -> {}", report.rows.len(), out.display());
    Ok(())
}
