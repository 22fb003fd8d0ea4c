//! Per-client CSV datasets: generate, write, load back and train on them.

use rrcluster::datagen::{gen_synthetic, load_csv, write_csv, TargetKind};
use rrcluster::experiment::{four_lines, run_config, DataSource, ExperimentConfig, PrivacySettings, Sweep};
use rrcluster::fedsim::Method;
use rrcluster::studies::study_train;

fn main() -> rrcluster::Result<()> {
    let dir = std::env::temp_dir().join("rrcluster-csv-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("clients.csv");

    let data = gen_synthetic(&four_lines(vec![6, 6, 6, 6]), 3)?;
    write_csv(&path, &data)?;
    let back = load_csv(&path, TargetKind::Regression)?;
    assert_eq!(back, data);
    println!("wrote and reloaded {} clients from {}", back.len(), path.display());

    let cfg = ExperimentConfig {
        method: Method::RrIfca,
        k: 4,
        m: Some(24),
        q: 1.0,
        rounds: 30,
        b: 3,
        train: study_train(),
        data: DataSource::Csv { path: path.clone(), targets: TargetKind::Regression },
        privacy: PrivacySettings { c_theta: Some(10.0), sigma_theta: Some(0.0), sigma_s: Some(0.0), ..Default::default() },
        init_std: 0.1,
        train_frac: 0.8,
        seeds: vec![0, 1],
        data_seed: None,
        eval_every: 10,
        output: None,
        sweep: Sweep::default(),
    };
    let report = run_config(&cfg, None)?;
    for r in &report.rows {
        println!(
            "seed {} round {:>2}: val loss {:.4}, clustering accuracy {:.3}",
            r.seed,
            r.round,
            r.val_loss,
            r.clustering_accuracy.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
