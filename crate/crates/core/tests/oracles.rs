mod common;

use common::rel_err;
use rrcluster::metrics::{contraction_params, tau_bound, AnalysisParams, ContractionBound};
use rrcluster::privacy::{account, amplify_subsample, default_alpha_grid, per_round_curve, PrivacyConfig};
use serde_json::Value;

fn data(name: &str) -> Value {
    let path = format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn num(v: &Value) -> f64 {
    match v {
        Value::String(s) => s.parse().unwrap(),
        other => other.as_f64().unwrap(),
    }
}

fn privacy(case: &Value) -> PrivacyConfig {
    PrivacyConfig {
        c_theta: 1.0,
        c_s: 1.0,
        sigma_theta: num(&case["sigma_theta"]),
        sigma_s: match &case["sigma_s"] {
            Value::String(s) if s == "inf" => f64::INFINITY,
            v => num(v),
        },
        q: num(&case["q"]),
        rounds: case["rounds"].as_u64().unwrap() as u32,
        delta: num(&case["delta"]),
        alpha_grid: default_alpha_grid(),
    }
}

#[test]
fn pinned_order_two_value() {
    let want = num(&data("accountant_oracle.json")["q0.1_alpha2_sigma1"]);
    let cfg = PrivacyConfig { sigma_s: f64::INFINITY, ..privacy_default() };
    let got = amplify_subsample(&per_round_curve(&cfg), 0.1, 2).unwrap();
    assert!(rel_err(got, want) < 1e-9, "{got} vs {want}");
}

fn privacy_default() -> PrivacyConfig {
    PrivacyConfig {
        c_theta: 1.0,
        c_s: 1.0,
        sigma_theta: 1.0,
        sigma_s: 1.0,
        q: 0.1,
        rounds: 1,
        delta: 1e-3,
        alpha_grid: default_alpha_grid(),
    }
}

#[test]
fn account_matches_oracle() {
    let doc = data("accountant_oracle.json");
    let mut cases = vec![doc["pinned"].clone()];
    cases.extend(doc["random_configs"].as_array().unwrap().iter().cloned());
    assert!(cases.len() >= 50);
    for case in &cases {
        let r = account(&privacy(case)).unwrap();
        let want = num(&case["eps"]);
        assert!(rel_err(r.eps, want) < 1e-9, "{case}: got {}", r.eps);
        assert_eq!(r.best_alpha as u64, case["best_alpha"].as_u64().unwrap(), "{case}");
    }
}

#[test]
fn bounds_match_oracle() {
    let cases = data("bounds_oracle.json");
    let cases = cases.as_array().unwrap();
    assert_eq!(cases.len(), 20);
    for case in cases {
        let p: AnalysisParams = serde_json::from_value(case["params"].clone()).unwrap();
        let e = &case["expected"];
        assert!(rel_err(tau_bound(&p).unwrap(), num(&e["tau"])) < 1e-12, "{case}");
        match (contraction_params(&p).unwrap(), e["status"].as_str().unwrap()) {
            (ContractionBound::Vacuous { .. }, "vacuous") => {}
            (ContractionBound::Bounded { rho, contraction, eps_floor, terms, .. }, "bounded") => {
                assert!(rel_err(rho, num(&e["rho"])) < 1e-12);
                assert!(rel_err(contraction, num(&e["contraction"])) < 1e-12, "{case}");
                assert!(rel_err(eps_floor, num(&e["eps_floor"])) < 1e-12, "{case}");
                let t = [terms.gradient_noise, terms.misclustering, terms.cross_cluster, terms.privacy];
                for (got, want) in t.iter().zip(e["terms"].as_array().unwrap()) {
                    assert!(rel_err(*got, num(want)) < 1e-12, "{case}");
                }
            }
            (got, want) => panic!("{case}: got {got:?}, oracle says {want}"),
        }
    }
}
