//! Regression against a stored per-slot trace of the default scenario.
//!
//! Regenerate with `SATLAE_BLESS=1 cargo test --test golden` only when a
//! model change is intended, and say why in the commit.

use std::path::PathBuf;

use satlae::cli::write_csv;
use satlae::engine::{run_table, ScenarioConfig};

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/run_default_seed1.csv")
}

fn close(a: &str, b: &str) -> bool {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => (x - y).abs() <= 1e-7 * x.abs().max(y.abs()).max(1e-12),
        _ => a == b,
    }
}

#[test]
fn default_trace_matches_golden() {
    let mut csv = Vec::new();
    write_csv(&mut csv, &run_table(&ScenarioConfig::default()).unwrap()).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    if std::env::var_os("SATLAE_BLESS").is_some() {
        std::fs::write(golden_path(), &csv).unwrap();
    }
    let golden = std::fs::read_to_string(golden_path()).expect("golden trace present");
    assert_eq!(csv.lines().count(), golden.lines().count());
    for (i, (got, want)) in csv.lines().zip(golden.lines()).enumerate() {
        let g: Vec<&str> = got.split(',').collect();
        let w: Vec<&str> = want.split(',').collect();
        assert_eq!(g.len(), w.len(), "line {i}");
        for (a, b) in g.iter().zip(&w) {
            assert!(
                close(a, b),
                "line {i}: {a} vs {b}\n got: {got}\nwant: {want}"
            );
        }
    }
}
