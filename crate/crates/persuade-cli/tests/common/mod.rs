//! Shared helpers for driving the `persuade` binary in integration tests.
//! Each test binary uses a different subset.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Output;

use persuade_cli::config::ExperimentConfig;

pub fn persuade_bin() -> &'static str {
    env!("CARGO_BIN_EXE_persuade")
}

/// Desk-scale experiment: small enough for fast tests, large enough for
/// the statistical assertions to hold.
pub fn desk_config(seed: u64) -> ExperimentConfig {
    let mut config = ExperimentConfig::with_seed(seed);
    config.market.population_size = 300;
    config.market.auction_count = 2000;
    config.market.participants_per_auction = 6;
    config.predictor.learning_rates = vec![0.1];
    config.predictor.max_depths = vec![5, 7];
    config.predictor.n_trees = vec![60];
    config.search.mc_auctions = 500;
    config
}

pub fn write_config(dir: &Path, config: &ExperimentConfig) -> PathBuf {
    let path = dir.join("experiment.json");
    std::fs::write(&path, config.canonical_bytes()).unwrap();
    path
}

pub fn run_persuade(config: &Path, out: &Path, args: &[&str]) -> Output {
    let output = std::process::Command::new(persuade_bin())
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs");
    output
}

pub fn expect_success(output: &Output, what: &str) {
    assert!(
        output.status.success(),
        "{what} failed with {:?}\nstdout: {}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr),
    );
}

pub fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process not killed by signal")
}
