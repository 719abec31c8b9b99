//! Run manifest: what a finished (or partial) run produced.
//!
//! The digest is recomputed from the stored config copy, never from memory,
//! so the manifest stays honest about what is actually on disk.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::formats::{self, OutputPaths, TrainMetrics};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// SHA-256 of the stored config.json bytes.
    pub config_digest: String,
    /// Artifact files present in the output directory, in pipeline order.
    pub artifacts: Vec<String>,
    pub ledger_head: Option<String>,
    pub headline: Headline,
}

/// Headline metrics pulled from whichever artifacts exist.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Headline {
    pub bid_count: Option<usize>,
    pub bid_mean: Option<f64>,
    pub bid_std: Option<f64>,
    pub test_rmse: Option<f64>,
    pub test_r_squared: Option<f64>,
    pub best_policy: Option<String>,
    /// Revenue increase of the optimized policy over full disclosure.
    pub increase_over_full_percent: Option<f64>,
}

/// Builds the manifest from the files in the output directory.
pub fn build_manifest(paths: &OutputPaths) -> Result<RunManifest, CliError> {
    let config_path = paths.config();
    let config_bytes = std::fs::read(&config_path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingInput(config_path.clone())
        } else {
            CliError::io(format!("reading {}", config_path.display()), e)
        }
    })?;
    let config_digest = hex::encode(Sha256::digest(&config_bytes));

    let artifacts: Vec<String> = formats::ARTIFACT_FILES
        .iter()
        .filter(|name| paths.dir().join(name).is_file())
        .map(|name| name.to_string())
        .collect();

    let ledger_head = if paths.ledger().is_file() {
        Some(formats::verify_ledger_file(&paths.ledger())?.head_hex)
    } else {
        None
    };

    let mut headline = Headline::default();
    if paths.dataset().is_file() {
        let records = formats::read_dataset(&paths.dataset())?;
        let bids: Vec<f64> = records
            .iter()
            .flat_map(|r| r.participants.iter().map(|p| p.bid))
            .collect();
        let n = bids.len() as f64;
        let mean = bids.iter().sum::<f64>() / n;
        let variance = bids.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / n;
        headline.bid_count = Some(bids.len());
        headline.bid_mean = Some(mean);
        headline.bid_std = Some(variance.sqrt());
    }
    if paths.metrics().is_file() {
        let metrics: TrainMetrics = formats::read_json(&paths.metrics())?;
        headline.test_rmse = Some(metrics.test.rmse);
        headline.test_r_squared = metrics.test.r_squared;
    }
    if paths.revenue_report_json().is_file() {
        let report: formats::OptimizeReport = formats::read_json(&paths.revenue_report_json())?;
        headline.best_policy = Some(report.winner.kind.clone());
        headline.increase_over_full_percent = report
            .report
            .increases
            .iter()
            .find(|i| i.baseline == "full" && i.policy == "optimized")
            .and_then(|i| i.percent);
    }

    Ok(RunManifest {
        config_digest,
        artifacts,
        ledger_head,
        headline,
    })
}

/// Verifies that the stored config reproduces the manifest digest.
pub fn check_digest(paths: &OutputPaths, manifest: &RunManifest) -> Result<(), CliError> {
    let bytes =
        std::fs::read(paths.config()).map_err(|e| CliError::io("re-reading stored config", e))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    if digest != manifest.config_digest {
        return Err(CliError::Verification(format!(
            "manifest digest {} does not match stored config digest {digest}",
            manifest.config_digest
        )));
    }
    Ok(())
}
