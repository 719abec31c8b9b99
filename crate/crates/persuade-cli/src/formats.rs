//! Artifact file formats: CSV tables, JSONL streams, JSON documents, and
//! the ledger file with its strict hash encoding.
//!
//! All writes go through a temp-file-plus-rename so a crashed run never
//! leaves a half-written artifact. Floats are rendered as shortest
//! round-trip decimals and parsed exactly, so write→read→write is
//! byte-stable.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use persuade_core::eval::{ResidualSummary, RevenueReport};
use persuade_core::ledger::{canonical_record_bytes, Ledger, LedgerEntry, LedgerRecord};
use persuade_core::market::{AdvertiserProfile, AuctionInstance, AuctionRecord, ParticipantRecord};
use persuade_core::predictor::{Hyperparams, LeaderboardEntry, RegressionMetrics};

use crate::error::CliError;

/// Well-known artifact filenames inside an output directory.
pub struct OutputPaths {
    dir: PathBuf,
}

/// Every artifact the pipeline can emit, in manifest order.
pub const ARTIFACT_FILES: &[&str] = &[
    "config.json",
    "population.csv",
    "instances.jsonl",
    "dataset.csv",
    "ledger.jsonl",
    "model.json",
    "metrics.json",
    "residuals.json",
    "residual_deciles.csv",
    "residual_histogram.csv",
    "leaderboard.csv",
    "revenue_report.json",
    "revenue_report.csv",
    "search_audit.csv",
];

impl OutputPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn config(&self) -> PathBuf {
        self.file("config.json")
    }
    pub fn population(&self) -> PathBuf {
        self.file("population.csv")
    }
    pub fn instances(&self) -> PathBuf {
        self.file("instances.jsonl")
    }
    pub fn dataset(&self) -> PathBuf {
        self.file("dataset.csv")
    }
    pub fn ledger(&self) -> PathBuf {
        self.file("ledger.jsonl")
    }
    pub fn model(&self) -> PathBuf {
        self.file("model.json")
    }
    pub fn metrics(&self) -> PathBuf {
        self.file("metrics.json")
    }
    pub fn residuals(&self) -> PathBuf {
        self.file("residuals.json")
    }
    pub fn residual_deciles(&self) -> PathBuf {
        self.file("residual_deciles.csv")
    }
    pub fn residual_histogram(&self) -> PathBuf {
        self.file("residual_histogram.csv")
    }
    pub fn leaderboard(&self) -> PathBuf {
        self.file("leaderboard.csv")
    }
    pub fn revenue_report_json(&self) -> PathBuf {
        self.file("revenue_report.json")
    }
    pub fn revenue_report_csv(&self) -> PathBuf {
        self.file("revenue_report.csv")
    }
    pub fn search_audit(&self) -> PathBuf {
        self.file("search_audit.csv")
    }
    pub fn manifest(&self) -> PathBuf {
        self.file("manifest.json")
    }
}

/// Writes via a sibling temp file and rename, so readers never observe a
/// partial artifact.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let context = || format!("writing {}", path.display());
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(context(), e))?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut file = std::fs::File::create(&tmp).map_err(|e| CliError::io(context(), e))?;
        file.write_all(bytes)
            .map_err(|e| CliError::io(context(), e))?;
        file.sync_all().map_err(|e| CliError::io(context(), e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(context(), e))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingInput(path.to_path_buf())
        } else {
            CliError::io(format!("reading {}", path.display()), e)
        }
    })
}

// ---------------------------------------------------------------------------
// Generic JSON documents.

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Other(format!("serializing {}: {e}", path.display())))?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_file(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Other(format!("parsing {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Population CSV.

#[derive(Debug, Serialize, Deserialize)]
struct PopulationRow {
    id: u32,
    budget: f64,
    industry: usize,
    aggressiveness: f64,
    base_value: f64,
}

pub fn write_population(path: &Path, population: &[AdvertiserProfile]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for profile in population {
        writer
            .serialize(PopulationRow {
                id: profile.id,
                budget: profile.budget,
                industry: profile.industry,
                aggressiveness: profile.aggressiveness,
                base_value: profile.base_value,
            })
            .map_err(|e| CliError::Other(format!("encoding population: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Other(format!("encoding population: {e}")))?;
    atomic_write(path, &bytes)
}

pub fn read_population(path: &Path) -> Result<Vec<AdvertiserProfile>, CliError> {
    let text = read_file(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut population = Vec::new();
    for row in reader.deserialize::<PopulationRow>() {
        let row = row.map_err(|e| CliError::Other(format!("parsing {}: {e}", path.display())))?;
        population.push(AdvertiserProfile {
            id: row.id,
            budget: row.budget,
            industry: row.industry,
            aggressiveness: row.aggressiveness,
            base_value: row.base_value,
        });
    }
    Ok(population)
}

// ---------------------------------------------------------------------------
// Auction instances, one JSON object per line.

pub fn write_instances(path: &Path, instances: &[AuctionInstance]) -> Result<(), CliError> {
    let mut out = Vec::new();
    for instance in instances {
        serde_json::to_writer(&mut out, instance)
            .map_err(|e| CliError::Other(format!("encoding instances: {e}")))?;
        out.push(b'\n');
    }
    atomic_write(path, &out)
}

pub fn read_instances(path: &Path) -> Result<Vec<AuctionInstance>, CliError> {
    let text = read_file(path)?;
    text.lines()
        .enumerate()
        .map(|(index, line)| {
            serde_json::from_str(line).map_err(|e| {
                CliError::Other(format!(
                    "parsing {} line {}: {e}",
                    path.display(),
                    index + 1
                ))
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Dataset CSV: one row per advertiser-auction pair, fixed column order.

#[derive(Debug, Serialize, Deserialize)]
struct DatasetRow {
    auction_id: u64,
    advertiser_id: u32,
    signal: usize,
    state: usize,
    budget: f64,
    industry: usize,
    aggressiveness: f64,
    time_bucket: u8,
    category: u8,
    bid: f64,
    won: bool,
    payment: f64,
}

pub fn write_dataset(path: &Path, records: &[AuctionRecord]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for record in records {
        for participant in &record.participants {
            writer
                .serialize(DatasetRow {
                    auction_id: record.auction_id,
                    advertiser_id: participant.advertiser_id,
                    signal: record.signal,
                    state: record.true_state,
                    budget: participant.budget,
                    industry: participant.industry,
                    aggressiveness: participant.aggressiveness,
                    time_bucket: record.time_bucket,
                    category: record.category,
                    bid: participant.bid,
                    won: participant.advertiser_id == record.winner,
                    payment: record.payment,
                })
                .map_err(|e| CliError::Other(format!("encoding dataset: {e}")))?;
        }
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Other(format!("encoding dataset: {e}")))?;
    atomic_write(path, &bytes)
}

/// Rebuilds auction records from the flat rows; rows of one auction must be
/// contiguous and agree on the auction-level fields.
pub fn read_dataset(path: &Path) -> Result<Vec<AuctionRecord>, CliError> {
    let text = read_file(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut records: Vec<AuctionRecord> = Vec::new();
    for (index, row) in reader.deserialize::<DatasetRow>().enumerate() {
        let row = row.map_err(|e| {
            CliError::Other(format!("parsing {} row {}: {e}", path.display(), index + 1))
        })?;
        let matches_current = records
            .last()
            .map(|r| r.auction_id == row.auction_id)
            .unwrap_or(false);
        if !matches_current {
            records.push(AuctionRecord {
                auction_id: row.auction_id,
                signal: row.signal,
                true_state: row.state,
                time_bucket: row.time_bucket,
                category: row.category,
                participants: Vec::new(),
                winner: 0,
                payment: row.payment,
            });
        }
        let record = records.last_mut().expect("pushed above");
        if record.signal != row.signal
            || record.true_state != row.state
            || record.time_bucket != row.time_bucket
            || record.category != row.category
            || record.payment.to_bits() != row.payment.to_bits()
        {
            return Err(CliError::Other(format!(
                "parsing {} row {}: inconsistent auction-level fields for auction {}",
                path.display(),
                index + 1,
                row.auction_id
            )));
        }
        if row.won {
            record.winner = row.advertiser_id;
        }
        record.participants.push(ParticipantRecord {
            advertiser_id: row.advertiser_id,
            budget: row.budget,
            industry: row.industry,
            aggressiveness: row.aggressiveness,
            bid: row.bid,
        });
    }
    Ok(records)
}

/// Full auction records as JSON lines — the dataset's alternative encoding
/// for consumers that want nesting instead of the flat CSV.
pub fn write_records_jsonl(path: &Path, records: &[AuctionRecord]) -> Result<(), CliError> {
    let mut out = Vec::new();
    for record in records {
        serde_json::to_writer(&mut out, record)
            .map_err(|e| CliError::Other(format!("encoding records: {e}")))?;
        out.push(b'\n');
    }
    atomic_write(path, &out)
}

pub fn read_records_jsonl(path: &Path) -> Result<Vec<AuctionRecord>, CliError> {
    let text = read_file(path)?;
    text.lines()
        .enumerate()
        .map(|(index, line)| {
            serde_json::from_str(line).map_err(|e| {
                CliError::Other(format!(
                    "parsing {} line {}: {e}",
                    path.display(),
                    index + 1
                ))
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Ledger JSONL: strict lowercase hex, canonical record bytes spliced in
// verbatim so the file carries exactly what the hashes commit to.

pub fn write_ledger(path: &Path, ledger: &Ledger) -> Result<(), CliError> {
    let mut out = String::new();
    for entry in ledger.entries() {
        let canonical = canonical_record_bytes(&entry.record)
            .map_err(|e| CliError::Other(format!("encoding ledger: {e}")))?;
        let canonical = std::str::from_utf8(&canonical).expect("canonical bytes are UTF-8 JSON");
        writeln!(
            out,
            "{{\"sequence\":{},\"previous_hash\":\"{}\",\"record\":{},\"entry_hash\":\"{}\"}}",
            entry.sequence,
            hex::encode(entry.previous_hash),
            canonical,
            hex::encode(entry.entry_hash),
        )
        .expect("writing to a String cannot fail");
    }
    atomic_write(path, out.as_bytes())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LedgerLine {
    sequence: u64,
    previous_hash: HexHash,
    record: LedgerRecord,
    entry_hash: HexHash,
}

#[derive(Debug)]
struct HexHash([u8; 32]);

impl<'de> Deserialize<'de> for HexHash {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        if text.len() != 64 || !text.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(serde::de::Error::custom(
                "expected 64 lowercase hex characters",
            ));
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(&text, &mut out).map_err(serde::de::Error::custom)?;
        Ok(HexHash(out))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerFileError {
    #[error("ledger file {0} not found")]
    Missing(PathBuf),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("entry {index}: malformed ledger line: {message}")]
    Malformed { index: usize, message: String },
}

/// Strict line-by-line load. Any undecodable line reports the entry index,
/// so file corruption is attributed just like a hash mismatch.
pub fn load_ledger(path: &Path) -> Result<Ledger, LedgerFileError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            LedgerFileError::Missing(path.to_path_buf())
        } else {
            LedgerFileError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    let mut entries = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let parsed: LedgerLine =
            serde_json::from_str(line).map_err(|e| LedgerFileError::Malformed {
                index,
                message: e.to_string(),
            })?;
        entries.push(LedgerEntry {
            sequence: parsed.sequence,
            previous_hash: parsed.previous_hash.0,
            record: parsed.record,
            entry_hash: parsed.entry_hash.0,
        });
    }
    Ok(Ledger::from_entries(entries))
}

/// Everything `verify` checks, from the file alone: strict parse, full
/// chain verification, and outcome replay.
pub fn verify_ledger_file(path: &Path) -> Result<VerifySummary, CliError> {
    let ledger = load_ledger(path).map_err(|e| match e {
        LedgerFileError::Missing(p) => CliError::MissingInput(p),
        LedgerFileError::Io { path, source } => {
            CliError::io(format!("reading {}", path.display()), source)
        }
        malformed @ LedgerFileError::Malformed { .. } => {
            CliError::Verification(malformed.to_string())
        }
    })?;
    ledger
        .verify_chain()
        .map_err(|fault| CliError::Verification(fault.to_string()))?;
    ledger
        .replay()
        .map_err(|e| CliError::Verification(e.to_string()))?;
    Ok(VerifySummary {
        entries: ledger.len(),
        head_hex: ledger.head_hex(),
    })
}

pub struct VerifySummary {
    pub entries: usize,
    pub head_hex: String,
}

// ---------------------------------------------------------------------------
// Training artifacts.

/// metrics.json: tuning winner and held-out quality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub seed: u64,
    pub config_digest: String,
    pub best_hyperparams: Hyperparams,
    pub best_validation_rmse: f64,
    pub test: RegressionMetrics,
    pub rows: SplitRows,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitRows {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Debug, Serialize)]
struct LeaderboardRow<'a> {
    learning_rate: f64,
    max_depth: usize,
    n_trees: usize,
    min_samples_leaf: usize,
    validation_rmse: &'a f64,
}

pub fn write_leaderboard(path: &Path, entries: &[LeaderboardEntry]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for entry in entries {
        writer
            .serialize(LeaderboardRow {
                learning_rate: entry.hyperparams.learning_rate,
                max_depth: entry.hyperparams.max_depth,
                n_trees: entry.hyperparams.n_trees,
                min_samples_leaf: entry.hyperparams.min_samples_leaf,
                validation_rmse: &entry.validation_rmse,
            })
            .map_err(|e| CliError::Other(format!("encoding leaderboard: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Other(format!("encoding leaderboard: {e}")))?;
    atomic_write(path, &bytes)
}

pub fn write_residual_csvs(
    deciles_path: &Path,
    histogram_path: &Path,
    summary: &ResidualSummary,
) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["decile", "mean_residual"])
        .map_err(|e| CliError::Other(format!("encoding residuals: {e}")))?;
    for (decile, mean) in summary.decile_mean_residuals.iter().enumerate() {
        writer
            .write_record([decile.to_string(), mean.to_string()])
            .map_err(|e| CliError::Other(format!("encoding residuals: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Other(format!("encoding residuals: {e}")))?;
    atomic_write(deciles_path, &bytes)?;

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["bin_left", "bin_right", "count"])
        .map_err(|e| CliError::Other(format!("encoding histogram: {e}")))?;
    for (bin, count) in summary.histogram.counts.iter().enumerate() {
        writer
            .write_record([
                summary.histogram.edges[bin].to_string(),
                summary.histogram.edges[bin + 1].to_string(),
                count.to_string(),
            ])
            .map_err(|e| CliError::Other(format!("encoding histogram: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Other(format!("encoding histogram: {e}")))?;
    atomic_write(histogram_path, &bytes)
}

// ---------------------------------------------------------------------------
// Optimization artifacts.

/// revenue_report.json: the comparison plus the winning policy itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub config_digest: String,
    pub report: RevenueReport,
    pub winner: WinnerSummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WinnerSummary {
    pub kind: String,
    pub params: String,
    pub matrix: Vec<Vec<f64>>,
}

pub fn write_revenue_csv(path: &Path, report: &RevenueReport) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["policy", "total_revenue", "mean_payment"])
        .map_err(|e| CliError::Other(format!("encoding revenue report: {e}")))?;
    for policy in &report.policies {
        writer
            .write_record([
                policy.name.clone(),
                policy.total.to_string(),
                policy.mean_payment.to_string(),
            ])
            .map_err(|e| CliError::Other(format!("encoding revenue report: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Other(format!("encoding revenue report: {e}")))?;
    atomic_write(path, &bytes)
}

#[derive(Debug, Serialize)]
struct AuditRow {
    index: usize,
    kind: &'static str,
    params: String,
    revenue: f64,
    feasible: bool,
}

pub fn write_search_audit(
    path: &Path,
    trail: &[persuade_core::design::EvaluatedCandidate],
) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for (index, entry) in trail.iter().enumerate() {
        writer
            .serialize(AuditRow {
                index,
                kind: entry.candidate.kind.tag(),
                params: entry.candidate.kind.params(),
                revenue: entry.revenue,
                feasible: entry.feasible,
            })
            .map_err(|e| CliError::Other(format!("encoding search audit: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Other(format!("encoding search audit: {e}")))?;
    atomic_write(path, &bytes)
}
