//! Versioned JSON experiment configuration.
//!
//! Unknown fields are a hard error — a typo in an experiment definition
//! must fail loudly, not silently fall back to a default. The canonical
//! form of a config (defaults materialized, seed override applied) is what
//! gets copied into the output directory and digested into the manifest.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use persuade_core::belief::{Prior, SignalVocabulary, SignalingPolicy, StateSpace};
use persuade_core::design::{self, SearchConfig, SearchMode};
use persuade_core::market::{MarketConfig, MarketError};
use persuade_core::predictor::HyperGrid;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub market: MarketSection,
    #[serde(default)]
    pub states: StatesSection,
    #[serde(default)]
    pub signals: SignalsSection,
    #[serde(default = "default_policies")]
    pub policies: BTreeMap<String, PolicySpec>,
    #[serde(default)]
    pub predictor: PredictorSection,
    #[serde(default)]
    pub search: SearchSection,
}

fn default_output_dir() -> String {
    String::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub population_size: usize,
    pub auction_count: usize,
    pub participants_per_auction: usize,
    pub prior: Vec<f64>,
    pub budget_mean: f64,
    pub budget_std: f64,
    pub sector_count: usize,
    pub sector_anchors: Vec<f64>,
    pub noise_scale: f64,
    pub bid_floor: f64,
    pub bid_cap: f64,
}

impl Default for MarketSection {
    fn default() -> Self {
        let base = MarketConfig::default();
        Self {
            population_size: base.population_size,
            auction_count: base.auction_count,
            participants_per_auction: base.participants_per_auction,
            prior: base.prior,
            budget_mean: base.budget_mean,
            budget_std: base.budget_std,
            sector_count: base.sector_count,
            sector_anchors: base.sector_anchors,
            noise_scale: base.noise_scale,
            bid_floor: base.bid_floor,
            bid_cap: base.bid_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatesSection {
    pub labels: Vec<String>,
    pub multipliers: Vec<f64>,
}

impl Default for StatesSection {
    fn default() -> Self {
        let states = StateSpace::default_three_level();
        Self {
            labels: states.labels().to_vec(),
            multipliers: states.multipliers().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalsSection {
    pub labels: Vec<String>,
    pub face_values: Vec<f64>,
}

impl Default for SignalsSection {
    fn default() -> Self {
        let vocab = SignalVocabulary::default_three_level();
        Self {
            labels: vocab.labels().to_vec(),
            face_values: vocab.face_values().to_vec(),
        }
    }
}

/// How a named policy is constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicySpec {
    Full,
    None,
    Uniform,
    Partial { alpha: f64, beta: f64 },
    Matrix { rows: Vec<Vec<f64>> },
}

fn default_policies() -> BTreeMap<String, PolicySpec> {
    BTreeMap::from([
        (String::from("exploration"), PolicySpec::Uniform),
        (String::from("full"), PolicySpec::Full),
        (String::from("none"), PolicySpec::None),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorSection {
    pub learning_rates: Vec<f64>,
    pub max_depths: Vec<usize>,
    pub n_trees: Vec<usize>,
    pub min_samples_leaf: usize,
}

impl Default for PredictorSection {
    fn default() -> Self {
        let grid = HyperGrid::default();
        Self {
            learning_rates: grid.learning_rates,
            max_depths: grid.max_depths,
            n_trees: grid.n_trees,
            min_samples_leaf: grid.min_samples_leaf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub mode: SearchMode,
    pub resolution: usize,
    pub mc_auctions: usize,
    pub credibility_delta: f64,
    pub credibility: bool,
    /// Defaults to the master seed when omitted.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for SearchSection {
    fn default() -> Self {
        let base = SearchConfig::default();
        Self {
            mode: base.mode,
            resolution: base.resolution,
            mc_auctions: base.mc_auctions,
            credibility_delta: base.credibility_delta,
            credibility: base.credibility,
            seed: None,
        }
    }
}

/// A parsed config with every cross-field rule checked and the core types
/// already constructed.
#[derive(Debug, Clone)]
pub struct ValidatedExperiment {
    pub config: ExperimentConfig,
    pub states: StateSpace,
    pub vocabulary: SignalVocabulary,
    pub prior: Prior,
    pub market: MarketConfig,
    pub grid: HyperGrid,
    pub search: SearchConfig,
    pub policies: BTreeMap<String, SignalingPolicy>,
}

impl ExperimentConfig {
    /// A complete default experiment under one master seed.
    pub fn with_seed(master_seed: u64) -> Self {
        Self {
            version: SCHEMA_VERSION,
            master_seed,
            output_dir: default_output_dir(),
            market: MarketSection::default(),
            states: StatesSection::default(),
            signals: SignalsSection::default(),
            policies: default_policies(),
            predictor: PredictorSection::default(),
            search: SearchSection::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                CliError::MissingInput(path.to_path_buf())
            } else {
                CliError::io(format!("reading config {}", path.display()), e)
            }
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::config(path.display().to_string(), e))
    }

    /// Canonical serialized form: pretty JSON of the parsed config with a
    /// trailing newline. The manifest digest is the SHA-256 of these bytes.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("config serialization cannot fail");
        bytes.push(b'\n');
        bytes
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_bytes()))
    }

    /// Checks every field, builds the core types, and resolves defaults.
    /// Error paths name the offending field, e.g. `market.prior`.
    pub fn validate(&self) -> Result<ValidatedExperiment, CliError> {
        if self.version != SCHEMA_VERSION {
            return Err(CliError::config(
                "version",
                format!(
                    "unsupported schema version {}, expected {SCHEMA_VERSION}",
                    self.version
                ),
            ));
        }
        if self.output_dir.is_empty() {
            return Err(CliError::config("output_dir", "must not be empty"));
        }

        let states = StateSpace::new(self.states.labels.clone(), self.states.multipliers.clone())
            .map_err(|e| CliError::config("states", e))?;
        let vocabulary = SignalVocabulary::new(
            self.signals.labels.clone(),
            self.signals.face_values.clone(),
        )
        .map_err(|e| CliError::config("signals", e))?;

        let market = MarketConfig {
            population_size: self.market.population_size,
            auction_count: self.market.auction_count,
            participants_per_auction: self.market.participants_per_auction,
            prior: self.market.prior.clone(),
            budget_mean: self.market.budget_mean,
            budget_std: self.market.budget_std,
            sector_count: self.market.sector_count,
            sector_anchors: self.market.sector_anchors.clone(),
            noise_scale: self.market.noise_scale,
            bid_floor: self.market.bid_floor,
            bid_cap: self.market.bid_cap,
            seed: self.master_seed,
        };
        market.validate().map_err(|e| match e {
            MarketError::InvalidConfig { field, reason } => {
                CliError::config(format!("market.{field}"), reason)
            }
            other => CliError::config("market", other),
        })?;
        if market.prior.len() != states.len() {
            return Err(CliError::config(
                "market.prior",
                format!(
                    "has {} entries but there are {} states",
                    market.prior.len(),
                    states.len()
                ),
            ));
        }
        let prior = market
            .prior()
            .map_err(|e| CliError::config("market.prior", e))?;

        if self.policies.is_empty() {
            return Err(CliError::config(
                "policies",
                "at least one policy must be defined",
            ));
        }
        let mut policies = BTreeMap::new();
        for (name, spec) in &self.policies {
            let policy = spec
                .build(&states, &vocabulary)
                .map_err(|e| CliError::config(format!("policies.{name}"), e))?;
            policies.insert(name.clone(), policy);
        }

        let predictor = &self.predictor;
        if predictor.learning_rates.is_empty()
            || predictor
                .learning_rates
                .iter()
                .any(|lr| !lr.is_finite() || *lr <= 0.0 || *lr > 1.0)
        {
            return Err(CliError::config(
                "predictor.learning_rates",
                "must be non-empty with every rate in (0, 1]",
            ));
        }
        if predictor.max_depths.is_empty() || predictor.max_depths.contains(&0) {
            return Err(CliError::config(
                "predictor.max_depths",
                "must be non-empty with positive depths",
            ));
        }
        if predictor.n_trees.is_empty() || predictor.n_trees.contains(&0) {
            return Err(CliError::config(
                "predictor.n_trees",
                "must be non-empty with positive tree counts",
            ));
        }
        if predictor.min_samples_leaf == 0 {
            return Err(CliError::config(
                "predictor.min_samples_leaf",
                "must be positive",
            ));
        }
        let grid = HyperGrid {
            learning_rates: predictor.learning_rates.clone(),
            max_depths: predictor.max_depths.clone(),
            n_trees: predictor.n_trees.clone(),
            min_samples_leaf: predictor.min_samples_leaf,
        };

        let section = &self.search;
        if section.resolution < 2 {
            return Err(CliError::config("search.resolution", "must be at least 2"));
        }
        if section.mc_auctions == 0 || section.mc_auctions > market.auction_count {
            return Err(CliError::config(
                "search.mc_auctions",
                format!("must be in 1..={}", market.auction_count),
            ));
        }
        if !section.credibility_delta.is_finite() || section.credibility_delta < 0.0 {
            return Err(CliError::config(
                "search.credibility_delta",
                "must be non-negative",
            ));
        }
        if section.mode == SearchMode::TwoStateGrid && states.len() != 2 {
            return Err(CliError::config(
                "search.mode",
                "two-state-grid requires exactly two states",
            ));
        }
        let search = SearchConfig {
            mode: section.mode,
            resolution: section.resolution,
            mc_auctions: section.mc_auctions,
            credibility_delta: section.credibility_delta,
            credibility: section.credibility,
            seed: section.seed.unwrap_or(self.master_seed),
        };

        Ok(ValidatedExperiment {
            config: self.clone(),
            states,
            vocabulary,
            prior,
            market,
            grid,
            search,
            policies,
        })
    }
}

impl PolicySpec {
    pub fn build(
        &self,
        states: &StateSpace,
        vocabulary: &SignalVocabulary,
    ) -> Result<SignalingPolicy, CliError> {
        let policy = match self {
            PolicySpec::Full => design::full_disclosure(states, vocabulary)
                .map_err(|e| CliError::Other(e.to_string()))?,
            PolicySpec::None => design::no_disclosure(states, vocabulary),
            PolicySpec::Uniform => design::uniform_exploration(states, vocabulary),
            PolicySpec::Partial { alpha, beta } => {
                design::partial_two_state(states, vocabulary, *alpha, *beta)
                    .map_err(|e| CliError::Other(e.to_string()))?
            }
            PolicySpec::Matrix { rows } => SignalingPolicy::from_rows(rows.clone())
                .map_err(|e| CliError::Other(e.to_string()))?,
        };
        policy
            .validate_against(states, vocabulary)
            .map_err(|e| CliError::Other(e.to_string()))?;
        Ok(policy)
    }
}
