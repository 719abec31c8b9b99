//! Synthetic advertiser population and behavioral auction dataset.
//!
//! Advertisers respond to a signal's face value rather than reasoning
//! through Bayes' rule: the generated bid is the advertiser's industry
//! anchor scaled by the signal's face value and an aggressiveness factor,
//! plus Gaussian noise, clamped to the configured bid range. The rational
//! Bayesian layer lives in [`crate::belief`]; this module is the environment
//! the bid predictor later has to learn.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::auction::{run_auction, AdvertiserId, BidSet};
use crate::belief::{BeliefError, Prior, SignalVocabulary, SignalingPolicy};
use crate::seed::{substream, substream_indexed};

/// Time-of-day buckets on instance context.
pub const TIME_BUCKETS: u8 = 24;
/// Ad categories on instance context.
pub const AD_CATEGORIES: u8 = 10;

/// Budgets below this are re-drawn (truncated normal).
const BUDGET_FLOOR: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MarketError {
    #[error("{field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("instance {auction_id} references unknown advertiser {advertiser}")]
    UnknownAdvertiser {
        auction_id: u64,
        advertiser: AdvertiserId,
    },
    #[error("instance {auction_id} has invalid state {state}")]
    InvalidState { auction_id: u64, state: usize },
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

/// Knobs for population and dataset generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    pub population_size: usize,
    pub auction_count: usize,
    pub participants_per_auction: usize,
    /// Prior over engagement states; length fixes the state count.
    pub prior: Vec<f64>,
    pub budget_mean: f64,
    pub budget_std: f64,
    pub sector_count: usize,
    /// Per-sector valuation anchor; `base_value = sector_anchors[industry]`.
    pub sector_anchors: Vec<f64>,
    /// Standard deviation of the additive bid noise.
    pub noise_scale: f64,
    pub bid_floor: f64,
    pub bid_cap: f64,
    pub seed: u64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            population_size: 1000,
            auction_count: 10_000,
            participants_per_auction: 8,
            prior: alloc::vec![0.3, 0.5, 0.2],
            budget_mean: 10_000.0,
            budget_std: 2_000.0,
            sector_count: 5,
            sector_anchors: alloc::vec![3.0, 4.0, 5.0, 6.0, 7.0],
            noise_scale: 1.0,
            bid_floor: 0.1,
            bid_cap: 20.0,
            seed: 42,
        }
    }
}

impl MarketConfig {
    pub fn validate(&self) -> Result<(), MarketError> {
        let invalid = |field, reason: &str| {
            Err(MarketError::InvalidConfig {
                field,
                reason: String::from(reason),
            })
        };
        if self.population_size == 0 {
            return invalid("population_size", "must be positive");
        }
        if self.auction_count == 0 {
            return invalid("auction_count", "must be positive");
        }
        if self.participants_per_auction < 2 {
            return invalid(
                "participants_per_auction",
                "need at least two bidders per auction",
            );
        }
        if self.participants_per_auction > self.population_size {
            return invalid("participants_per_auction", "exceeds population size");
        }
        if Prior::new(self.prior.clone()).is_err() {
            return invalid("prior", "must be a probability distribution");
        }
        if !self.budget_mean.is_finite() || self.budget_mean < BUDGET_FLOOR {
            return invalid("budget_mean", "must be finite and at least 100");
        }
        if !self.budget_std.is_finite() || self.budget_std < 0.0 {
            return invalid("budget_std", "must be finite and non-negative");
        }
        if self.sector_count == 0 {
            return invalid("sector_count", "must be positive");
        }
        if self.sector_anchors.len() != self.sector_count {
            return invalid("sector_anchors", "length must equal sector_count");
        }
        if self
            .sector_anchors
            .iter()
            .any(|a| !a.is_finite() || *a <= 0.0)
        {
            return invalid("sector_anchors", "must be positive and finite");
        }
        if !self.noise_scale.is_finite() || self.noise_scale < 0.0 {
            return invalid("noise_scale", "must be finite and non-negative");
        }
        if !self.bid_floor.is_finite() || self.bid_floor < 0.0 {
            return invalid("bid_floor", "must be finite and non-negative");
        }
        if !self.bid_cap.is_finite() || self.bid_cap <= self.bid_floor {
            return invalid("bid_cap", "must be finite and above bid_floor");
        }
        Ok(())
    }

    pub fn prior(&self) -> Result<Prior, BeliefError> {
        Prior::new(self.prior.clone())
    }
}

/// One synthetic advertiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvertiserProfile {
    pub id: AdvertiserId,
    pub budget: f64,
    pub industry: usize,
    /// Bidding aggressiveness in [0, 1]; scales bids by 0.8 + 0.4·A.
    pub aggressiveness: f64,
    /// Industry valuation anchor, in currency per unit engagement.
    pub base_value: f64,
}

/// One auction's cast before any bids: who participates, the true state,
/// and nuisance context features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionInstance {
    pub auction_id: u64,
    pub true_state: usize,
    pub time_bucket: u8,
    pub category: u8,
    pub participants: Vec<AdvertiserId>,
}

/// Per-participant slice of a settled auction record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub advertiser_id: AdvertiserId,
    pub budget: f64,
    pub industry: usize,
    pub aggressiveness: f64,
    pub bid: f64,
}

/// A fully settled auction: the unit of the dataset and the ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionRecord {
    pub auction_id: u64,
    pub signal: usize,
    pub true_state: usize,
    pub time_bucket: u8,
    pub category: u8,
    pub participants: Vec<ParticipantRecord>,
    pub winner: AdvertiserId,
    pub payment: f64,
}

impl AuctionRecord {
    pub fn bid_set(&self) -> Result<BidSet, crate::auction::AuctionError> {
        BidSet::new(
            self.participants
                .iter()
                .map(|p| (p.advertiser_id, p.bid))
                .collect(),
        )
    }
}

/// 0.8 + 0.4·A: an advertiser at A = 1 bids 50% more than one at A = 0.
pub fn aggressiveness_factor(aggressiveness: f64) -> f64 {
    0.8 + 0.4 * aggressiveness
}

/// Rational per-state valuation: anchor × engagement multiplier ×
/// aggressiveness factor.
pub fn valuation(
    profile: &AdvertiserProfile,
    state: usize,
    states: &crate::belief::StateSpace,
) -> f64 {
    profile.base_value * states.multiplier(state) * aggressiveness_factor(profile.aggressiveness)
}

/// The whole valuation vector of one advertiser.
pub fn valuation_profile(
    profile: &AdvertiserProfile,
    states: &crate::belief::StateSpace,
) -> crate::belief::ValuationProfile {
    let values = (0..states.len())
        .map(|s| valuation(profile, s, states))
        .collect();
    crate::belief::ValuationProfile::new(values).expect("valuations are non-negative")
}

/// Behavioral bid: the advertiser takes the signal at face value.
pub fn true_bid(
    profile: &AdvertiserProfile,
    face_value: f64,
    noise: f64,
    floor: f64,
    cap: f64,
) -> f64 {
    let raw =
        profile.base_value * face_value * aggressiveness_factor(profile.aggressiveness) + noise;
    raw.clamp(floor, cap)
}

/// Draws the advertiser population from the config's `population` substream.
///
/// Per advertiser, in order: budget (normal, re-drawn below 100),
/// aggressiveness (uniform on [0, 1)), industry (uniform over sectors).
pub fn generate_advertisers(config: &MarketConfig) -> Result<Vec<AdvertiserProfile>, MarketError> {
    config.validate()?;
    let mut rng = substream(config.seed, "population");
    let normal =
        Normal::new(config.budget_mean, config.budget_std).expect("validated budget parameters");
    let mut population = Vec::with_capacity(config.population_size);
    for id in 0..config.population_size {
        let mut budget = BUDGET_FLOOR;
        for _ in 0..64 {
            let draw = normal.sample(&mut rng);
            if draw >= BUDGET_FLOOR {
                budget = draw;
                break;
            }
        }
        let aggressiveness = rng.random_range(0.0..1.0);
        let industry = rng.random_range(0..config.sector_count);
        population.push(AdvertiserProfile {
            id: id as AdvertiserId,
            budget,
            industry,
            aggressiveness,
            base_value: config.sector_anchors[industry],
        });
    }
    Ok(population)
}

/// Draws auction instances (true state, participants, context) from the
/// config's `instances` substream.
pub fn generate_instances(config: &MarketConfig) -> Result<Vec<AuctionInstance>, MarketError> {
    config.validate()?;
    let prior = config.prior()?;
    let mut rng = substream(config.seed, "instances");
    let mut instances = Vec::with_capacity(config.auction_count);
    for auction_id in 0..config.auction_count as u64 {
        let state_draw: f64 = rng.random_range(0.0..1.0);
        let true_state = sample_index(prior.probs(), state_draw);
        let participants: Vec<AdvertiserId> = rand::seq::index::sample(
            &mut rng,
            config.population_size,
            config.participants_per_auction,
        )
        .iter()
        .map(|i| i as AdvertiserId)
        .collect();
        let time_bucket = rng.random_range(0..TIME_BUCKETS);
        let category = rng.random_range(0..AD_CATEGORIES);
        instances.push(AuctionInstance {
            auction_id,
            true_state,
            time_bucket,
            category,
            participants,
        });
    }
    Ok(instances)
}

fn sample_index(probs: &[f64], uniform: f64) -> usize {
    let mut cumulative = 0.0;
    for (index, &p) in probs.iter().enumerate() {
        cumulative += p;
        if uniform < cumulative {
            return index;
        }
    }
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// Settles every instance under the policy: draws the signal from
/// σ(·|θ), generates behavioral bids with per-auction noise substreams,
/// and records the second-price outcome.
pub fn simulate_records(
    config: &MarketConfig,
    vocabulary: &SignalVocabulary,
    policy: &SignalingPolicy,
    population: &[AdvertiserProfile],
    instances: &[AuctionInstance],
) -> Result<Vec<AuctionRecord>, MarketError> {
    config.validate()?;
    let prior = config.prior()?;
    if policy.n_states() != prior.len() {
        return Err(BeliefError::DimensionMismatch {
            expected: prior.len(),
            got: policy.n_states(),
        }
        .into());
    }
    if policy.n_signals() != vocabulary.len() {
        return Err(BeliefError::DimensionMismatch {
            expected: vocabulary.len(),
            got: policy.n_signals(),
        }
        .into());
    }
    let noise = Normal::new(0.0, config.noise_scale).expect("validated noise scale");

    let mut records = Vec::with_capacity(instances.len());
    for instance in instances {
        if instance.true_state >= policy.n_states() {
            return Err(MarketError::InvalidState {
                auction_id: instance.auction_id,
                state: instance.true_state,
            });
        }
        let mut rng = substream_indexed(config.seed, "auction", instance.auction_id);
        let signal_draw: f64 = rng.random_range(0.0..1.0);
        let signal = policy.sample_signal(instance.true_state, signal_draw);
        let face = vocabulary.face_value(signal);

        let mut participants = Vec::with_capacity(instance.participants.len());
        for &advertiser in &instance.participants {
            let profile = population
                .get(advertiser as usize)
                .filter(|p| p.id == advertiser);
            let profile = profile.ok_or(MarketError::UnknownAdvertiser {
                auction_id: instance.auction_id,
                advertiser,
            })?;
            let eps = noise.sample(&mut rng);
            let bid = true_bid(profile, face, eps, config.bid_floor, config.bid_cap);
            participants.push(ParticipantRecord {
                advertiser_id: advertiser,
                budget: profile.budget,
                industry: profile.industry,
                aggressiveness: profile.aggressiveness,
                bid,
            });
        }
        let bids = BidSet::new(
            participants
                .iter()
                .map(|p| (p.advertiser_id, p.bid))
                .collect(),
        )
        .expect("instance invariants give a valid bid set");
        let outcome = run_auction(&bids);
        records.push(AuctionRecord {
            auction_id: instance.auction_id,
            signal,
            true_state: instance.true_state,
            time_bucket: instance.time_bucket,
            category: instance.category,
            participants,
            winner: outcome.winner,
            payment: outcome.payment,
        });
    }
    Ok(records)
}

/// One-call dataset generation: population and instances from the config's
/// substreams, then [`simulate_records`]. Identical output to running the
/// steps separately with the same config.
pub fn simulate_dataset(
    config: &MarketConfig,
    vocabulary: &SignalVocabulary,
    policy: &SignalingPolicy,
) -> Result<(Vec<AdvertiserProfile>, Vec<AuctionRecord>), MarketError> {
    let population = generate_advertisers(config)?;
    let instances = generate_instances(config)?;
    let records = simulate_records(config, vocabulary, policy, &population, &instances)?;
    Ok((population, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::StateSpace;
    use crate::design;
    use alloc::vec;

    fn small_config() -> MarketConfig {
        MarketConfig {
            population_size: 60,
            auction_count: 300,
            participants_per_auction: 5,
            seed: 7,
            ..MarketConfig::default()
        }
    }

    #[test]
    fn default_config_validates() {
        MarketConfig::default().validate().unwrap();
    }

    #[test]
    fn validation_names_fields() {
        let config = MarketConfig {
            prior: vec![0.5, 0.4],
            ..MarketConfig::default()
        };
        match config.validate().unwrap_err() {
            MarketError::InvalidConfig { field, .. } => assert_eq!(field, "prior"),
            other => panic!("unexpected error {other:?}"),
        }

        let config = MarketConfig {
            bid_cap: 0.05,
            ..MarketConfig::default()
        };
        assert!(matches!(
            config.validate().unwrap_err(),
            MarketError::InvalidConfig {
                field: "bid_cap",
                ..
            }
        ));
    }

    #[test]
    fn population_is_deterministic_and_in_range() {
        let config = small_config();
        let a = generate_advertisers(&config).unwrap();
        let b = generate_advertisers(&config).unwrap();
        assert_eq!(a, b);
        for profile in &a {
            assert!(profile.budget >= 100.0);
            assert!((0.0..=1.0).contains(&profile.aggressiveness));
            assert!(profile.industry < config.sector_count);
            assert_eq!(profile.base_value, config.sector_anchors[profile.industry]);
        }
    }

    #[test]
    fn budget_sample_mean_matches_config() {
        let config = MarketConfig {
            population_size: 10_000,
            ..MarketConfig::default()
        };
        let population = generate_advertisers(&config).unwrap();
        let mean = population.iter().map(|p| p.budget).sum::<f64>() / population.len() as f64;
        assert!(
            (mean - config.budget_mean).abs() < 100.0,
            "sample mean {mean}"
        );
    }

    #[test]
    fn valuation_arithmetic() {
        let states = StateSpace::default_three_level();
        let profile = AdvertiserProfile {
            id: 0,
            budget: 1000.0,
            industry: 2,
            aggressiveness: 0.5,
            base_value: 5.0,
        };
        // Medium state has multiplier 1.0 and A = 0.5 gives factor 1.0.
        assert_eq!(valuation(&profile, 1, &states), 5.0);
        assert_eq!(valuation(&profile, 0, &states), 2.5);

        let timid = AdvertiserProfile {
            aggressiveness: 0.0,
            ..profile.clone()
        };
        let bold = AdvertiserProfile {
            aggressiveness: 1.0,
            ..profile
        };
        let ratio = valuation(&bold, 1, &states) / valuation(&timid, 1, &states);
        assert!((ratio - 1.5).abs() < 1e-12);
    }

    #[test]
    fn true_bid_arithmetic_and_clamping() {
        let profile = AdvertiserProfile {
            id: 0,
            budget: 1000.0,
            industry: 0,
            aggressiveness: 0.5,
            base_value: 5.0,
        };
        assert_eq!(true_bid(&profile, 1.0, 0.0, 0.1, 20.0), 5.0);
        assert_eq!(true_bid(&profile, 1.0, -100.0, 0.1, 20.0), 0.1);
        assert_eq!(true_bid(&profile, 1.0, 100.0, 0.1, 20.0), 20.0);
        let low = true_bid(&profile, 1.0, 0.0, 0.0, 1e9);
        let high = true_bid(&profile, 1.8, 0.0, 0.0, 1e9);
        assert!((high / low - 1.8).abs() < 1e-12);
    }

    #[test]
    fn dataset_bids_in_range_and_reproducible() {
        let config = small_config();
        let states = StateSpace::default_three_level();
        let vocabulary = SignalVocabulary::default_three_level();
        let policy = design::full_disclosure(&states, &vocabulary).unwrap();

        let (_, records) = simulate_dataset(&config, &vocabulary, &policy).unwrap();
        assert_eq!(records.len(), config.auction_count);
        for record in &records {
            assert_eq!(record.participants.len(), config.participants_per_auction);
            for p in &record.participants {
                assert!((config.bid_floor..=config.bid_cap).contains(&p.bid));
            }
            // Stored outcome replays exactly.
            let outcome = run_auction(&record.bid_set().unwrap());
            assert_eq!(outcome.winner, record.winner);
            assert_eq!(outcome.payment, record.payment);
            // Full disclosure sends the state-matched signal.
            assert_eq!(record.signal, record.true_state);
        }

        let (_, again) = simulate_dataset(&config, &vocabulary, &policy).unwrap();
        assert_eq!(records, again);
    }

    #[test]
    fn two_step_generation_matches_one_shot() {
        let config = small_config();
        let states = StateSpace::default_three_level();
        let vocabulary = SignalVocabulary::default_three_level();
        let policy = design::no_disclosure(&states, &vocabulary);

        let population = generate_advertisers(&config).unwrap();
        let instances = generate_instances(&config).unwrap();
        let records =
            simulate_records(&config, &vocabulary, &policy, &population, &instances).unwrap();

        let (pop2, records2) = simulate_dataset(&config, &vocabulary, &policy).unwrap();
        assert_eq!(population, pop2);
        assert_eq!(records, records2);
    }

    #[test]
    fn state_frequencies_track_the_prior_at_full_scale() {
        let config = MarketConfig::default();
        let instances = generate_instances(&config).unwrap();
        assert_eq!(instances.len(), 10_000);
        let mut counts = vec![0usize; config.prior.len()];
        for instance in &instances {
            counts[instance.true_state] += 1;
        }
        for (state, &count) in counts.iter().enumerate() {
            let freq = count as f64 / instances.len() as f64;
            assert!(
                (freq - config.prior[state]).abs() <= 0.02,
                "state {state} frequency {freq} vs prior {}",
                config.prior[state]
            );
        }
    }

    #[test]
    fn zero_noise_full_disclosure_is_deterministic_in_features() {
        let config = MarketConfig {
            noise_scale: 0.0,
            ..small_config()
        };
        let states = StateSpace::default_three_level();
        let vocabulary = SignalVocabulary::default_three_level();
        let policy = design::full_disclosure(&states, &vocabulary).unwrap();

        let (_, records) = simulate_dataset(&config, &vocabulary, &policy).unwrap();
        for record in &records {
            let face = vocabulary.face_value(record.signal);
            for p in &record.participants {
                let expected = (config.sector_anchors[p.industry]
                    * face
                    * aggressiveness_factor(p.aggressiveness))
                .clamp(config.bid_floor, config.bid_cap);
                assert_eq!(p.bid, expected);
            }
        }
    }
}
