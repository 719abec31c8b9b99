//! Platform revenue estimation and predictor diagnostics.
//!
//! Three evaluation routes share one settlement path: exact rational
//! evaluation (posterior-expected valuations, no sampling), behavioral
//! simulation (the market layer), and ML counterfactuals (the trained
//! predictor fed policy-resampled signals). Policy comparisons run on
//! common random numbers: identical instances and identical signal
//! variates, so revenue differences come from the policies alone.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::auction::{run_auction, AuctionError, BidSet};
use crate::belief::{
    bayes_update, expected_valuation, optimal_bid, signal_marginal, BeliefError, Prior,
    SignalingPolicy, StateSpace, ValuationProfile,
};
use crate::market::{AdvertiserProfile, AuctionInstance};
use crate::predictor::{feature_row, GbmModel, PredictorError};
use crate::seed::substream;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("need at least two policies to compare, got {0}")]
    TooFewPolicies(usize),
    #[error("auction count must be positive")]
    ZeroAuctionCount,
    #[error("population is empty")]
    EmptyPopulation,
    #[error("auction {index} has fewer than two bids")]
    DegenerateAuction { index: usize },
    #[error("model expects {expected} features, instance encoding has {got}")]
    FeatureMismatch { expected: usize, got: usize },
    #[error("expected {expected} signal variates, got {got}")]
    VariateCountMismatch { expected: usize, got: usize },
    #[error("instance {auction_id} references unknown advertiser {advertiser}")]
    UnknownAdvertiser { auction_id: u64, advertiser: u32 },
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Auction(#[from] AuctionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    Rational,
    Behavioral,
    MlCounterfactual,
}

/// Exact expected revenue under fully rational bidders: for each signal
/// with positive marginal, every advertiser bids their posterior-expected
/// valuation, the fixed participant set settles at the second-highest bid,
/// and signals are weighted by their marginal probability. No sampling.
pub fn estimate_revenue_rational(
    policy: &SignalingPolicy,
    population: &[ValuationProfile],
    states: &StateSpace,
    prior: &Prior,
) -> Result<f64, EvalError> {
    if population.is_empty() {
        return Err(EvalError::EmptyPopulation);
    }
    for valuations in population {
        if valuations.len() != states.len() {
            return Err(BeliefError::DimensionMismatch {
                expected: states.len(),
                got: valuations.len(),
            }
            .into());
        }
    }
    let marginal = signal_marginal(policy, prior)?;
    let mut revenue = 0.0;
    for (signal, &mass) in marginal.iter().enumerate() {
        if mass <= 0.0 {
            continue;
        }
        let posterior = bayes_update(policy, prior, signal)?;
        let entries = population
            .iter()
            .enumerate()
            .map(|(id, valuations)| {
                let bid = optimal_bid(expected_valuation(&posterior, valuations)?)?;
                Ok((id as u32, bid))
            })
            .collect::<Result<Vec<_>, EvalError>>()?;
        let outcome = run_auction(&BidSet::new(entries)?);
        revenue += mass * outcome.payment;
    }
    Ok(revenue)
}

/// One counterfactually priced auction.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedBids {
    pub auction_id: u64,
    pub signal: usize,
    pub bids: BidSet,
}

/// Total revenue with behavioral bidders: re-simulates the market under
/// the policy and sums the settlement payments. Per-auction substreams
/// make this a common-random-number evaluator — the same seed pairs the
/// noise and signal draws across policies.
pub fn estimate_revenue_behavioral(
    config: &crate::market::MarketConfig,
    vocabulary: &crate::belief::SignalVocabulary,
    policy: &SignalingPolicy,
    population: &[AdvertiserProfile],
    instances: &[AuctionInstance],
) -> Result<f64, crate::market::MarketError> {
    let records =
        crate::market::simulate_records(config, vocabulary, policy, population, instances)?;
    Ok(records.iter().map(|r| r.payment).sum())
}

/// Per-instance uniform variates for paired signal draws across policies.
pub fn signal_variates(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = substream(seed, "signals");
    (0..count).map(|_| rng.random_range(0.0..1.0)).collect()
}

/// Re-signals every instance under the policy and predicts each
/// participant's bid with the trained model.
///
/// `variates` supplies one uniform draw per instance; evaluating several
/// policies on the same variates yields common-random-number comparisons.
pub fn simulate_bids_under_policy(
    model: &GbmModel,
    instances: &[AuctionInstance],
    population: &[AdvertiserProfile],
    policy: &SignalingPolicy,
    variates: &[f64],
    signal_count: usize,
    sector_count: usize,
) -> Result<Vec<PredictedBids>, EvalError> {
    if variates.len() != instances.len() {
        return Err(EvalError::VariateCountMismatch {
            expected: instances.len(),
            got: variates.len(),
        });
    }
    let encoded_width = signal_count + sector_count + 4;
    if model.n_features() != encoded_width {
        return Err(EvalError::FeatureMismatch {
            expected: model.n_features(),
            got: encoded_width,
        });
    }
    let mut out = Vec::with_capacity(instances.len());
    for (instance, &variate) in instances.iter().zip(variates) {
        let signal = policy.sample_signal(instance.true_state, variate);
        let mut entries = Vec::with_capacity(instance.participants.len());
        for &advertiser in &instance.participants {
            let profile = population
                .get(advertiser as usize)
                .filter(|p| p.id == advertiser);
            let profile = profile.ok_or(EvalError::UnknownAdvertiser {
                auction_id: instance.auction_id,
                advertiser,
            })?;
            let row = feature_row(
                signal,
                profile.budget,
                profile.industry,
                profile.aggressiveness,
                instance.time_bucket,
                instance.category,
                signal_count,
                sector_count,
            );
            entries.push((advertiser, model.predict_row(&row)?));
        }
        out.push(PredictedBids {
            auction_id: instance.auction_id,
            signal,
            bids: BidSet::new(entries)?,
        });
    }
    Ok(out)
}

/// Total revenue over predicted auctions: the sum of second-highest bids.
pub fn estimate_revenue_mc(bid_sets: &[PredictedBids]) -> Result<f64, EvalError> {
    let mut total = 0.0;
    for (index, predicted) in bid_sets.iter().enumerate() {
        if predicted.bids.len() < 2 {
            return Err(EvalError::DegenerateAuction { index });
        }
        total += run_auction(&predicted.bids).payment;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRevenue {
    pub name: String,
    pub total: f64,
    pub mean_payment: f64,
}

/// Percentage revenue change from `baseline` to `policy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevenueIncrease {
    pub baseline: String,
    pub policy: String,
    /// `None` when the baseline total is zero and the ratio is undefined.
    pub percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevenueReport {
    pub mode: EvalMode,
    pub auction_count: usize,
    pub seed: u64,
    pub policies: Vec<PolicyRevenue>,
    pub increases: Vec<RevenueIncrease>,
}

/// ((to − from) / from) × 100.
pub fn increase_percent(from_total: f64, to_total: f64) -> Option<f64> {
    if from_total == 0.0 {
        None
    } else {
        Some((to_total - from_total) / from_total * 100.0)
    }
}

/// Evaluates every named policy with the supplied evaluator (which must
/// embed the shared instances and variates) and reports totals, mean
/// payments, and all pairwise increases.
pub fn compare_policies<F>(
    policies: &[(String, SignalingPolicy)],
    mut evaluator: F,
    mode: EvalMode,
    auction_count: usize,
    seed: u64,
) -> Result<RevenueReport, EvalError>
where
    F: FnMut(&SignalingPolicy) -> Result<f64, EvalError>,
{
    if policies.len() < 2 {
        return Err(EvalError::TooFewPolicies(policies.len()));
    }
    if auction_count == 0 {
        return Err(EvalError::ZeroAuctionCount);
    }
    let mut totals = Vec::with_capacity(policies.len());
    for (name, policy) in policies {
        let total = evaluator(policy)?;
        totals.push(PolicyRevenue {
            name: name.clone(),
            total,
            mean_payment: total / auction_count as f64,
        });
    }
    let mut increases = Vec::new();
    for baseline in &totals {
        for other in &totals {
            if baseline.name == other.name {
                continue;
            }
            increases.push(RevenueIncrease {
                baseline: baseline.name.clone(),
                policy: other.name.clone(),
                percent: increase_percent(baseline.total, other.total),
            });
        }
    }
    Ok(RevenueReport {
        mode,
        auction_count,
        seed,
        policies: totals,
        increases,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Bin edges, one more than counts; bins are left-closed.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Residual diagnostics for a trained model on held-out data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    /// Mean residual per decile of the predicted bid (ascending).
    pub decile_mean_residuals: Vec<f64>,
    pub histogram: Histogram,
    /// Share of residuals with |r| > 3·std.
    pub outlier_share: f64,
}

const HISTOGRAM_BINS: usize = 20;

/// Residuals are actual − predicted. Deciles are contiguous chunks of the
/// test rows ordered by predicted bid, so a flat decile profile indicates
/// no systematic bias across the prediction range.
pub fn residual_analysis(
    model: &GbmModel,
    test: &crate::predictor::Dataset,
) -> Result<ResidualSummary, EvalError> {
    if test.n_rows() == 0 {
        return Err(PredictorError::EmptyInput.into());
    }
    let predicted = model.predict(&test.features)?;
    let residuals: Vec<f64> = test
        .targets
        .iter()
        .zip(&predicted)
        .map(|(a, p)| a - p)
        .collect();
    let n = residuals.len();
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let variance = residuals
        .iter()
        .map(|r| (r - mean) * (r - mean))
        .sum::<f64>()
        / n as f64;
    let std = libm::sqrt(variance);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| predicted[a].total_cmp(&predicted[b]).then(a.cmp(&b)));
    let chunks = n.min(10);
    let base = n / chunks;
    let remainder = n % chunks;
    let mut decile_mean_residuals = Vec::with_capacity(chunks);
    let mut cursor = 0usize;
    for chunk in 0..chunks {
        let size = base + usize::from(chunk < remainder);
        let slice = &order[cursor..cursor + size];
        decile_mean_residuals.push(slice.iter().map(|&i| residuals[i]).sum::<f64>() / size as f64);
        cursor += size;
    }

    let lo = residuals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    };
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let edges: Vec<f64> = (0..=HISTOGRAM_BINS)
        .map(|i| lo + width * i as f64)
        .collect();
    let mut counts = alloc::vec![0u64; HISTOGRAM_BINS];
    for &r in &residuals {
        let bin = (((r - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
        counts[bin] += 1;
    }

    let outliers = residuals.iter().filter(|r| r.abs() > 3.0 * std).count();
    Ok(ResidualSummary {
        count: n,
        mean,
        std,
        decile_mean_residuals,
        histogram: Histogram { edges, counts },
        outlier_share: if std > 0.0 {
            outliers as f64 / n as f64
        } else {
            0.0
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::SignalVocabulary;
    use crate::design;
    use crate::market::{self, MarketConfig};
    use crate::predictor::{build_features, train_gbm, Hyperparams};
    use alloc::string::ToString;
    use alloc::vec;

    fn pooling_oracle() -> (StateSpace, SignalVocabulary, Prior, Vec<ValuationProfile>) {
        let states =
            StateSpace::new(vec!["low".to_string(), "high".to_string()], vec![1.0, 2.0]).unwrap();
        let vocab = SignalVocabulary::new(vec!["s0".to_string(), "s1".to_string()], vec![1.0, 2.0])
            .unwrap();
        let prior = Prior::new(vec![0.5, 0.5]).unwrap();
        let population = vec![
            ValuationProfile::new(vec![1.0, 3.0]).unwrap(),
            ValuationProfile::new(vec![2.0, 2.0]).unwrap(),
        ];
        (states, vocab, prior, population)
    }

    #[test]
    fn pooling_oracle_rational_revenues() {
        let (states, vocab, prior, population) = pooling_oracle();
        let full = design::full_disclosure(&states, &vocab).unwrap();
        let none = design::no_disclosure(&states, &vocab);
        let r_full = estimate_revenue_rational(&full, &population, &states, &prior).unwrap();
        let r_none = estimate_revenue_rational(&none, &population, &states, &prior).unwrap();
        assert_eq!(r_full, 1.5);
        assert_eq!(r_none, 2.0);
    }

    #[test]
    fn single_advertiser_earns_nothing() {
        let (states, vocab, prior, population) = pooling_oracle();
        let lonely = &population[..1];
        for policy in [
            design::full_disclosure(&states, &vocab).unwrap(),
            design::no_disclosure(&states, &vocab),
        ] {
            assert_eq!(
                estimate_revenue_rational(&policy, lonely, &states, &prior).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn rational_revenue_invariant_under_signal_relabeling() {
        let (states, vocab, prior, population) = pooling_oracle();
        let policy = design::partial_two_state(&states, &vocab, 0.7, 0.2).unwrap();
        let relabeled = SignalingPolicy::from_rows(
            policy
                .rows()
                .iter()
                .map(|row| vec![row[1], row[0]])
                .collect(),
        )
        .unwrap();
        let a = estimate_revenue_rational(&policy, &population, &states, &prior).unwrap();
        let b = estimate_revenue_rational(&relabeled, &population, &states, &prior).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn increase_percent_formula() {
        let percent = increase_percent(9190.47, 10274.72).unwrap();
        assert!((percent - 11.80).abs() < 0.005, "got {percent}");
        assert_eq!(increase_percent(0.0, 5.0), None);
        assert_eq!(increase_percent(4.0, 4.0), Some(0.0));
    }

    #[test]
    fn compare_policies_reports_pairwise_increases() {
        let (states, vocab, prior, population) = pooling_oracle();
        let full = design::full_disclosure(&states, &vocab).unwrap();
        let none = design::no_disclosure(&states, &vocab);
        let named = vec![("full".to_string(), full), ("none".to_string(), none)];
        let report = compare_policies(
            &named,
            |policy| estimate_revenue_rational(policy, &population, &states, &prior),
            EvalMode::Rational,
            1,
            7,
        )
        .unwrap();
        assert_eq!(report.policies.len(), 2);
        assert_eq!(report.increases.len(), 2);
        for increase in &report.increases {
            let from = report
                .policies
                .iter()
                .find(|p| p.name == increase.baseline)
                .unwrap();
            let to = report
                .policies
                .iter()
                .find(|p| p.name == increase.policy)
                .unwrap();
            let recomputed = increase_percent(from.total, to.total);
            assert_eq!(increase.percent, recomputed);
        }

        // Identical policies yield exactly zero increase.
        let full2 = design::full_disclosure(&states, &vocab).unwrap();
        let named = vec![("a".to_string(), full2.clone()), ("b".to_string(), full2)];
        let report = compare_policies(
            &named,
            |policy| estimate_revenue_rational(policy, &population, &states, &prior),
            EvalMode::Rational,
            1,
            7,
        )
        .unwrap();
        assert_eq!(report.increases[0].percent, Some(0.0));

        assert!(matches!(
            compare_policies(&named[..1], |_| Ok(0.0), EvalMode::Rational, 1, 7),
            Err(EvalError::TooFewPolicies(1))
        ));
    }

    fn trained_market() -> (
        MarketConfig,
        StateSpace,
        SignalVocabulary,
        Vec<AdvertiserProfile>,
        Vec<AuctionInstance>,
        GbmModel,
    ) {
        let config = MarketConfig {
            population_size: 80,
            auction_count: 400,
            participants_per_auction: 5,
            seed: 23,
            ..MarketConfig::default()
        };
        let states = StateSpace::default_three_level();
        let vocab = SignalVocabulary::default_three_level();
        let explore = design::uniform_exploration(&states, &vocab);
        let population = market::generate_advertisers(&config).unwrap();
        let instances = market::generate_instances(&config).unwrap();
        let records =
            market::simulate_records(&config, &vocab, &explore, &population, &instances).unwrap();
        let data = build_features(&records, vocab.len(), config.sector_count).unwrap();
        let hp = Hyperparams {
            n_trees: 60,
            ..Hyperparams::default()
        };
        let model = train_gbm(&data, &hp, (config.bid_floor, config.bid_cap)).unwrap();
        (config, states, vocab, population, instances, model)
    }

    #[test]
    fn counterfactual_bids_follow_the_policy() {
        let (config, states, vocab, population, instances, model) = trained_market();
        let full = design::full_disclosure(&states, &vocab).unwrap();
        let variates = signal_variates(config.seed, instances.len());
        let predicted = simulate_bids_under_policy(
            &model,
            &instances,
            &population,
            &full,
            &variates,
            vocab.len(),
            config.sector_count,
        )
        .unwrap();
        assert_eq!(predicted.len(), instances.len());
        for (p, instance) in predicted.iter().zip(&instances) {
            // Full disclosure re-announces the true state.
            assert_eq!(p.signal, instance.true_state);
            assert_eq!(p.bids.len(), instance.participants.len());
        }

        // Identical variates → identical bids.
        let again = simulate_bids_under_policy(
            &model,
            &instances,
            &population,
            &full,
            &variates,
            vocab.len(),
            config.sector_count,
        )
        .unwrap();
        assert_eq!(predicted, again);

        let total = estimate_revenue_mc(&predicted).unwrap();
        assert!(total.is_finite() && total > 0.0);
        assert!(total <= config.bid_cap * instances.len() as f64);
    }

    #[test]
    fn behavioral_evaluator_is_paired_across_policies() {
        let config = MarketConfig {
            population_size: 50,
            auction_count: 200,
            participants_per_auction: 4,
            seed: 31,
            ..MarketConfig::default()
        };
        let states = StateSpace::default_three_level();
        let vocab = SignalVocabulary::default_three_level();
        let population = market::generate_advertisers(&config).unwrap();
        let instances = market::generate_instances(&config).unwrap();

        let full = design::full_disclosure(&states, &vocab).unwrap();
        let a =
            estimate_revenue_behavioral(&config, &vocab, &full, &population, &instances).unwrap();
        let b =
            estimate_revenue_behavioral(&config, &vocab, &full, &population, &instances).unwrap();
        assert_eq!(a, b, "same seed must give identical totals");
        assert!(a > 0.0 && a <= config.bid_cap * instances.len() as f64);

        // Identical policies expressed differently still pair exactly.
        let as_matrix = SignalingPolicy::from_rows(full.rows().to_vec()).unwrap();
        let c = estimate_revenue_behavioral(&config, &vocab, &as_matrix, &population, &instances)
            .unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn constant_model_pays_that_constant_everywhere() {
        let (config, states, vocab, population, instances, _) = trained_market();
        // Zero-tree model trained on a constant target predicts it exactly.
        let constant = 4.0;
        let columns = crate::predictor::feature_columns(vocab.len(), config.sector_count);
        let width = columns.len();
        let dataset = crate::predictor::Dataset {
            features: crate::predictor::FeatureMatrix::new(columns, 2, alloc::vec![0.0; 2 * width])
                .unwrap(),
            targets: vec![constant, constant],
            groups: vec![0, 1],
        };
        let hp = Hyperparams {
            n_trees: 0,
            ..Hyperparams::default()
        };
        let model = crate::predictor::train_gbm(&dataset, &hp, (0.1, 20.0)).unwrap();

        let policy = design::no_disclosure(&states, &vocab);
        let variates = signal_variates(1, instances.len());
        let predicted = simulate_bids_under_policy(
            &model,
            &instances,
            &population,
            &policy,
            &variates,
            vocab.len(),
            config.sector_count,
        )
        .unwrap();
        for auction in &predicted {
            assert_eq!(run_auction(&auction.bids).payment, constant);
        }
        let total = estimate_revenue_mc(&predicted).unwrap();
        assert_eq!(total, constant * instances.len() as f64);
    }

    #[test]
    fn mc_revenue_is_sum_of_settlement_payments() {
        let bids = |values: &[f64]| {
            BidSet::new(
                values
                    .iter()
                    .enumerate()
                    .map(|(i, &b)| (i as u32, b))
                    .collect(),
            )
            .unwrap()
        };
        let sets = vec![
            PredictedBids {
                auction_id: 0,
                signal: 0,
                bids: bids(&[5.0, 3.0]),
            },
            PredictedBids {
                auction_id: 1,
                signal: 1,
                bids: bids(&[2.0, 4.0, 1.0]),
            },
        ];
        assert_eq!(estimate_revenue_mc(&sets).unwrap(), 3.0 + 2.0);

        let degenerate = vec![PredictedBids {
            auction_id: 0,
            signal: 0,
            bids: bids(&[1.0]),
        }];
        assert!(matches!(
            estimate_revenue_mc(&degenerate),
            Err(EvalError::DegenerateAuction { index: 0 })
        ));
    }

    #[test]
    fn perfect_model_gives_zero_residual_summary() {
        // A constant-target dataset is learned exactly by the mean.
        let records = {
            let config = MarketConfig {
                population_size: 10,
                auction_count: 30,
                participants_per_auction: 3,
                noise_scale: 0.0,
                seed: 5,
                ..MarketConfig::default()
            };
            let states = StateSpace::default_three_level();
            let vocab = SignalVocabulary::default_three_level();
            let policy = design::no_disclosure(&states, &vocab);
            market::simulate_dataset(&config, &vocab, &policy)
                .unwrap()
                .1
        };
        let data = build_features(&records, 3, 5).unwrap();
        let hp = Hyperparams {
            n_trees: 80,
            min_samples_leaf: 1,
            ..Hyperparams::default()
        };
        let model = train_gbm(&data, &hp, (0.1, 20.0)).unwrap();
        let summary = residual_analysis(&model, &data).unwrap();
        assert_eq!(summary.count, data.n_rows());
        assert!(summary.mean.abs() < 0.05);
        assert_eq!(
            summary.histogram.counts.iter().sum::<u64>(),
            data.n_rows() as u64
        );
        assert_eq!(summary.decile_mean_residuals.len(), 10);
        for decile in &summary.decile_mean_residuals {
            assert!(decile.abs() < 0.2, "decile bias {decile}");
        }
    }
}
