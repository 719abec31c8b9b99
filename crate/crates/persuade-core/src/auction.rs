//! Sealed-bid second-price auction settlement and payment statistics.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use serde::Serialize;

pub type AdvertiserId = u32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AuctionError {
    #[error("bid set must contain at least one bid")]
    EmptyBidSet,
    #[error("duplicate advertiser id {0} in bid set")]
    DuplicateAdvertiser(AdvertiserId),
    #[error("bid {bid} from advertiser {id} must be non-negative and finite")]
    InvalidBid { id: AdvertiserId, bid: f64 },
    #[error("input is empty")]
    EmptyInput,
    #[error("auction {index} has fewer than two bids")]
    DegenerateAuction { index: usize },
}

/// One auction's sealed bids: unique advertiser ids with non-negative bids.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BidSet {
    entries: Vec<(AdvertiserId, f64)>,
}

impl BidSet {
    pub fn new(entries: Vec<(AdvertiserId, f64)>) -> Result<Self, AuctionError> {
        if entries.is_empty() {
            return Err(AuctionError::EmptyBidSet);
        }
        let mut seen = BTreeSet::new();
        for &(id, bid) in &entries {
            if !seen.insert(id) {
                return Err(AuctionError::DuplicateAdvertiser(id));
            }
            if !bid.is_finite() || bid < 0.0 {
                return Err(AuctionError::InvalidBid { id, bid });
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(AdvertiserId, f64)] {
        &self.entries
    }
}

/// Settled auction: who won, what they pay, and the second-highest bid.
///
/// `win_flags` lines up with the bid set's entry order and has exactly one
/// `true`. A single-bidder auction pays zero (no reserve price).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuctionOutcome {
    pub winner: AdvertiserId,
    pub payment: f64,
    pub win_flags: Vec<bool>,
    pub second_highest: f64,
}

/// Settles a second-price auction: the highest bid wins and pays the
/// highest remaining bid. Ties go to the lowest advertiser id so outcomes
/// are reproducible under fixed seeds.
pub fn run_auction(bids: &BidSet) -> AuctionOutcome {
    let entries = bids.entries();
    let mut winner_pos = 0;
    for (pos, &(id, bid)) in entries.iter().enumerate().skip(1) {
        let (best_id, best_bid) = entries[winner_pos];
        if bid > best_bid || (bid == best_bid && id < best_id) {
            winner_pos = pos;
        }
    }
    let second_highest = entries
        .iter()
        .enumerate()
        .filter(|&(pos, _)| pos != winner_pos)
        .map(|(_, &(_, bid))| bid)
        .fold(0.0f64, f64::max);
    let mut win_flags = alloc::vec![false; entries.len()];
    win_flags[winner_pos] = true;
    AuctionOutcome {
        winner: entries[winner_pos].0,
        payment: second_highest,
        win_flags,
        second_highest,
    }
}

/// Monte Carlo estimate of the expected second-highest bid: the mean
/// settlement payment over sampled auctions.
pub fn expected_second_highest(samples: &[BidSet]) -> Result<f64, AuctionError> {
    if samples.is_empty() {
        return Err(AuctionError::EmptyInput);
    }
    let mut total = 0.0;
    for (index, sample) in samples.iter().enumerate() {
        if sample.len() < 2 {
            return Err(AuctionError::DegenerateAuction { index });
        }
        total += run_auction(sample).payment;
    }
    Ok(total / samples.len() as f64)
}

/// Empirical CDF over observed bids, as a right-continuous step function.
#[derive(Debug, Clone, PartialEq)]
pub struct BidCdf {
    sorted: Vec<f64>,
}

impl BidCdf {
    /// Fraction of observed bids ≤ `bid`.
    pub fn eval(&self, bid: f64) -> f64 {
        let count = self.sorted.partition_point(|&x| x <= bid);
        count as f64 / self.sorted.len() as f64
    }

    /// The underlying step points: sorted (bid, F(bid)) pairs.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(move |(i, &bid)| (bid, (i + 1) as f64 / n))
    }
}

pub fn empirical_bid_cdf(bids: &[f64]) -> Result<BidCdf, AuctionError> {
    if bids.is_empty() {
        return Err(AuctionError::EmptyInput);
    }
    let mut sorted = bids.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(BidCdf { sorted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn bidset(pairs: &[(AdvertiserId, f64)]) -> BidSet {
        BidSet::new(pairs.to_vec()).unwrap()
    }

    #[test]
    fn textbook_second_price() {
        let outcome = run_auction(&bidset(&[(0, 5.0), (1, 3.0), (2, 2.0)]));
        assert_eq!(outcome.winner, 0);
        assert_eq!(outcome.payment, 3.0);
        assert_eq!(outcome.win_flags, vec![true, false, false]);
    }

    #[test]
    fn tie_goes_to_lowest_id() {
        let outcome = run_auction(&bidset(&[(1, 4.0), (0, 4.0)]));
        assert_eq!(outcome.winner, 0);
        assert_eq!(outcome.payment, 4.0);
    }

    #[test]
    fn single_bidder_pays_zero() {
        let outcome = run_auction(&bidset(&[(0, 7.0)]));
        assert_eq!(outcome.winner, 0);
        assert_eq!(outcome.payment, 0.0);
    }

    #[test]
    fn bid_set_validation() {
        assert_eq!(BidSet::new(vec![]).unwrap_err(), AuctionError::EmptyBidSet);
        assert_eq!(
            BidSet::new(vec![(3, 1.0), (3, 2.0)]).unwrap_err(),
            AuctionError::DuplicateAdvertiser(3),
        );
        assert!(matches!(
            BidSet::new(vec![(0, -1.0)]).unwrap_err(),
            AuctionError::InvalidBid { id: 0, .. }
        ));
    }

    #[test]
    fn expected_second_highest_cases() {
        assert_eq!(
            expected_second_highest(&[bidset(&[(0, 5.0), (1, 3.0)])]).unwrap(),
            3.0
        );
        let samples = [bidset(&[(0, 5.0), (1, 3.0)]), bidset(&[(0, 1.5), (1, 1.0)])];
        assert_eq!(expected_second_highest(&samples).unwrap(), 2.0);
        let identical = [bidset(&[(0, 4.0), (1, 4.0), (2, 4.0)])];
        assert_eq!(expected_second_highest(&identical).unwrap(), 4.0);

        assert_eq!(
            expected_second_highest(&[]).unwrap_err(),
            AuctionError::EmptyInput
        );
        assert_eq!(
            expected_second_highest(&[bidset(&[(0, 1.0)])]).unwrap_err(),
            AuctionError::DegenerateAuction { index: 0 },
        );
    }

    #[test]
    fn expected_second_highest_matches_independent_sort_oracle() {
        // Oracle: sort each sample descending and average the second
        // entries, sidestepping run_auction entirely.
        let mut rng_state = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 * 10.0
        };
        for _ in 0..50 {
            let n = 2 + (next() as usize) % 5;
            let samples: Vec<BidSet> = (0..4)
                .map(|_| BidSet::new((0..n).map(|i| (i as u32, next())).collect()).unwrap())
                .collect();
            let oracle = samples
                .iter()
                .map(|s| {
                    let mut bids: Vec<f64> = s.entries().iter().map(|&(_, b)| b).collect();
                    bids.sort_by(|a, b| b.total_cmp(a));
                    bids[1]
                })
                .sum::<f64>()
                / samples.len() as f64;
            assert_eq!(expected_second_highest(&samples).unwrap(), oracle);
        }
    }

    #[test]
    fn cdf_fixture() {
        let cdf = empirical_bid_cdf(&[1.0, 2.0, 3.0]).unwrap();
        assert!((cdf.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(cdf.eval(0.5), 0.0);
        assert_eq!(cdf.eval(3.0), 1.0);
        assert_eq!(cdf.eval(10.0), 1.0);
    }

    proptest! {
        #[test]
        fn payment_never_exceeds_winning_bid(
            bids in proptest::collection::vec(0.0f64..100.0, 1..12)
        ) {
            let set = BidSet::new(
                bids.iter().copied().enumerate().map(|(i, b)| (i as u32, b)).collect()
            ).unwrap();
            let outcome = run_auction(&set);
            let winning_bid = set.entries()[outcome.win_flags.iter().position(|&w| w).unwrap()].1;
            prop_assert!(outcome.payment <= winning_bid);
            prop_assert_eq!(outcome.win_flags.iter().filter(|&&w| w).count(), 1);
        }

        #[test]
        fn truthful_bidding_is_dominant(
            opponent_bids in proptest::collection::vec(0.0f64..10.0, 1..4),
            valuation in 0.0f64..10.0,
            deviation in 0.0f64..10.0,
        ) {
            // Utility from bidding the true valuation is never beaten by any
            // deviation, holding opponents fixed.
            let utility = |own_bid: f64| {
                let mut entries = vec![(0u32, own_bid)];
                entries.extend(
                    opponent_bids.iter().copied().enumerate().map(|(i, b)| (i as u32 + 1, b)),
                );
                let outcome = run_auction(&BidSet::new(entries).unwrap());
                if outcome.winner == 0 { valuation - outcome.payment } else { 0.0 }
            };
            prop_assert!(utility(deviation) <= utility(valuation) + 1e-12);
        }

        #[test]
        fn cdf_is_monotone(
            bids in proptest::collection::vec(0.0f64..50.0, 1..40),
            queries in proptest::collection::vec(-1.0f64..60.0, 2..10),
        ) {
            let cdf = empirical_bid_cdf(&bids).unwrap();
            let mut sorted_queries = queries;
            sorted_queries.sort_by(f64::total_cmp);
            let mut prev = 0.0;
            for &q in &sorted_queries {
                let f = cdf.eval(q);
                prop_assert!((0.0..=1.0).contains(&f));
                prop_assert!(f >= prev);
                prev = f;
            }
        }
    }
}
