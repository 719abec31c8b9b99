//! Bayesian-persuasion ad auction toolkit.
//!
//! A platform privately observes a user-engagement state, commits to a
//! signaling policy over a fixed signal vocabulary, and runs sealed-bid
//! second-price auctions among advertisers who update beliefs from the
//! signal. This crate houses the full pipeline as pure, deterministic
//! building blocks:
//!
//! - [`belief`] — state spaces, priors, signaling policies, Bayes updates,
//!   expected valuations, and dominant-strategy bids.
//! - [`auction`] — second-price settlement and order-statistic estimators.
//! - [`market`] — synthetic advertiser populations and behaviorally
//!   generated auction datasets.
//! - [`design`] — canonical policies (full / no / partial disclosure) and
//!   revenue-maximizing policy search.
//! - [`predictor`] — a gradient-boosted regression-tree bid predictor with
//!   splitting, tuning, and regression metrics.
//! - [`eval`] — revenue estimation under rational, behavioral, or learned
//!   bidders, policy comparison, and residual diagnostics.
//! - [`ledger`] — an append-only hash-chained log of bids and outcomes.
//!
//! Everything is `no_std` + `alloc`; file formats and the CLI live in the
//! companion `persuade-cli` crate. All randomness flows through explicit
//! seeds (see [`seed`]) so identical inputs reproduce identical outputs
//! bit for bit.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod auction;
pub mod belief;
pub mod design;
pub mod eval;
pub mod ledger;
pub mod market;
pub mod predictor;
pub mod seed;

pub use auction::{run_auction, AuctionOutcome, BidSet};
pub use belief::{
    bayes_update, expected_valuation, optimal_bid, signal_marginal, Posterior, Prior,
    SignalVocabulary, SignalingPolicy, StateSpace, ValuationProfile,
};
pub use design::{optimize_policy, PolicyCandidate, SearchConfig, SearchMode};
pub use ledger::{Ledger, LedgerEntry, LedgerRecord};
pub use market::{AdvertiserProfile, AuctionInstance, AuctionRecord, MarketConfig};
pub use predictor::{GbmModel, Hyperparams};
