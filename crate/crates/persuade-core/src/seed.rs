//! Keyed derivation of named RNG substreams from a master seed.
//!
//! Every pipeline stage draws from its own substream, so adding a stage or
//! reordering draws in one stage never perturbs another. Substream seeds
//! are SHA-256 digests of `(master seed, label[, index])`, which also keeps
//! per-auction streams independent: auctions can be generated in any order
//! (or in parallel) with output identical to the sequential schedule.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// RNG for the named substream of a master seed.
pub fn substream(master: u64, label: &str) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    ChaCha12Rng::from_seed(hasher.finalize().into())
}

/// RNG for one element of an indexed substream family, e.g. per-auction
/// noise streams.
pub fn substream_indexed(master: u64, label: &str, index: u64) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.update(index.to_le_bytes());
    ChaCha12Rng::from_seed(hasher.finalize().into())
}
