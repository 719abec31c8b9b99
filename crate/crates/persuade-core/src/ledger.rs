//! Append-only hash-chained log of bids and auction outcomes.
//!
//! Each entry commits to its sequence number, the previous entry's hash,
//! and a canonical serialization of the public auction record, so any
//! retroactive edit changes every later hash. The log is transparency
//! plumbing, not a distributed chain: single writer, no consensus, and
//! truncating a suffix is undetectable without an external head anchor.
//!
//! True engagement states never enter the ledger; they are platform-private
//! and live only in the experiment's dataset files.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::auction::{run_auction, AdvertiserId, BidSet};
use crate::market::AuctionRecord;

pub type EntryHash = [u8; 32];

/// Hash of the fixed genesis anchor string.
pub fn genesis_hash() -> EntryHash {
    Sha256::digest(b"persuade-auction-genesis").into()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LedgerError {
    #[error("record {auction_id} contains a non-finite number and cannot be serialized")]
    SerializationFailure { auction_id: u64 },
    #[error("record {auction_id} holds an invalid bid set: {reason}")]
    InvalidRecord { auction_id: u64, reason: String },
    #[error("replayed outcome for auction {auction_id} does not match the stored outcome")]
    OutcomeMismatch { auction_id: u64 },
}

/// First entry at which chain verification fails.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainFault {
    #[error("entry {index}: sequence number {found} breaks contiguity")]
    Sequence { index: usize, found: u64 },
    #[error("entry {index}: previous-hash link does not match")]
    Link { index: usize },
    #[error("entry {index}: stored hash does not match the recomputed hash")]
    Hash { index: usize },
    #[error("entry {index}: record is not canonically serializable")]
    Record { index: usize },
}

impl ChainFault {
    pub fn index(&self) -> usize {
        match self {
            ChainFault::Sequence { index, .. }
            | ChainFault::Link { index }
            | ChainFault::Hash { index }
            | ChainFault::Record { index } => *index,
        }
    }
}

/// The publicly recorded slice of an auction: signal, bids, and outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerRecord {
    pub auction_id: u64,
    pub signal: usize,
    pub bids: Vec<LedgerBid>,
    pub winner: AdvertiserId,
    pub payment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerBid {
    pub advertiser_id: AdvertiserId,
    pub bid: f64,
}

impl From<&AuctionRecord> for LedgerRecord {
    fn from(record: &AuctionRecord) -> Self {
        LedgerRecord {
            auction_id: record.auction_id,
            signal: record.signal,
            bids: record
                .participants
                .iter()
                .map(|p| LedgerBid {
                    advertiser_id: p.advertiser_id,
                    bid: p.bid,
                })
                .collect(),
            winner: record.winner,
            payment: record.payment,
        }
    }
}

impl LedgerRecord {
    fn bid_set(&self) -> Result<BidSet, LedgerError> {
        BidSet::new(self.bids.iter().map(|b| (b.advertiser_id, b.bid)).collect()).map_err(|e| {
            LedgerError::InvalidRecord {
                auction_id: self.auction_id,
                reason: alloc::format!("{e}"),
            }
        })
    }
}

/// Canonical bytes of a record: a JSON object with fixed field order and
/// numbers rendered as their shortest round-trip decimals. Injective over
/// schema-valid records, so the entry hash commits to the exact contents.
pub fn canonical_record_bytes(record: &LedgerRecord) -> Result<Vec<u8>, LedgerError> {
    use core::fmt::Write;

    let fail = || LedgerError::SerializationFailure {
        auction_id: record.auction_id,
    };
    if !record.payment.is_finite() || record.bids.iter().any(|b| !b.bid.is_finite()) {
        return Err(fail());
    }
    let mut out = String::new();
    write!(
        out,
        "{{\"auction_id\":{},\"signal\":{},\"bids\":[",
        record.auction_id, record.signal
    )
    .map_err(|_| fail())?;
    for (i, bid) in record.bids.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(
            out,
            "{{\"advertiser_id\":{},\"bid\":{}}}",
            bid.advertiser_id, bid.bid
        )
        .map_err(|_| fail())?;
    }
    write!(
        out,
        "],\"winner\":{},\"payment\":{}}}",
        record.winner, record.payment
    )
    .map_err(|_| fail())?;
    Ok(out.into_bytes())
}

fn entry_hash(sequence: u64, previous: &EntryHash, canonical: &[u8]) -> EntryHash {
    let mut hasher = Sha256::new();
    hasher.update(sequence.to_be_bytes());
    hasher.update(previous);
    hasher.update(canonical);
    hasher.finalize().into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerEntry {
    pub sequence: u64,
    pub previous_hash: EntryHash,
    pub record: LedgerRecord,
    pub entry_hash: EntryHash,
}

/// In-memory hash chain. Load/persist lives in the companion crate; all
/// chain semantics are here so verification works the same from a file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ledger {
    entries: Vec<LedgerEntry>,
}

impl Ledger {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    /// Rebuilds a ledger from stored entries without validating them; call
    /// [`Ledger::verify_chain`] to check integrity.
    pub fn from_entries(entries: Vec<LedgerEntry>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<LedgerEntry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Last entry's hash, or the genesis constant for an empty ledger.
    pub fn head_hash(&self) -> EntryHash {
        self.entries
            .last()
            .map(|e| e.entry_hash)
            .unwrap_or_else(genesis_hash)
    }

    pub fn head_hex(&self) -> String {
        hex::encode(self.head_hash())
    }

    /// Appends a record with correct linkage; prior entries are untouched.
    pub fn append_record(&mut self, record: LedgerRecord) -> Result<&LedgerEntry, LedgerError> {
        let canonical = canonical_record_bytes(&record)?;
        let sequence = self.entries.len() as u64;
        let previous_hash = self.head_hash();
        let hash = entry_hash(sequence, &previous_hash, &canonical);
        self.entries.push(LedgerEntry {
            sequence,
            previous_hash,
            record,
            entry_hash: hash,
        });
        Ok(self.entries.last().expect("just pushed"))
    }

    /// Recomputes every hash and checks sequence contiguity and linkage.
    /// Returns the first failing entry.
    pub fn verify_chain(&self) -> Result<(), ChainFault> {
        let mut expected_previous = genesis_hash();
        for (index, entry) in self.entries.iter().enumerate() {
            if entry.sequence != index as u64 {
                return Err(ChainFault::Sequence {
                    index,
                    found: entry.sequence,
                });
            }
            if entry.previous_hash != expected_previous {
                return Err(ChainFault::Link { index });
            }
            let canonical =
                canonical_record_bytes(&entry.record).map_err(|_| ChainFault::Record { index })?;
            let recomputed = entry_hash(entry.sequence, &entry.previous_hash, &canonical);
            if recomputed != entry.entry_hash {
                return Err(ChainFault::Hash { index });
            }
            expected_previous = entry.entry_hash;
        }
        Ok(())
    }

    /// Re-runs the auction on every stored bid set and demands the stored
    /// outcome, bit for bit.
    pub fn replay(&self) -> Result<(), LedgerError> {
        for entry in &self.entries {
            let outcome = run_auction(&entry.record.bid_set()?);
            if outcome.winner != entry.record.winner
                || outcome.payment.to_bits() != entry.record.payment.to_bits()
            {
                return Err(LedgerError::OutcomeMismatch {
                    auction_id: entry.record.auction_id,
                });
            }
        }
        Ok(())
    }
}
