//! Canonical signaling policies and revenue-maximizing policy search.
//!
//! The search is exhaustive at desk scale: canonical policies plus either a
//! two-state (α, β) grid, every set-partition of the state space (|Θ| ≤ 4),
//! or a full simplex grid. An optional credibility filter drops candidates
//! whose induced posterior engagement deviates too far from a signal's face
//! value; without it, face-value responders reward the degenerate policy
//! that always announces the highest engagement level.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::Serialize;

use crate::belief::{
    bayes_update, signal_marginal, BeliefError, Prior, SignalVocabulary, SignalingPolicy,
    StateSpace, COMPUTATION_TOL,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DesignError {
    #[error("vocabulary has {signals} signals but {needed} are needed")]
    VocabularyTooSmall { signals: usize, needed: usize },
    #[error("operation requires exactly {expected} states, got {got}")]
    WrongStateCount { expected: usize, got: usize },
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("partition enumeration supports at most 4 states, got {0}")]
    StateSpaceTooLarge(usize),
    #[error("grid resolution must be at least 2, got {0}")]
    ResolutionTooSmall(usize),
    #[error("search grid would evaluate {candidates} candidates; refusing above {limit}")]
    SearchSpaceTooLarge { candidates: u64, limit: u64 },
    #[error("no feasible candidate to select from")]
    EmptyCandidateSet,
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

/// How a candidate policy was constructed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CandidateKind {
    Full,
    NoDisclosure,
    PartialTwoState {
        alpha: f64,
        beta: f64,
    },
    /// Blocks of state indices, each block pooled onto one signal.
    Partition {
        blocks: Vec<Vec<usize>>,
        signals: Vec<usize>,
    },
    GridPoint,
}

impl CandidateKind {
    pub fn tag(&self) -> &'static str {
        match self {
            CandidateKind::Full => "full",
            CandidateKind::NoDisclosure => "none",
            CandidateKind::PartialTwoState { .. } => "partial",
            CandidateKind::Partition { .. } => "partition",
            CandidateKind::GridPoint => "grid-point",
        }
    }

    /// Compact parameter rendering for audit-trail exports.
    pub fn params(&self) -> String {
        match self {
            CandidateKind::Full | CandidateKind::NoDisclosure => String::new(),
            CandidateKind::PartialTwoState { alpha, beta } => {
                format!("alpha={alpha};beta={beta}")
            }
            CandidateKind::Partition { blocks, signals } => {
                let mut out = String::new();
                for (block, signal) in blocks.iter().zip(signals) {
                    out.push('[');
                    for (i, state) in block.iter().enumerate() {
                        if i > 0 {
                            out.push(' ');
                        }
                        out.push_str(&format!("{state}"));
                    }
                    out.push_str(&format!("]->s{signal}"));
                }
                out
            }
            CandidateKind::GridPoint => String::from("rows"),
        }
    }
}

/// A policy paired with how it was built.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyCandidate {
    pub policy: SignalingPolicy,
    pub kind: CandidateKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    TwoStateGrid,
    PartitionEnumeration,
    SimplexGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub mode: SearchMode,
    /// Grid points per axis for the grid modes.
    pub resolution: usize,
    /// Monte Carlo auctions per candidate evaluation.
    pub mc_auctions: usize,
    /// Max |posterior-expected multiplier − face value| over reachable
    /// signals for a candidate to count as credible.
    pub credibility_delta: f64,
    pub credibility: bool,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            mode: SearchMode::PartitionEnumeration,
            resolution: 21,
            mc_auctions: 2000,
            credibility_delta: 0.25,
            credibility: true,
            seed: 42,
        }
    }
}

const GRID_CANDIDATE_LIMIT: u64 = 1_000_000;

/// One signal per state: σ(s_k|θ_k) = 1 under the canonical pairing.
pub fn full_disclosure(
    states: &StateSpace,
    vocabulary: &SignalVocabulary,
) -> Result<SignalingPolicy, DesignError> {
    if vocabulary.len() < states.len() {
        return Err(DesignError::VocabularyTooSmall {
            signals: vocabulary.len(),
            needed: states.len(),
        });
    }
    let rows = (0..states.len())
        .map(|state| {
            let mut row = alloc::vec![0.0; vocabulary.len()];
            row[state] = 1.0;
            row
        })
        .collect();
    Ok(SignalingPolicy::from_rows(rows).expect("point-mass rows are stochastic"))
}

/// Every state pools onto the vocabulary's middle signal, so the posterior
/// always equals the prior.
pub fn no_disclosure(states: &StateSpace, vocabulary: &SignalVocabulary) -> SignalingPolicy {
    let pooled = (vocabulary.len() - 1) / 2;
    let rows = (0..states.len())
        .map(|_| {
            let mut row = alloc::vec![0.0; vocabulary.len()];
            row[pooled] = 1.0;
            row
        })
        .collect();
    SignalingPolicy::from_rows(rows).expect("point-mass rows are stochastic")
}

/// Signals drawn uniformly regardless of state. Training data generated
/// under this policy covers every (signal, feature) region, which keeps
/// counterfactual policy evaluation on support.
pub fn uniform_exploration(states: &StateSpace, vocabulary: &SignalVocabulary) -> SignalingPolicy {
    let p = 1.0 / vocabulary.len() as f64;
    let rows = (0..states.len())
        .map(|_| alloc::vec![p; vocabulary.len()])
        .collect();
    SignalingPolicy::from_rows(rows).expect("uniform rows are stochastic")
}

/// Two-state randomized disclosure: σ(s₀|θ_L) = α, σ(s₀|θ_H) = β, with the
/// complement on s₁. Any further vocabulary signals get zero mass.
pub fn partial_two_state(
    states: &StateSpace,
    vocabulary: &SignalVocabulary,
    alpha: f64,
    beta: f64,
) -> Result<SignalingPolicy, DesignError> {
    if states.len() != 2 {
        return Err(DesignError::WrongStateCount {
            expected: 2,
            got: states.len(),
        });
    }
    if vocabulary.len() < 2 {
        return Err(DesignError::VocabularyTooSmall {
            signals: vocabulary.len(),
            needed: 2,
        });
    }
    for p in [alpha, beta] {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(DesignError::ProbabilityOutOfRange(p));
        }
    }
    let mut low = alloc::vec![0.0; vocabulary.len()];
    let mut high = alloc::vec![0.0; vocabulary.len()];
    low[0] = alpha;
    low[1] = 1.0 - alpha;
    high[0] = beta;
    high[1] = 1.0 - beta;
    Ok(SignalingPolicy::from_rows(alloc::vec![low, high])?)
}

/// Deterministic pooling policies: one candidate per set-partition of the
/// states (enumerated in restricted-growth order), each block mapped to a
/// distinct signal.
///
/// Blocks are matched to signals by minimizing the total distance between a
/// block's prior-weighted mean multiplier and the signal's face value, so
/// pooled signals announce roughly what they imply. Partitions with more
/// blocks than signals are skipped.
pub fn enumerate_partition_policies(
    states: &StateSpace,
    vocabulary: &SignalVocabulary,
    prior: &Prior,
) -> Result<Vec<PolicyCandidate>, DesignError> {
    if states.len() > 4 {
        return Err(DesignError::StateSpaceTooLarge(states.len()));
    }
    if prior.len() != states.len() {
        return Err(BeliefError::DimensionMismatch {
            expected: states.len(),
            got: prior.len(),
        }
        .into());
    }
    let mut candidates = Vec::new();
    for assignment in restricted_growth_strings(states.len()) {
        let block_count = assignment.iter().copied().max().unwrap_or(0) + 1;
        if block_count > vocabulary.len() {
            continue;
        }
        let mut blocks: Vec<Vec<usize>> = alloc::vec![Vec::new(); block_count];
        for (state, &block) in assignment.iter().enumerate() {
            blocks[block].push(state);
        }
        let signals = assign_block_signals(&blocks, states, vocabulary, prior);
        let mut rows = alloc::vec![alloc::vec![0.0; vocabulary.len()]; states.len()];
        for (block, &signal) in blocks.iter().zip(&signals) {
            for &state in block {
                rows[state][signal] = 1.0;
            }
        }
        let policy = SignalingPolicy::from_rows(rows)?;
        candidates.push(PolicyCandidate {
            policy,
            kind: CandidateKind::Partition { blocks, signals },
        });
    }
    Ok(candidates)
}

/// All partition assignments of `n` items in restricted-growth-string order:
/// `a[0] = 0` and `a[i] ≤ max(a[..i]) + 1`.
fn restricted_growth_strings(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = alloc::vec![0usize; n];
    fn recurse(current: &mut Vec<usize>, pos: usize, max_used: usize, out: &mut Vec<Vec<usize>>) {
        if pos == current.len() {
            out.push(current.clone());
            return;
        }
        for value in 0..=max_used + 1 {
            current[pos] = value;
            recurse(current, pos + 1, max_used.max(value), out);
        }
    }
    if n == 0 {
        return out;
    }
    recurse(&mut current, 1, 0, &mut out);
    out
}

/// Injective block → signal assignment minimizing total |block multiplier −
/// face value|; ties resolve to the lexicographically smallest signal vector.
fn assign_block_signals(
    blocks: &[Vec<usize>],
    states: &StateSpace,
    vocabulary: &SignalVocabulary,
    prior: &Prior,
) -> Vec<usize> {
    let block_means: Vec<f64> = blocks
        .iter()
        .map(|block| {
            let mass: f64 = block.iter().map(|&s| prior.prob(s)).sum();
            if mass > 0.0 {
                block
                    .iter()
                    .map(|&s| prior.prob(s) * states.multiplier(s))
                    .sum::<f64>()
                    / mass
            } else {
                block.iter().map(|&s| states.multiplier(s)).sum::<f64>() / block.len() as f64
            }
        })
        .collect();

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut chosen = alloc::vec![0usize; blocks.len()];
    let mut used = alloc::vec![false; vocabulary.len()];
    fn recurse(
        block: usize,
        cost: f64,
        block_means: &[f64],
        faces: &[f64],
        chosen: &mut Vec<usize>,
        used: &mut Vec<bool>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if block == block_means.len() {
            let better = match best {
                None => true,
                Some((best_cost, best_vec)) => {
                    cost < *best_cost - 1e-15
                        || ((cost - *best_cost).abs() <= 1e-15 && chosen[..] < best_vec[..])
                }
            };
            if better {
                *best = Some((cost, chosen.clone()));
            }
            return;
        }
        for signal in 0..faces.len() {
            if used[signal] {
                continue;
            }
            used[signal] = true;
            chosen[block] = signal;
            let step = (block_means[block] - faces[signal]).abs();
            recurse(
                block + 1,
                cost + step,
                block_means,
                faces,
                chosen,
                used,
                best,
            );
            used[signal] = false;
        }
    }
    recurse(
        0,
        0.0,
        &block_means,
        vocabulary.face_values(),
        &mut chosen,
        &mut used,
        &mut best,
    );
    best.expect("at least one assignment exists when blocks <= signals")
        .1
}

/// Largest |posterior-expected multiplier − face value| over signals the
/// policy can actually emit under the prior.
pub fn max_credibility_deviation(
    policy: &SignalingPolicy,
    states: &StateSpace,
    vocabulary: &SignalVocabulary,
    prior: &Prior,
) -> Result<f64, BeliefError> {
    let marginal = signal_marginal(policy, prior)?;
    let mut max_dev = 0.0f64;
    for (signal, &mass) in marginal.iter().enumerate() {
        if mass <= COMPUTATION_TOL {
            continue;
        }
        let posterior = bayes_update(policy, prior, signal)?;
        let implied: f64 = posterior
            .probs()
            .iter()
            .zip(states.multipliers())
            .map(|(mu, m)| mu * m)
            .sum();
        max_dev = max_dev.max((implied - vocabulary.face_value(signal)).abs());
    }
    Ok(max_dev)
}

/// A candidate with its evaluated revenue and credibility verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluatedCandidate {
    pub candidate: PolicyCandidate,
    pub revenue: f64,
    pub feasible: bool,
}

/// Result of a policy search: the winner plus the full audit trail in
/// evaluation order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub best: PolicyCandidate,
    pub best_revenue: f64,
    pub trail: Vec<EvaluatedCandidate>,
}

/// Evaluates an explicit candidate list and picks the revenue-maximal
/// feasible one.
///
/// Ties break toward fewer distinct reachable signals, then toward the
/// lexicographically smaller matrix, so the selection is deterministic for
/// any deterministic evaluator.
pub fn select_best<E>(
    candidates: Vec<PolicyCandidate>,
    states: &StateSpace,
    vocabulary: &SignalVocabulary,
    prior: &Prior,
    search: &SearchConfig,
    mut evaluator: E,
) -> Result<SearchOutcome, DesignError>
where
    E: FnMut(&SignalingPolicy) -> f64,
{
    if candidates.is_empty() {
        return Err(DesignError::EmptyCandidateSet);
    }
    let mut trail = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        let revenue = evaluator(&candidate.policy);
        let feasible = if search.credibility {
            max_credibility_deviation(&candidate.policy, states, vocabulary, prior)?
                <= search.credibility_delta
        } else {
            true
        };
        trail.push(EvaluatedCandidate {
            candidate,
            revenue,
            feasible,
        });
    }

    let mut best: Option<(usize, usize)> = None; // (trail index, reachable signals)
    for (index, entry) in trail.iter().enumerate() {
        if !entry.feasible {
            continue;
        }
        let reachable = entry.candidate.policy.reachable_signals(prior)?.len();
        let replace = match best {
            None => true,
            Some((best_index, best_reachable)) => {
                let best_entry = &trail[best_index];
                entry.revenue > best_entry.revenue
                    || (entry.revenue == best_entry.revenue
                        && (reachable < best_reachable
                            || (reachable == best_reachable
                                && matrix_lex_less(
                                    &entry.candidate.policy,
                                    &best_entry.candidate.policy,
                                ))))
            }
        };
        if replace {
            best = Some((index, reachable));
        }
    }
    let (best_index, _) = best.ok_or(DesignError::EmptyCandidateSet)?;
    Ok(SearchOutcome {
        best: trail[best_index].candidate.clone(),
        best_revenue: trail[best_index].revenue,
        trail,
    })
}

fn matrix_lex_less(a: &SignalingPolicy, b: &SignalingPolicy) -> bool {
    for (row_a, row_b) in a.rows().iter().zip(b.rows()) {
        for (x, y) in row_a.iter().zip(row_b) {
            match x.total_cmp(y) {
                core::cmp::Ordering::Less => return true,
                core::cmp::Ordering::Greater => return false,
                core::cmp::Ordering::Equal => {}
            }
        }
    }
    false
}

/// Builds the candidate set for the configured search mode — always
/// including full and no disclosure — and selects the best.
pub fn optimize_policy<E>(
    states: &StateSpace,
    vocabulary: &SignalVocabulary,
    prior: &Prior,
    search: &SearchConfig,
    evaluator: E,
) -> Result<SearchOutcome, DesignError>
where
    E: FnMut(&SignalingPolicy) -> f64,
{
    let candidates = build_candidates(states, vocabulary, prior, search)?;
    select_best(candidates, states, vocabulary, prior, search, evaluator)
}

/// The deterministic candidate list [`optimize_policy`] evaluates:
/// full disclosure, no disclosure, then the mode-specific candidates.
pub fn build_candidates(
    states: &StateSpace,
    vocabulary: &SignalVocabulary,
    prior: &Prior,
    search: &SearchConfig,
) -> Result<Vec<PolicyCandidate>, DesignError> {
    let mut candidates = Vec::new();
    candidates.push(PolicyCandidate {
        policy: full_disclosure(states, vocabulary)?,
        kind: CandidateKind::Full,
    });
    candidates.push(PolicyCandidate {
        policy: no_disclosure(states, vocabulary),
        kind: CandidateKind::NoDisclosure,
    });
    match search.mode {
        SearchMode::TwoStateGrid => {
            if states.len() != 2 {
                return Err(DesignError::WrongStateCount {
                    expected: 2,
                    got: states.len(),
                });
            }
            if search.resolution < 2 {
                return Err(DesignError::ResolutionTooSmall(search.resolution));
            }
            let steps = search.resolution - 1;
            for ai in 0..=steps {
                let alpha = ai as f64 / steps as f64;
                for bi in 0..=steps {
                    let beta = bi as f64 / steps as f64;
                    candidates.push(PolicyCandidate {
                        policy: partial_two_state(states, vocabulary, alpha, beta)?,
                        kind: CandidateKind::PartialTwoState { alpha, beta },
                    });
                }
            }
        }
        SearchMode::PartitionEnumeration => {
            candidates.extend(enumerate_partition_policies(states, vocabulary, prior)?);
        }
        SearchMode::SimplexGrid => {
            if search.resolution < 2 {
                return Err(DesignError::ResolutionTooSmall(search.resolution));
            }
            let rows = simplex_rows(search.resolution - 1, vocabulary.len());
            let count = (rows.len() as u64).checked_pow(states.len() as u32);
            match count {
                Some(c) if c <= GRID_CANDIDATE_LIMIT => {}
                _ => {
                    return Err(DesignError::SearchSpaceTooLarge {
                        candidates: count.unwrap_or(u64::MAX),
                        limit: GRID_CANDIDATE_LIMIT,
                    })
                }
            }
            let mut picks = alloc::vec![0usize; states.len()];
            loop {
                let matrix: Vec<Vec<f64>> = picks.iter().map(|&i| rows[i].clone()).collect();
                candidates.push(PolicyCandidate {
                    policy: SignalingPolicy::from_rows(matrix)?,
                    kind: CandidateKind::GridPoint,
                });
                // Odometer increment over row picks.
                let mut pos = picks.len();
                loop {
                    if pos == 0 {
                        return Ok(candidates);
                    }
                    pos -= 1;
                    picks[pos] += 1;
                    if picks[pos] < rows.len() {
                        break;
                    }
                    picks[pos] = 0;
                }
            }
        }
    }
    Ok(candidates)
}

/// All stochastic vectors of the given length whose entries are multiples
/// of 1/steps, in lexicographic order.
fn simplex_rows(steps: usize, len: usize) -> Vec<Vec<f64>> {
    let mut rows = Vec::new();
    let mut counts = alloc::vec![0usize; len];
    fn recurse(
        pos: usize,
        remaining: usize,
        counts: &mut Vec<usize>,
        rows: &mut Vec<Vec<f64>>,
        steps: usize,
    ) {
        if pos + 1 == counts.len() {
            counts[pos] = remaining;
            rows.push(counts.iter().map(|&c| c as f64 / steps as f64).collect());
            return;
        }
        for take in 0..=remaining {
            counts[pos] = take;
            recurse(pos + 1, remaining - take, counts, rows, steps);
        }
    }
    recurse(0, steps, &mut counts, &mut rows, steps);
    rows
}
