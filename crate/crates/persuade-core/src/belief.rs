//! States, priors, signaling policies, and Bayesian belief updating.
//!
//! The platform privately observes an engagement state `θ` drawn from a
//! finite [`StateSpace`] with prior `π`. It commits to a row-stochastic
//! [`SignalingPolicy`] `σ(s|θ)` over a [`SignalVocabulary`]; advertisers
//! observe the signal, update to a [`Posterior`] by Bayes' rule, and in a
//! second-price auction bid their posterior-expected valuation.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use serde::Serialize;

/// Row sums and probability vectors must be within this of 1 to validate.
pub const VALIDATION_TOL: f64 = 1e-9;
/// Computed distributions are normalized to within this of 1.
pub const COMPUTATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BeliefError {
    #[error("state space must be non-empty")]
    EmptyStates,
    #[error("signal vocabulary must be non-empty")]
    EmptySignals,
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("multiplier at index {index} must be strictly positive, got {value}")]
    NonPositiveMultiplier { index: usize, value: f64 },
    #[error("multipliers must be strictly increasing (violated at index {index})")]
    NonIncreasingMultipliers { index: usize },
    #[error("probability at index {index} is invalid: {value}")]
    InvalidProbability { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    ProbabilitySum { sum: f64 },
    #[error("negative policy entry at row {row}, column {col}")]
    NegativeEntry { row: usize, col: usize },
    #[error("policy row {row} sums to {sum}, expected 1")]
    RowSumViolation { row: usize, sum: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("signal {signal} has zero probability under the policy and prior")]
    ZeroProbabilitySignal { signal: usize },
    #[error("signal index {signal} out of range for vocabulary of {len}")]
    SignalOutOfRange { signal: usize, len: usize },
    #[error("valuation must be non-negative and finite, got {0}")]
    NegativeValuation(f64),
}

/// Ordered engagement states with their per-state engagement multipliers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSpace {
    labels: Vec<String>,
    multipliers: Vec<f64>,
}

impl StateSpace {
    /// Multipliers must be strictly positive and strictly increasing with
    /// state order; labels must be unique.
    pub fn new(labels: Vec<String>, multipliers: Vec<f64>) -> Result<Self, BeliefError> {
        if labels.is_empty() {
            return Err(BeliefError::EmptyStates);
        }
        if labels.len() != multipliers.len() {
            return Err(BeliefError::DimensionMismatch {
                expected: labels.len(),
                got: multipliers.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for label in &labels {
            if !seen.insert(label.clone()) {
                return Err(BeliefError::DuplicateLabel(label.clone()));
            }
        }
        for (index, &value) in multipliers.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(BeliefError::NonPositiveMultiplier { index, value });
            }
            if index > 0 && multipliers[index - 1] >= value {
                return Err(BeliefError::NonIncreasingMultipliers { index });
            }
        }
        Ok(Self {
            labels,
            multipliers,
        })
    }

    /// Default three-level space: low / medium / high with multipliers
    /// (0.5, 1.0, 1.8).
    pub fn default_three_level() -> Self {
        Self::new(
            alloc::vec![
                String::from("low"),
                String::from("medium"),
                String::from("high")
            ],
            alloc::vec![0.5, 1.0, 1.8],
        )
        .expect("default state space is valid")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    pub fn multiplier(&self, state: usize) -> f64 {
        self.multipliers[state]
    }
}

/// Prior distribution over the state space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prior {
    probs: Vec<f64>,
}

impl Prior {
    /// Entries must be non-negative and sum to 1 within [`VALIDATION_TOL`].
    /// Residual rounding error is rescaled away so the stored vector sums
    /// to 1 within [`COMPUTATION_TOL`].
    pub fn new(probs: Vec<f64>) -> Result<Self, BeliefError> {
        Ok(Self {
            probs: validated_distribution(probs)?,
        })
    }

    pub fn uniform(len: usize) -> Result<Self, BeliefError> {
        if len == 0 {
            return Err(BeliefError::EmptyStates);
        }
        Ok(Self {
            probs: alloc::vec![1.0 / len as f64; len],
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, state: usize) -> f64 {
        self.probs[state]
    }
}

/// Posterior belief over states after observing a signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Posterior {
    probs: Vec<f64>,
}

impl Posterior {
    pub fn new(probs: Vec<f64>) -> Result<Self, BeliefError> {
        Ok(Self {
            probs: validated_distribution(probs)?,
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, state: usize) -> f64 {
        self.probs[state]
    }
}

fn validated_distribution(probs: Vec<f64>) -> Result<Vec<f64>, BeliefError> {
    if probs.is_empty() {
        return Err(BeliefError::EmptyStates);
    }
    for (index, &value) in probs.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(BeliefError::InvalidProbability { index, value });
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > VALIDATION_TOL {
        return Err(BeliefError::ProbabilitySum { sum });
    }
    Ok(probs.into_iter().map(|p| p / sum).collect())
}

/// Ordered signal labels with their face-value engagement multipliers:
/// the engagement level a signal nominally announces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalVocabulary {
    labels: Vec<String>,
    face_values: Vec<f64>,
}

impl SignalVocabulary {
    pub fn new(labels: Vec<String>, face_values: Vec<f64>) -> Result<Self, BeliefError> {
        if labels.is_empty() {
            return Err(BeliefError::EmptySignals);
        }
        if labels.len() != face_values.len() {
            return Err(BeliefError::DimensionMismatch {
                expected: labels.len(),
                got: face_values.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for label in &labels {
            if !seen.insert(label.clone()) {
                return Err(BeliefError::DuplicateLabel(label.clone()));
            }
        }
        for (index, &value) in face_values.iter().enumerate() {
            if !value.is_finite() {
                return Err(BeliefError::InvalidProbability { index, value });
            }
        }
        Ok(Self {
            labels,
            face_values,
        })
    }

    /// Signals mirroring [`StateSpace::default_three_level`]: one signal per
    /// state, face value equal to the state's multiplier.
    pub fn default_three_level() -> Self {
        Self::new(
            alloc::vec![
                String::from("s_low"),
                String::from("s_mid"),
                String::from("s_high")
            ],
            alloc::vec![0.5, 1.0, 1.8],
        )
        .expect("default vocabulary is valid")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn face_values(&self) -> &[f64] {
        &self.face_values
    }

    pub fn face_value(&self, signal: usize) -> f64 {
        self.face_values[signal]
    }
}

/// Row-stochastic matrix of conditional signal probabilities, one row per
/// state, one column per signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalingPolicy {
    rows: Vec<Vec<f64>>,
}

impl SignalingPolicy {
    /// Every entry must be non-negative and every row must sum to 1 within
    /// [`VALIDATION_TOL`].
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, BeliefError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(BeliefError::EmptyStates);
        }
        let cols = rows[0].len();
        for (row, entries) in rows.iter().enumerate() {
            if entries.len() != cols {
                return Err(BeliefError::DimensionMismatch {
                    expected: cols,
                    got: entries.len(),
                });
            }
            for (col, &value) in entries.iter().enumerate() {
                if !value.is_finite() || value < 0.0 {
                    return Err(BeliefError::NegativeEntry { row, col });
                }
            }
            let sum: f64 = entries.iter().sum();
            if (sum - 1.0).abs() > VALIDATION_TOL {
                return Err(BeliefError::RowSumViolation { row, sum });
            }
        }
        Ok(Self { rows })
    }

    /// Re-checks stochasticity and that the matrix is shaped for the given
    /// state space and vocabulary.
    pub fn validate_against(
        &self,
        states: &StateSpace,
        vocabulary: &SignalVocabulary,
    ) -> Result<(), BeliefError> {
        if self.n_states() != states.len() {
            return Err(BeliefError::DimensionMismatch {
                expected: states.len(),
                got: self.n_states(),
            });
        }
        if self.n_signals() != vocabulary.len() {
            return Err(BeliefError::DimensionMismatch {
                expected: vocabulary.len(),
                got: self.n_signals(),
            });
        }
        Self::from_rows(self.rows.clone()).map(|_| ())
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn n_signals(&self) -> usize {
        self.rows[0].len()
    }

    /// σ(signal | state).
    pub fn prob(&self, state: usize, signal: usize) -> f64 {
        self.rows[state][signal]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Signal indices with positive probability mass under the prior.
    pub fn reachable_signals(&self, prior: &Prior) -> Result<Vec<usize>, BeliefError> {
        let marginal = signal_marginal(self, prior)?;
        Ok((0..marginal.len())
            .filter(|&s| marginal[s] > COMPUTATION_TOL)
            .collect())
    }

    /// Inverse-CDF draw from σ(·|state) given a uniform variate in [0, 1).
    ///
    /// Feeding the same variate through different policies yields paired
    /// (common-random-number) signal draws.
    pub fn sample_signal(&self, state: usize, uniform: f64) -> usize {
        let row = &self.rows[state];
        let mut cumulative = 0.0;
        for (signal, &p) in row.iter().enumerate() {
            cumulative += p;
            if uniform < cumulative {
                return signal;
            }
        }
        // Row rounding can leave the total a hair under the variate; fall
        // back to the last signal carrying mass.
        row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
    }
}

/// Per-state valuation of one advertiser, in currency units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValuationProfile {
    values: Vec<f64>,
}

impl ValuationProfile {
    pub fn new(values: Vec<f64>) -> Result<Self, BeliefError> {
        if values.is_empty() {
            return Err(BeliefError::EmptyStates);
        }
        for &value in &values {
            if !value.is_finite() || value < 0.0 {
                return Err(BeliefError::NegativeValuation(value));
            }
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Marginal probability of each signal under the policy and prior.
pub fn signal_marginal(policy: &SignalingPolicy, prior: &Prior) -> Result<Vec<f64>, BeliefError> {
    if policy.n_states() != prior.len() {
        return Err(BeliefError::DimensionMismatch {
            expected: prior.len(),
            got: policy.n_states(),
        });
    }
    let mut marginal = alloc::vec![0.0; policy.n_signals()];
    for (state, row) in policy.rows().iter().enumerate() {
        let p = prior.prob(state);
        for (signal, &sigma) in row.iter().enumerate() {
            marginal[signal] += sigma * p;
        }
    }
    Ok(marginal)
}

/// Posterior over states given an observed signal, by Bayes' rule.
///
/// Fails with [`BeliefError::ZeroProbabilitySignal`] when the signal cannot
/// occur under the policy and prior; the posterior is undefined there.
pub fn bayes_update(
    policy: &SignalingPolicy,
    prior: &Prior,
    signal: usize,
) -> Result<Posterior, BeliefError> {
    if signal >= policy.n_signals() {
        return Err(BeliefError::SignalOutOfRange {
            signal,
            len: policy.n_signals(),
        });
    }
    if policy.n_states() != prior.len() {
        return Err(BeliefError::DimensionMismatch {
            expected: prior.len(),
            got: policy.n_states(),
        });
    }
    let joint: Vec<f64> = (0..prior.len())
        .map(|state| policy.prob(state, signal) * prior.prob(state))
        .collect();
    let total: f64 = joint.iter().sum();
    if total <= 0.0 {
        return Err(BeliefError::ZeroProbabilitySignal { signal });
    }
    Ok(Posterior {
        probs: joint.into_iter().map(|p| p / total).collect(),
    })
}

/// Posterior-expected valuation Σ_θ μ(θ|s)·v(θ).
pub fn expected_valuation(
    posterior: &Posterior,
    valuations: &ValuationProfile,
) -> Result<f64, BeliefError> {
    if posterior.len() != valuations.len() {
        return Err(BeliefError::DimensionMismatch {
            expected: posterior.len(),
            got: valuations.len(),
        });
    }
    Ok(posterior
        .probs()
        .iter()
        .zip(valuations.values())
        .map(|(mu, v)| mu * v)
        .sum())
}

/// Dominant-strategy bid in a second-price auction: bid the expected
/// valuation unchanged.
pub fn optimal_bid(expected_valuation: f64) -> Result<f64, BeliefError> {
    if !expected_valuation.is_finite() || expected_valuation < 0.0 {
        return Err(BeliefError::NegativeValuation(expected_valuation));
    }
    Ok(expected_valuation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn two_state() -> StateSpace {
        StateSpace::new(vec!["low".to_string(), "high".to_string()], vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn policy_validation() {
        // Identity on 2 states / 2 signals is valid.
        assert!(SignalingPolicy::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).is_ok());

        match SignalingPolicy::from_rows(vec![vec![0.6, 0.3], vec![0.5, 0.5]]).unwrap_err() {
            BeliefError::RowSumViolation { row, sum } => {
                assert_eq!(row, 0);
                assert!((sum - 0.9).abs() < 1e-9);
            }
            other => panic!("expected row-sum violation, got {other:?}"),
        }
        assert_eq!(
            SignalingPolicy::from_rows(vec![vec![1.2, -0.2], vec![0.5, 0.5]]).unwrap_err(),
            BeliefError::NegativeEntry { row: 0, col: 1 },
        );
    }

    #[test]
    fn validate_against_checks_dimensions() {
        let policy = SignalingPolicy::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let vocab =
            SignalVocabulary::new(vec!["a".to_string(), "b".to_string()], vec![1.0, 2.0]).unwrap();
        assert!(policy.validate_against(&two_state(), &vocab).is_ok());

        let three = StateSpace::default_three_level();
        assert!(policy.validate_against(&three, &vocab).is_err());
    }

    #[test]
    fn state_space_invariants() {
        assert_eq!(
            StateSpace::new(vec![], vec![]).unwrap_err(),
            BeliefError::EmptyStates
        );
        assert!(matches!(
            StateSpace::new(vec!["a".to_string(), "a".to_string()], vec![1.0, 2.0]).unwrap_err(),
            BeliefError::DuplicateLabel(_)
        ));
        assert!(matches!(
            StateSpace::new(vec!["a".to_string(), "b".to_string()], vec![2.0, 1.0]).unwrap_err(),
            BeliefError::NonIncreasingMultipliers { index: 1 }
        ));
        assert!(matches!(
            StateSpace::new(vec!["a".to_string()], vec![0.0]).unwrap_err(),
            BeliefError::NonPositiveMultiplier { index: 0, .. }
        ));
    }

    #[test]
    fn bayes_full_disclosure_is_point_mass() {
        let policy = SignalingPolicy::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let prior = Prior::new(vec![0.3, 0.7]).unwrap();
        let post = bayes_update(&policy, &prior, 0).unwrap();
        assert_eq!(post.probs(), &[1.0, 0.0]);
    }

    #[test]
    fn bayes_constant_policy_returns_prior() {
        let policy = SignalingPolicy::from_rows(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let prior = Prior::new(vec![0.3, 0.7]).unwrap();
        let post = bayes_update(&policy, &prior, 0).unwrap();
        for (a, b) in post.probs().iter().zip(prior.probs()) {
            assert!((a - b).abs() < COMPUTATION_TOL);
        }
        assert_eq!(
            bayes_update(&policy, &prior, 1).unwrap_err(),
            BeliefError::ZeroProbabilitySignal { signal: 1 },
        );
    }

    #[test]
    fn bayes_hand_fixture() {
        // π = (0.5, 0.5), σ(s₁|θ_L) = 0.5, σ(s₁|θ_H) = 0.25 → posterior (2/3, 1/3).
        let policy = SignalingPolicy::from_rows(vec![vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        let prior = Prior::new(vec![0.5, 0.5]).unwrap();
        let post = bayes_update(&policy, &prior, 0).unwrap();
        assert!((post.prob(0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((post.prob(1) - 1.0 / 3.0).abs() < 1e-12);

        let marginal = signal_marginal(&policy, &prior).unwrap();
        assert!((marginal[0] - 0.375).abs() < 1e-12);
    }

    #[test]
    fn marginal_of_full_disclosure_is_prior() {
        let policy = SignalingPolicy::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let prior = Prior::new(vec![0.3, 0.7]).unwrap();
        assert_eq!(signal_marginal(&policy, &prior).unwrap(), vec![0.3, 0.7]);
    }

    #[test]
    fn expected_valuation_cases() {
        let v = ValuationProfile::new(vec![1.0, 2.0]).unwrap();
        let point = Posterior::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(expected_valuation(&point, &v).unwrap(), 2.0);

        let mixed = Posterior::new(vec![0.3, 0.7]).unwrap();
        assert!((expected_valuation(&mixed, &v).unwrap() - 1.7).abs() < 1e-12);

        let constant = ValuationProfile::new(vec![4.0, 4.0]).unwrap();
        let uniform = Posterior::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(expected_valuation(&uniform, &constant).unwrap(), 4.0);

        let wrong = ValuationProfile::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(expected_valuation(&mixed, &wrong).is_err());
    }

    #[test]
    fn optimal_bid_is_identity_on_nonnegatives() {
        assert_eq!(optimal_bid(1.7).unwrap(), 1.7);
        assert_eq!(optimal_bid(0.0).unwrap(), 0.0);
        assert_eq!(optimal_bid(2.0).unwrap(), 2.0);
        assert!(optimal_bid(-0.5).is_err());
        assert!(optimal_bid(f64::NAN).is_err());
    }

    #[test]
    fn prior_rejects_bad_sums() {
        assert!(matches!(
            Prior::new(vec![0.4, 0.5]).unwrap_err(),
            BeliefError::ProbabilitySum { .. }
        ));
        assert!(matches!(
            Prior::new(vec![-0.1, 1.1]).unwrap_err(),
            BeliefError::InvalidProbability { index: 0, .. }
        ));
    }

    prop_compose! {
        /// Arbitrary valid (policy, prior) pair over 2..=4 states and signals.
        fn policy_prior()(n_states in 2usize..=4, n_signals in 2usize..=4)(
            raw_policy in proptest::collection::vec(
                proptest::collection::vec(0.0f64..1.0, n_signals), n_states),
            raw_prior in proptest::collection::vec(0.01f64..1.0, n_states),
        ) -> (SignalingPolicy, Prior) {
            let rows: Vec<Vec<f64>> = raw_policy.into_iter().map(|row| {
                let sum: f64 = row.iter().sum();
                if sum <= 0.0 {
                    let len = row.len();
                    alloc::vec![1.0 / len as f64; len]
                } else {
                    row.into_iter().map(|x| x / sum).collect()
                }
            }).collect();
            let sum: f64 = raw_prior.iter().sum();
            let prior = Prior::new(raw_prior.into_iter().map(|x| x / sum).collect()).unwrap();
            (SignalingPolicy::from_rows(rows).unwrap(), prior)
        }
    }

    proptest! {
        #[test]
        fn posterior_is_distribution((policy, prior) in policy_prior()) {
            let marginal = signal_marginal(&policy, &prior).unwrap();
            for (signal, &mass) in marginal.iter().enumerate() {
                if mass <= 0.0 {
                    continue;
                }
                let post = bayes_update(&policy, &prior, signal).unwrap();
                let sum: f64 = post.probs().iter().sum();
                prop_assert!((sum - 1.0).abs() < COMPUTATION_TOL);
                prop_assert!(post.probs().iter().all(|&p| p >= 0.0));
            }
        }

        #[test]
        fn bayes_plausibility_reconstructs_prior((policy, prior) in policy_prior()) {
            // Signal-weighted average of posteriors equals the prior.
            let marginal = signal_marginal(&policy, &prior).unwrap();
            let mut mixture = alloc::vec![0.0; prior.len()];
            for (signal, &mass) in marginal.iter().enumerate() {
                if mass <= 0.0 {
                    continue;
                }
                let post = bayes_update(&policy, &prior, signal).unwrap();
                for (state, &mu) in post.probs().iter().enumerate() {
                    mixture[state] += mass * mu;
                }
            }
            for (state, &p) in prior.probs().iter().enumerate() {
                prop_assert!((mixture[state] - p).abs() < 1e-9);
            }
        }

        #[test]
        fn expected_valuation_monotone((_, prior) in policy_prior(), bump in 0.1f64..5.0) {
            // Raising any valuation with positive posterior mass raises the result.
            let posterior = Posterior::new(prior.probs().to_vec()).unwrap();
            let base: Vec<f64> = (0..prior.len()).map(|i| 1.0 + i as f64).collect();
            let v0 = ValuationProfile::new(base.clone()).unwrap();
            let e0 = expected_valuation(&posterior, &v0).unwrap();
            for state in 0..prior.len() {
                if posterior.prob(state) <= 0.0 {
                    continue;
                }
                let mut raised = base.clone();
                raised[state] += bump;
                let v1 = ValuationProfile::new(raised).unwrap();
                prop_assert!(expected_valuation(&posterior, &v1).unwrap() > e0);
            }
        }
    }
}
