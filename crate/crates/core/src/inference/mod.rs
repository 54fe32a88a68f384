//! Two-layer noisy-OR network and posterior computation.
//!
//! A finding `i` is absent with probability
//! `exp(-θ_i0 - Σ_j θ_ij d_j)` where `θ_ij = -ln(1 - w_ij)` and `θ_i0` is the
//! leak term. Posteriors come either from full enumeration over disorder
//! states ([`exact_posterior`]) or from the conjugate-bound variational method
//! ([`variational_posteriors`]).

mod conjugate;
mod differential;
mod exact;
mod network;
mod signed;
mod variational;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ConceptId;

pub use conjugate::{conjugate_upper, f_star, tight_point};
pub use differential::{rank_differential, Differential, DifferentialEntry, ProcessRef, SuggestedTest};
pub use exact::{exact_posterior, MAX_EXACT_DISORDERS};
pub use network::{build_network, prior_from_incidence, theta, NetworkParams, NoisyOrNetwork};
pub use variational::{
    optimize_xi, optimize_xi_with, select_exact_set, transformed_bound, variational_posteriors,
    VariationalConfig, VariationalState, MAX_EXACT_SET,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("link {disorder}->{finding} has weight {weight}; weights must lie in (0, 1)")]
    WeightOutOfRange {
        disorder: ConceptId,
        finding: ConceptId,
        weight: f64,
    },
    #[error("link {disorder}->{finding} has no compiled weight")]
    NotCompiled {
        disorder: ConceptId,
        finding: ConceptId,
    },
    #[error("{what} {value} is not a valid probability")]
    InvalidProbability { what: String, value: f64 },
    #[error("exact enumeration refused: {count} disorders exceed the limit of {max}")]
    TooManyDisorders { count: usize, max: usize },
    #[error("exact set of {count} findings exceeds the limit of {max}")]
    TooManyExact { count: usize, max: usize },
    #[error("unknown finding {0}")]
    UnknownFinding(ConceptId),
    #[error("duplicate id {0} in network")]
    DuplicateId(ConceptId),
    #[error("finding {0} is both present and absent")]
    Conflict(ConceptId),
    #[error("evidence has zero probability under the model")]
    ImpossibleEvidence,
    #[error("variational parameter must be positive, got {0}")]
    Domain(f64),
    #[error("non-finite bound while optimising finding {0}")]
    NonFiniteBound(ConceptId),
    #[error("inclusion-exclusion normaliser is {value:e} relative to its largest term")]
    NegativeMass { value: f64 },
    #[error("variational state does not match evidence: {0}")]
    StateMismatch(String),
}

/// Patient descriptors carried through to the output; they never enter scoring.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub age: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sex: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nationality: Option<String>,
}

impl Demographics {
    pub fn is_empty(&self) -> bool {
        self.age.is_none() && self.sex.is_none() && self.nationality.is_none()
    }
}

/// Observed findings split by polarity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    positive: BTreeSet<ConceptId>,
    negative: BTreeSet<ConceptId>,
    pub demographics: Demographics,
}

impl Evidence {
    pub fn new(
        positive: impl IntoIterator<Item = ConceptId>,
        negative: impl IntoIterator<Item = ConceptId>,
    ) -> Result<Self, InferenceError> {
        let positive: BTreeSet<_> = positive.into_iter().collect();
        let negative: BTreeSet<_> = negative.into_iter().collect();
        if let Some(id) = positive.intersection(&negative).next() {
            return Err(InferenceError::Conflict(*id));
        }
        Ok(Evidence {
            positive,
            negative,
            demographics: Demographics::default(),
        })
    }

    pub fn empty() -> Self {
        Evidence::default()
    }

    pub fn with_demographics(mut self, demographics: Demographics) -> Self {
        self.demographics = demographics;
        self
    }

    pub fn positive(&self) -> &BTreeSet<ConceptId> {
        &self.positive
    }

    pub fn negative(&self) -> &BTreeSet<ConceptId> {
        &self.negative
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_empty() && self.negative.is_empty()
    }

    pub fn contains(&self, id: ConceptId) -> bool {
        self.positive.contains(&id) || self.negative.contains(&id)
    }

    /// Fails on the first finding the network does not know.
    pub fn check_against(&self, net: &NoisyOrNetwork) -> Result<(), InferenceError> {
        for id in self.positive.iter().chain(&self.negative) {
            if net.finding_index(*id).is_none() {
                return Err(InferenceError::UnknownFinding(*id));
            }
        }
        Ok(())
    }
}

/// Posterior disorder marginals, aligned with [`NoisyOrNetwork::disorder_ids`].
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub marginals: Vec<f64>,
    /// Natural log of the evidence probability.
    pub log_evidence: f64,
}

impl Posterior {
    pub fn by_id(&self, net: &NoisyOrNetwork) -> Vec<(ConceptId, f64)> {
        net.disorder_ids().iter().copied().zip(self.marginals.iter().copied()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evidence_conflict() {
        let err = Evidence::new([ConceptId(1), ConceptId(2)], [ConceptId(2)]).unwrap_err();
        assert_eq!(err, InferenceError::Conflict(ConceptId(2)));
    }
}
