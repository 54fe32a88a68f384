use std::collections::{BTreeMap, HashMap};

use super::InferenceError;
use crate::kb::KnowledgeBase;
use crate::ConceptId;

/// Knobs applied when turning a compiled knowledge base into a network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub leak_default: f64,
    pub leak_overrides: BTreeMap<ConceptId, f64>,
    pub prior_cap: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            leak_default: 0.001,
            leak_overrides: BTreeMap::new(),
            prior_cap: 0.05,
        }
    }
}

pub const PRIOR_FLOOR: f64 = 1e-6;

/// `1 - exp(-incidence)`, clamped to `[1e-6, cap]`.
pub fn prior_from_incidence(incidence: f64, cap: f64) -> f64 {
    (-(-incidence).exp_m1()).clamp(PRIOR_FLOOR, cap)
}

/// `-ln(1 - w)`. Defined for `w` in [0, 1).
pub fn theta(weight: f64) -> f64 {
    -(-weight).ln_1p()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyOrNetwork {
    disorder_ids: Vec<ConceptId>,
    finding_ids: Vec<ConceptId>,
    disorder_index: HashMap<ConceptId, usize>,
    finding_index: HashMap<ConceptId, usize>,
    priors: Vec<f64>,
    leaks: Vec<f64>,
    leak_theta: Vec<f64>,
    /// Per finding: (disorder index, θ).
    parents: Vec<Vec<(usize, f64)>>,
    /// Per disorder: (finding index, θ).
    children: Vec<Vec<(usize, f64)>>,
}

impl NoisyOrNetwork {
    /// `links` are (disorder, finding, weight) with weight in (0, 1).
    pub fn from_parts(
        disorders: impl IntoIterator<Item = (ConceptId, f64)>,
        findings: impl IntoIterator<Item = (ConceptId, f64)>,
        links: impl IntoIterator<Item = (ConceptId, ConceptId, f64)>,
    ) -> Result<Self, InferenceError> {
        let mut disorder_ids = Vec::new();
        let mut priors = Vec::new();
        let mut disorder_index = HashMap::new();
        for (id, p) in disorders {
            if !(p > 0.0 && p < 1.0) {
                return Err(InferenceError::InvalidProbability {
                    what: format!("prior of {id}"),
                    value: p,
                });
            }
            if disorder_index.insert(id, disorder_ids.len()).is_some() {
                return Err(InferenceError::DuplicateId(id));
            }
            disorder_ids.push(id);
            priors.push(p);
        }
        let mut finding_ids = Vec::new();
        let mut leaks = Vec::new();
        let mut finding_index = HashMap::new();
        for (id, leak) in findings {
            if !(0.0..1.0).contains(&leak) {
                return Err(InferenceError::InvalidProbability {
                    what: format!("leak of {id}"),
                    value: leak,
                });
            }
            if finding_index.insert(id, finding_ids.len()).is_some() {
                return Err(InferenceError::DuplicateId(id));
            }
            finding_ids.push(id);
            leaks.push(leak);
        }
        let mut parents = vec![Vec::new(); finding_ids.len()];
        let mut children = vec![Vec::new(); disorder_ids.len()];
        for (d, f, w) in links {
            if !(w > 0.0 && w < 1.0) {
                return Err(InferenceError::WeightOutOfRange {
                    disorder: d,
                    finding: f,
                    weight: w,
                });
            }
            let di = *disorder_index
                .get(&d)
                .ok_or(InferenceError::StateMismatch(format!("link names unknown disorder {d}")))?;
            let fi = *finding_index.get(&f).ok_or(InferenceError::UnknownFinding(f))?;
            let t = theta(w);
            parents[fi].push((di, t));
            children[di].push((fi, t));
        }
        for p in &mut parents {
            p.sort_by_key(|(d, _)| *d);
        }
        for c in &mut children {
            c.sort_by_key(|(f, _)| *f);
        }
        let leak_theta = leaks.iter().map(|l| theta(*l)).collect();
        Ok(NoisyOrNetwork {
            disorder_ids,
            finding_ids,
            disorder_index,
            finding_index,
            priors,
            leaks,
            leak_theta,
            parents,
            children,
        })
    }

    pub fn disorder_ids(&self) -> &[ConceptId] {
        &self.disorder_ids
    }

    pub fn finding_ids(&self) -> &[ConceptId] {
        &self.finding_ids
    }

    pub fn disorder_index(&self, id: ConceptId) -> Option<usize> {
        self.disorder_index.get(&id).copied()
    }

    pub fn finding_index(&self, id: ConceptId) -> Option<usize> {
        self.finding_index.get(&id).copied()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn leak(&self, finding: usize) -> f64 {
        self.leaks[finding]
    }

    pub fn leak_theta(&self, finding: usize) -> f64 {
        self.leak_theta[finding]
    }

    pub fn parents(&self, finding: usize) -> &[(usize, f64)] {
        &self.parents[finding]
    }

    pub fn children(&self, disorder: usize) -> &[(usize, f64)] {
        &self.children[disorder]
    }

    pub fn num_disorders(&self) -> usize {
        self.disorder_ids.len()
    }

    pub fn num_findings(&self) -> usize {
        self.finding_ids.len()
    }
}

/// Network over every disorder and finding of a compiled knowledge base.
pub fn build_network(kb: &KnowledgeBase, params: &NetworkParams) -> Result<NoisyOrNetwork, InferenceError> {
    if !(params.prior_cap > PRIOR_FLOOR && params.prior_cap < 1.0) {
        return Err(InferenceError::InvalidProbability {
            what: "prior cap".into(),
            value: params.prior_cap,
        });
    }
    let disorders = kb
        .disorders()
        .map(|d| (d.id, prior_from_incidence(d.incidence, params.prior_cap)));
    let findings = kb.findings().map(|f| {
        let leak = params.leak_overrides.get(&f.id).copied().unwrap_or(params.leak_default);
        (f.id, leak)
    });
    let mut links = Vec::with_capacity(kb.links().len());
    for l in kb.links() {
        let w = l.weight.ok_or(InferenceError::NotCompiled {
            disorder: l.disorder,
            finding: l.finding,
        })?;
        links.push((l.disorder, l.finding, w.value()));
    }
    NoisyOrNetwork::from_parts(disorders, findings, links)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_of_grid_top() {
        assert!((theta(0.81) - 1.660_731_206_821_651).abs() < 1e-12);
        assert_eq!(theta(0.0), 0.0);
    }

    #[test]
    fn prior_transform() {
        let p = prior_from_incidence(0.01, 0.05);
        assert!((p - (1.0 - (-0.01f64).exp())).abs() < 1e-15);
        assert!((p - 0.00995).abs() < 1e-5);
        assert_eq!(prior_from_incidence(0.5, 0.05), 0.05);
        assert_eq!(prior_from_incidence(1e-9, 0.05), PRIOR_FLOOR);
    }

    #[test]
    fn zero_leak_has_zero_theta() {
        let net = NoisyOrNetwork::from_parts([(ConceptId(1), 0.1)], [(ConceptId(2), 0.0)], []).unwrap();
        assert_eq!(net.leak_theta(0), 0.0);
    }

    #[test]
    fn weight_of_one_rejected() {
        let err = NoisyOrNetwork::from_parts(
            [(ConceptId(1), 0.1)],
            [(ConceptId(2), 0.0)],
            [(ConceptId(1), ConceptId(2), 1.0)],
        )
        .unwrap_err();
        assert!(matches!(err, InferenceError::WeightOutOfRange { .. }));
    }

    #[test]
    fn parent_and_child_indexes_agree() {
        let net = NoisyOrNetwork::from_parts(
            [(ConceptId(1), 0.1), (ConceptId(2), 0.2)],
            [(ConceptId(10), 0.01), (ConceptId(11), 0.01)],
            [
                (ConceptId(1), ConceptId(10), 0.5),
                (ConceptId(2), ConceptId(10), 0.3),
                (ConceptId(2), ConceptId(11), 0.2),
            ],
        )
        .unwrap();
        assert_eq!(net.parents(0).len(), 2);
        assert_eq!(net.children(1).len(), 2);
        assert_eq!(net.parents(1), &[(1, theta(0.2))]);
    }
}
