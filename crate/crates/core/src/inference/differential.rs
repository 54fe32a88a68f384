//! Ranked differential with suggested confirmatory findings.

use serde::Serialize;

use super::Evidence;
use crate::kb::{Category, Concomitance, KnowledgeBase};
use crate::ontology::Ontology;
use crate::ConceptId;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessRef {
    pub id: ConceptId,
    /// Preferred term when the ontology knows the concept.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuggestedTest {
    pub finding_id: ConceptId,
    pub name: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferentialEntry {
    pub disorder_id: ConceptId,
    pub name: String,
    pub category: Category,
    pub posterior: f64,
    pub processes: Vec<ProcessRef>,
    pub suggested_tests: Vec<SuggestedTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Differential {
    pub entries: Vec<DifferentialEntry>,
}

/// Top `top_n` disorders by marginal, ties to the lower id. Confirmatory
/// findings are the disorder's both-assert-and-negate links not already in
/// the evidence, heaviest first.
pub fn rank_differential(
    marginals: &[(ConceptId, f64)],
    kb: &KnowledgeBase,
    evidence: &Evidence,
    top_n: usize,
    ontology: Option<&Ontology>,
) -> Differential {
    let mut ranked: Vec<(ConceptId, f64)> = marginals
        .iter()
        .copied()
        .filter(|(id, _)| kb.disorder(*id).is_some())
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(top_n);

    let entries = ranked
        .into_iter()
        .map(|(id, posterior)| {
            let d = kb.disorder(id).expect("filtered");
            let mut tests: Vec<SuggestedTest> = kb
                .links_of(id)
                .iter()
                .filter(|l| l.concomitance == Concomitance::BothAssertNegate && !evidence.contains(l.finding))
                .map(|l| SuggestedTest {
                    finding_id: l.finding,
                    name: kb.finding(l.finding).map(|f| f.name.clone()).unwrap_or_default(),
                    weight: l.weight.map_or(0.0, |w| w.value()),
                })
                .collect();
            tests.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.finding_id.cmp(&b.finding_id)));
            DifferentialEntry {
                disorder_id: id,
                name: d.name.clone(),
                category: d.category,
                posterior,
                processes: d
                    .processes
                    .iter()
                    .map(|p| ProcessRef {
                        id: *p,
                        name: ontology.and_then(|o| o.term(*p)).map(str::to_owned),
                    })
                    .collect(),
                suggested_tests: tests,
            }
        })
        .collect();
    Differential { entries }
}
