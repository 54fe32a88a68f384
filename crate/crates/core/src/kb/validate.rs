use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::KbTables;
use crate::ontology::Ontology;
use crate::ConceptId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DanglingId {
    pub table: &'static str,
    pub line: usize,
    pub id: ConceptId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DuplicateLink {
    pub disorder: ConceptId,
    pub finding: ConceptId,
    pub lines: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightViolation {
    pub line: usize,
    pub disorder: ConceptId,
    pub finding: ConceptId,
    pub weight: f64,
}

/// Everything wrong with a set of tables; empty when clean.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub dangling: Vec<DanglingId>,
    pub duplicate_links: Vec<DuplicateLink>,
    pub weight_violations: Vec<WeightViolation>,
    pub unlinked_disorders: Vec<ConceptId>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.dangling.is_empty()
            && self.duplicate_links.is_empty()
            && self.weight_violations.is_empty()
            && self.unlinked_disorders.is_empty()
    }
}

/// Reports dangling ids, repeated links, weights outside [0.09, 0.81] and
/// disorders without links. When an ontology is given, disorder, finding
/// and process ids must also exist there.
pub fn validate_kb(tables: &KbTables, ontology: Option<&Ontology>) -> ValidationReport {
    let mut report = ValidationReport::default();
    let in_ontology = |id: ConceptId| ontology.is_none_or(|o| o.contains(id));

    for d in &tables.disorders {
        for id in std::iter::once(d.id).chain(d.processes.iter().copied()) {
            if !in_ontology(id) {
                report.dangling.push(DanglingId { table: "disorders", line: d.line, id });
            }
        }
    }
    for f in &tables.findings {
        if !in_ontology(f.id) {
            report.dangling.push(DanglingId { table: "findings", line: f.line, id: f.id });
        }
    }

    let disorders: BTreeSet<_> = tables.disorders.iter().map(|d| d.id).collect();
    let findings: BTreeSet<_> = tables.findings.iter().map(|f| f.id).collect();
    let mut by_key: BTreeMap<(ConceptId, ConceptId), Vec<usize>> = BTreeMap::new();
    for l in &tables.links {
        if !disorders.contains(&l.disorder) {
            report.dangling.push(DanglingId { table: "links", line: l.line, id: l.disorder });
        }
        if !findings.contains(&l.finding) {
            report.dangling.push(DanglingId { table: "links", line: l.line, id: l.finding });
        }
        if let Some(w) = l.weight {
            if !(0.09 - 1e-9..=0.81 + 1e-9).contains(&w) {
                report.weight_violations.push(WeightViolation {
                    line: l.line,
                    disorder: l.disorder,
                    finding: l.finding,
                    weight: w,
                });
            }
        }
        by_key.entry((l.disorder, l.finding)).or_default().push(l.line);
    }
    for ((disorder, finding), lines) in &by_key {
        if lines.len() > 1 {
            report.duplicate_links.push(DuplicateLink {
                disorder: *disorder,
                finding: *finding,
                lines: lines.clone(),
            });
        }
    }
    let linked: BTreeSet<_> = tables.links.iter().map(|l| l.disorder).collect();
    report.unlinked_disorders = tables
        .disorders
        .iter()
        .map(|d| d.id)
        .filter(|id| !linked.contains(id))
        .collect();
    report
}
