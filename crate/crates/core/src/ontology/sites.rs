use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClosureTable, Ontology, OntologyError};
use crate::tsv::TsvFile;
use crate::ConceptId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteKind {
    Organ { system: ConceptId },
    System,
}

/// Curated list of body-structure concepts that count as organs or systems.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SiteIndex {
    entries: BTreeMap<ConceptId, SiteKind>,
}

impl SiteIndex {
    pub fn new(entries: impl IntoIterator<Item = (ConceptId, SiteKind)>) -> Result<Self, OntologyError> {
        let entries: BTreeMap<_, _> = entries.into_iter().collect();
        for (id, kind) in &entries {
            if let SiteKind::Organ { system } = kind {
                if entries.get(system) != Some(&SiteKind::System) {
                    return Err(OntologyError::SiteIndex(format!(
                        "organ {id} names {system}, which is not a listed system"
                    )));
                }
            }
        }
        Ok(SiteIndex { entries })
    }

    /// `concept_id <TAB> organ|system <TAB> system_id` (blank for systems).
    pub fn load(path: impl AsRef<Path>) -> Result<Self, OntologyError> {
        let file = TsvFile::open(path)?;
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for row in file.rows() {
            file.expect_columns(&row, &[2, 3])?;
            let id: ConceptId = file.parse(&row, 0, "concept id")?;
            if !seen.insert(id) {
                return Err(file.error(row.line, format!("site {id} listed twice")).into());
            }
            let kind = match row.fields[1].trim() {
                "organ" => SiteKind::Organ {
                    system: file.parse(&row, 2, "system id")?,
                },
                "system" => {
                    if row.fields.get(2).is_some_and(|s| !s.trim().is_empty()) {
                        return Err(file.error(row.line, "system rows take no system id").into());
                    }
                    SiteKind::System
                }
                other => {
                    return Err(file
                        .error(row.line, format!("kind must be organ or system, found `{other}`"))
                        .into())
                }
            };
            entries.push((id, kind));
        }
        SiteIndex::new(entries)
    }

    pub fn kind(&self, concept: ConceptId) -> Option<SiteKind> {
        self.entries.get(&concept).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (ConceptId, SiteKind)> + '_ {
        self.entries.iter().map(|(id, k)| (*id, *k))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteAssignment {
    pub organ: Option<ConceptId>,
    pub system: Option<ConceptId>,
}

impl SiteAssignment {
    pub const EMPTY: SiteAssignment = SiteAssignment {
        organ: None,
        system: None,
    };
}

/// Organ and system reachable from a concept.
///
/// Reachable structures are the concept and its ancestors, the targets of
/// their site links, and the ancestors of those targets. The deepest organ
/// wins (smallest id on a tie) and brings its owning system; without an organ
/// the deepest reachable system is used.
pub fn resolve_site(
    closure: &ClosureTable,
    ontology: &Ontology,
    sites: &SiteIndex,
    concept: ConceptId,
) -> SiteAssignment {
    let links = ontology.site_links();
    let mut reachable: BTreeSet<ConceptId> = BTreeSet::new();
    for c in closure.ancestors_or_self(concept) {
        reachable.insert(c);
        if let Some(targets) = links.get(&c) {
            for t in targets {
                reachable.extend(closure.ancestors_or_self(*t));
            }
        }
    }

    let deepest = |pred: &dyn Fn(SiteKind) -> bool| {
        reachable
            .iter()
            .filter(|c| sites.kind(**c).is_some_and(pred))
            .map(|c| (closure.depth(*c).unwrap_or(0), *c))
            // max depth, then min id
            .min_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)))
            .map(|(_, c)| c)
    };

    if let Some(organ) = deepest(&|k| matches!(k, SiteKind::Organ { .. })) {
        let system = match sites.kind(organ) {
            Some(SiteKind::Organ { system }) => system,
            _ => unreachable!("organ filter"),
        };
        return SiteAssignment {
            organ: Some(organ),
            system: Some(system),
        };
    }
    SiteAssignment {
        organ: None,
        system: deepest(&|k| k == SiteKind::System),
    }
}

/// Shared anatomical scope of a disorder and a finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoextensionClass {
    DifferentSystem,
    SameSystemDifferentOrgan,
    SameSystemAndOrgan,
}

impl CoextensionClass {
    pub const ALL: [CoextensionClass; 3] = [
        CoextensionClass::SameSystemAndOrgan,
        CoextensionClass::SameSystemDifferentOrgan,
        CoextensionClass::DifferentSystem,
    ];

    pub fn code(self) -> &'static str {
        match self {
            CoextensionClass::SameSystemAndOrgan => "same_system_and_organ",
            CoextensionClass::SameSystemDifferentOrgan => "same_system_different_organ",
            CoextensionClass::DifferentSystem => "different_system",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        CoextensionClass::ALL.into_iter().find(|c| c.code() == code)
    }
}

pub fn coextension_class(a: SiteAssignment, b: SiteAssignment) -> CoextensionClass {
    match (a.organ, b.organ) {
        (Some(x), Some(y)) if x == y => return CoextensionClass::SameSystemAndOrgan,
        _ => {}
    }
    match (a.system, b.system) {
        (Some(x), Some(y)) if x == y => CoextensionClass::SameSystemDifferentOrgan,
        _ => CoextensionClass::DifferentSystem,
    }
}
