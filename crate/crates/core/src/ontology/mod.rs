//! Concept snapshots, IS-A closure, root classification and anatomical sites.

mod closure;
mod roots;
mod sites;

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;
use tracing::warn;

use crate::tsv::{TsvError, TsvFile};
use crate::ConceptId;

pub use closure::{transitive_closure, ClosureTable};
pub use roots::{root_class, RootClass, RootConfig};
pub use sites::{coextension_class, resolve_site, CoextensionClass, SiteAssignment, SiteIndex, SiteKind};

/// Relationship type code for IS-A in the reference terminology.
pub const ISA_TYPE_ID: ConceptId = ConceptId(116_680_003);
/// Relationship type code for the finding-site attribute.
pub const FINDING_SITE_TYPE_ID: ConceptId = ConceptId(363_698_007);

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error(transparent)]
    Tsv(#[from] TsvError),
    #[error("{path}:{line}: duplicate concept id {id}")]
    DuplicateConcept {
        path: String,
        line: usize,
        id: ConceptId,
    },
    #[error("{path}:{line}: relationship references unknown concept {id}")]
    UnknownEndpoint {
        path: String,
        line: usize,
        id: ConceptId,
    },
    #[error("IS-A graph contains a cycle through concept {0}")]
    Cycle(ConceptId),
    #[error("unknown concept {0}")]
    UnknownConcept(ConceptId),
    #[error("concept {0} has no configured root class among its ancestors")]
    Unclassified(ConceptId),
    #[error("concept {concept} falls under two root classes: {first} and {second}")]
    AmbiguousRoot {
        concept: ConceptId,
        first: ConceptId,
        second: ConceptId,
    },
    #[error("root configuration: {0}")]
    RootConfig(String),
    #[error("site index: {0}")]
    SiteIndex(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub id: ConceptId,
    pub preferred_term: String,
    pub active: bool,
    pub synonyms: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IsAEdge {
    pub child: ConceptId,
    pub parent: ConceptId,
}

/// Relationship type codes recognised while loading a snapshot.
#[derive(Debug, Clone, Copy)]
pub struct SnapshotConfig {
    pub isa_type: ConceptId,
    /// Attribute rows of this type are kept as site links (source → body structure).
    pub site_type: Option<ConceptId>,
}

impl Default for SnapshotConfig {
    fn default() -> Self {
        SnapshotConfig {
            isa_type: ISA_TYPE_ID,
            site_type: Some(FINDING_SITE_TYPE_ID),
        }
    }
}

/// Row counts gathered while loading; nothing here is an error.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub concept_rows: usize,
    pub inactive_concepts: usize,
    pub relation_rows: usize,
    pub inactive_relations: usize,
    /// Active rows whose type is not IS-A. Site-typed rows are counted here too.
    pub non_isa_relations: usize,
    pub site_links: usize,
    /// Active IS-A rows touching an inactive concept.
    pub dropped_edges: usize,
    pub synonyms: usize,
    pub skipped_synonyms: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Ontology {
    concepts: BTreeMap<ConceptId, Concept>,
    edges: Vec<IsAEdge>,
    site_links: BTreeMap<ConceptId, Vec<ConceptId>>,
    report: LoadReport,
}

impl Ontology {
    /// Builds an ontology in memory. Edge endpoints must be known concepts.
    pub fn from_parts(
        concepts: impl IntoIterator<Item = Concept>,
        edges: impl IntoIterator<Item = IsAEdge>,
    ) -> Result<Self, OntologyError> {
        let mut map = BTreeMap::new();
        for c in concepts {
            let id = c.id;
            if map.insert(id, c).is_some() {
                return Err(OntologyError::DuplicateConcept {
                    path: "<memory>".into(),
                    line: 0,
                    id,
                });
            }
        }
        let mut edge_list = Vec::new();
        for e in edges {
            for id in [e.child, e.parent] {
                if !map.contains_key(&id) {
                    return Err(OntologyError::UnknownConcept(id));
                }
            }
            edge_list.push(e);
        }
        Ok(Ontology {
            concepts: map,
            edges: edge_list,
            site_links: BTreeMap::new(),
            report: LoadReport::default(),
        })
    }

    /// Convenience for tests and generators: anonymous active concepts.
    pub fn from_edges(
        ids: impl IntoIterator<Item = u64>,
        edges: impl IntoIterator<Item = (u64, u64)>,
    ) -> Result<Self, OntologyError> {
        let concepts = ids.into_iter().map(|id| Concept {
            id: ConceptId(id),
            preferred_term: format!("concept {id}"),
            active: true,
            synonyms: Vec::new(),
        });
        let edges = edges.into_iter().map(|(c, p)| IsAEdge {
            child: ConceptId(c),
            parent: ConceptId(p),
        });
        Ontology::from_parts(concepts, edges)
    }

    pub fn with_site_links(mut self, links: impl IntoIterator<Item = (ConceptId, ConceptId)>) -> Self {
        for (source, target) in links {
            self.site_links.entry(source).or_default().push(target);
        }
        for targets in self.site_links.values_mut() {
            targets.sort();
            targets.dedup();
        }
        self
    }

    pub fn concept(&self, id: ConceptId) -> Option<&Concept> {
        self.concepts.get(&id)
    }

    pub fn contains(&self, id: ConceptId) -> bool {
        self.concepts.contains_key(&id)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn edges(&self) -> &[IsAEdge] {
        &self.edges
    }

    pub fn site_links(&self) -> &BTreeMap<ConceptId, Vec<ConceptId>> {
        &self.site_links
    }

    pub fn report(&self) -> &LoadReport {
        &self.report
    }

    pub fn term(&self, id: ConceptId) -> Option<&str> {
        self.concepts.get(&id).map(|c| c.preferred_term.as_str())
    }
}

/// Loads concept, relationship and (optionally) synonym TSV files.
///
/// Inactive concepts and relationship rows are discarded. Active IS-A rows
/// that touch an inactive concept are dropped with a warning.
pub fn load_snapshot(
    concepts_path: impl AsRef<Path>,
    relations_path: impl AsRef<Path>,
    descriptions_path: Option<&Path>,
    config: &SnapshotConfig,
) -> Result<Ontology, OntologyError> {
    let mut report = LoadReport::default();

    let file = TsvFile::open(concepts_path)?;
    let mut concepts = BTreeMap::new();
    let mut inactive = BTreeMap::new();
    for row in file.rows() {
        file.expect_columns(&row, &[3])?;
        let id: ConceptId = file.parse(&row, 0, "concept id")?;
        let active = file.parse_flag(&row, 1)?;
        let term = row.fields[2].trim().to_string();
        report.concept_rows += 1;
        if concepts.contains_key(&id) || inactive.contains_key(&id) {
            return Err(OntologyError::DuplicateConcept {
                path: file.path().display().to_string(),
                line: row.line,
                id,
            });
        }
        if !active {
            report.inactive_concepts += 1;
            inactive.insert(id, ());
            continue;
        }
        if term.is_empty() {
            return Err(file.error(row.line, "active concept has an empty preferred term").into());
        }
        concepts.insert(
            id,
            Concept {
                id,
                preferred_term: term,
                active: true,
                synonyms: Vec::new(),
            },
        );
    }

    let file = TsvFile::open(relations_path)?;
    let mut edges = Vec::new();
    let mut site_links: BTreeMap<ConceptId, Vec<ConceptId>> = BTreeMap::new();
    for row in file.rows() {
        file.expect_columns(&row, &[4])?;
        let child: ConceptId = file.parse(&row, 0, "child id")?;
        let parent: ConceptId = file.parse(&row, 1, "parent id")?;
        let type_id: ConceptId = file.parse(&row, 2, "type id")?;
        let active = file.parse_flag(&row, 3)?;
        report.relation_rows += 1;
        if !active {
            report.inactive_relations += 1;
            continue;
        }
        for id in [child, parent] {
            if !concepts.contains_key(&id) && !inactive.contains_key(&id) {
                return Err(OntologyError::UnknownEndpoint {
                    path: file.path().display().to_string(),
                    line: row.line,
                    id,
                });
            }
        }
        let live = concepts.contains_key(&child) && concepts.contains_key(&parent);
        if type_id != config.isa_type {
            report.non_isa_relations += 1;
            if Some(type_id) == config.site_type && live {
                site_links.entry(child).or_default().push(parent);
                report.site_links += 1;
            }
            continue;
        }
        if !live {
            warn!(
                line = row.line,
                %child,
                %parent,
                "dropping IS-A row that references an inactive concept"
            );
            report.dropped_edges += 1;
            continue;
        }
        edges.push(IsAEdge { child, parent });
    }
    for targets in site_links.values_mut() {
        targets.sort();
        targets.dedup();
    }

    if let Some(path) = descriptions_path {
        let file = TsvFile::open(path)?;
        for row in file.rows() {
            file.expect_columns(&row, &[2])?;
            let id: ConceptId = file.parse(&row, 0, "concept id")?;
            let term = row.fields[1].trim();
            match concepts.get_mut(&id) {
                Some(c) if !term.is_empty() => {
                    if !c.synonyms.iter().any(|s| s.eq_ignore_ascii_case(term)) {
                        c.synonyms.push(term.to_string());
                    }
                    report.synonyms += 1;
                }
                _ => report.skipped_synonyms += 1,
            }
        }
    }

    Ok(Ontology {
        concepts,
        edges,
        site_links,
        report,
    })
}
