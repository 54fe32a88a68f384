use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ClosureTable, OntologyError};
use crate::ConceptId;

/// The twelve top-level classes a concept can fall under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootClass {
    BodyStructure,
    Disorder,
    ObservableEntity,
    Finding,
    PhysicalForce,
    PhysicalObject,
    Organism,
    Procedure,
    Product,
    Situation,
    Substance,
    Value,
}

impl RootClass {
    pub const ALL: [RootClass; 12] = [
        RootClass::BodyStructure,
        RootClass::Disorder,
        RootClass::ObservableEntity,
        RootClass::Finding,
        RootClass::PhysicalForce,
        RootClass::PhysicalObject,
        RootClass::Organism,
        RootClass::Procedure,
        RootClass::Product,
        RootClass::Situation,
        RootClass::Substance,
        RootClass::Value,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RootClass::BodyStructure => "body_structure",
            RootClass::Disorder => "disorder",
            RootClass::ObservableEntity => "observable_entity",
            RootClass::Finding => "finding",
            RootClass::PhysicalForce => "physical_force",
            RootClass::PhysicalObject => "physical_object",
            RootClass::Organism => "organism",
            RootClass::Procedure => "procedure",
            RootClass::Product => "product",
            RootClass::Situation => "situation",
            RootClass::Substance => "substance",
            RootClass::Value => "value",
        }
    }
}

impl fmt::Display for RootClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RootClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RootClass::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown root class `{s}`"))
    }
}

/// Maps the twelve configured root concepts to their class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootConfig {
    by_concept: BTreeMap<ConceptId, RootClass>,
}

impl RootConfig {
    /// Requires exactly one concept per class.
    pub fn new(
        entries: impl IntoIterator<Item = (RootClass, ConceptId)>,
    ) -> Result<Self, OntologyError> {
        let mut by_concept = BTreeMap::new();
        let mut by_class = BTreeMap::new();
        for (class, id) in entries {
            if by_class.insert(class, id).is_some() {
                return Err(OntologyError::RootConfig(format!("class {class} listed twice")));
            }
            if by_concept.insert(id, class).is_some() {
                return Err(OntologyError::RootConfig(format!("concept {id} listed twice")));
            }
        }
        if let Some(missing) = RootClass::ALL.iter().find(|c| !by_class.contains_key(c)) {
            return Err(OntologyError::RootConfig(format!("class {missing} has no concept")));
        }
        Ok(RootConfig { by_concept })
    }

    /// Concept ids of the international reference release.
    pub fn reference_release() -> Self {
        let ids = [
            (RootClass::BodyStructure, 123_037_004),
            (RootClass::Disorder, 64_572_001),
            (RootClass::ObservableEntity, 363_787_002),
            (RootClass::Finding, 404_684_003),
            (RootClass::PhysicalForce, 78_621_006),
            (RootClass::PhysicalObject, 260_787_004),
            (RootClass::Organism, 410_607_006),
            (RootClass::Procedure, 71_388_002),
            (RootClass::Product, 373_873_005),
            (RootClass::Situation, 243_796_009),
            (RootClass::Substance, 105_590_001),
            (RootClass::Value, 362_981_000),
        ];
        RootConfig::new(ids.map(|(c, id)| (c, ConceptId(id)))).expect("twelve distinct roots")
    }

    pub fn class_of(&self, concept: ConceptId) -> Option<RootClass> {
        self.by_concept.get(&concept).copied()
    }

    pub fn concept_of(&self, class: RootClass) -> ConceptId {
        *self
            .by_concept
            .iter()
            .find(|(_, c)| **c == class)
            .map(|(id, _)| id)
            .expect("every class configured")
    }

    pub fn entries(&self) -> impl Iterator<Item = (ConceptId, RootClass)> + '_ {
        self.by_concept.iter().map(|(id, c)| (*id, *c))
    }
}

/// Class of the unique configured root among `concept` and its ancestors.
///
/// A root that is itself an ancestor of another reachable root is shadowed by
/// the more specific one (in the reference release, disorders sit below
/// clinical findings). Incomparable roots are ambiguous.
pub fn root_class(
    closure: &ClosureTable,
    roots: &RootConfig,
    concept: ConceptId,
) -> Result<RootClass, OntologyError> {
    if !closure.contains(concept) {
        return Err(OntologyError::UnknownConcept(concept));
    }
    let found: Vec<ConceptId> = closure
        .ancestors_or_self(concept)
        .filter(|c| roots.class_of(*c).is_some())
        .collect();
    let specific: Vec<ConceptId> = found
        .iter()
        .copied()
        .filter(|r| !found.iter().any(|other| closure.is_ancestor(*other, *r)))
        .collect();
    match specific.as_slice() {
        [] => Err(OntologyError::Unclassified(concept)),
        [only] => Ok(roots.class_of(*only).expect("filtered to roots")),
        [first, second, ..] => Err(OntologyError::AmbiguousRoot {
            concept,
            first: *first,
            second: *second,
        }),
    }
}
