//! End-to-end compilation from source files to a weighted knowledge base.

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::embeddings::{assign_vector_tiers, link_distances, load_vectors, EmbeddingError, LinkDistance, VectorStore, VectorTier};
use crate::kb::{load_kb, KbError, KnowledgeBase, OntologyContext};
use crate::ontology::{load_snapshot, transitive_closure, ClosureTable, Ontology, OntologyError, RootConfig, SiteIndex, SnapshotConfig};
use crate::weights::{compile_all, WeightError, WeightHistogram};
use crate::ConceptId;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Weight(#[from] WeightError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourcePaths {
    pub concepts: PathBuf,
    pub relations: PathBuf,
    pub descriptions: Option<PathBuf>,
    pub sites: PathBuf,
    pub disorders: PathBuf,
    pub findings: PathBuf,
    pub links: PathBuf,
    pub vectors: PathBuf,
}

impl SourcePaths {
    /// The conventional file names inside one directory.
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        let dir = dir.into();
        let descriptions = dir.join("descriptions.tsv");
        SourcePaths {
            concepts: dir.join("concepts.tsv"),
            relations: dir.join("relations.tsv"),
            descriptions: descriptions.exists().then_some(descriptions),
            sites: dir.join("sites.tsv"),
            disorders: dir.join("disorders.tsv"),
            findings: dir.join("findings.tsv"),
            links: dir.join("links.tsv"),
            vectors: dir.join("vectors.txt"),
        }
    }
}

/// Ontology, closure and site index.
#[derive(Debug, Clone)]
pub struct OntologyBundle {
    pub ontology: Ontology,
    pub closure: ClosureTable,
    pub roots: RootConfig,
    pub sites: SiteIndex,
}

pub fn load_ontology(
    paths: &SourcePaths,
    snapshot: &SnapshotConfig,
    roots: RootConfig,
) -> Result<OntologyBundle, PipelineError> {
    let ontology = load_snapshot(&paths.concepts, &paths.relations, paths.descriptions.as_deref(), snapshot)?;
    let closure = transitive_closure(&ontology)?;
    let sites = SiteIndex::load(&paths.sites)?;
    Ok(OntologyBundle {
        ontology,
        closure,
        roots,
        sites,
    })
}

/// Loads the knowledge base and assigns co-extension classes.
pub fn load_classified_kb(paths: &SourcePaths, onto: &OntologyBundle) -> Result<KnowledgeBase, PipelineError> {
    let mut kb = load_kb(
        &paths.disorders,
        &paths.findings,
        &paths.links,
        OntologyContext {
            ontology: &onto.ontology,
            closure: &onto.closure,
            roots: &onto.roots,
        },
    )?;
    kb.assign_coextension(&onto.closure, &onto.ontology, &onto.sites);
    Ok(kb)
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub onto: OntologyBundle,
    pub vectors: VectorStore,
    pub distances: Vec<LinkDistance>,
    pub tiers: BTreeMap<(ConceptId, ConceptId), VectorTier>,
    pub kb: KnowledgeBase,
    pub histogram: WeightHistogram,
}

/// Every stage from source files to grid weights.
pub fn compile_sources(
    paths: &SourcePaths,
    snapshot: &SnapshotConfig,
    roots: RootConfig,
) -> Result<Compiled, PipelineError> {
    let onto = load_ontology(paths, snapshot, roots)?;
    let kb = load_classified_kb(paths, &onto)?;
    let vectors = load_vectors(&paths.vectors)?;
    let distances = link_distances(&vectors, &kb);
    let tiers = assign_vector_tiers(&distances)?;
    let (kb, histogram) = compile_all(&kb, &tiers)?;
    Ok(Compiled {
        onto,
        vectors,
        distances,
        tiers,
        kb,
        histogram,
    })
}
