//! Disorder, finding and link tables.
//!
//! Loading happens in two steps. [`KbTables::read`] only checks row syntax so
//! that [`validate_kb`] can report every integrity problem at once;
//! [`KnowledgeBase::from_tables`] enforces integrity and fails on the first
//! violation.

mod stats;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::VectorTier;
use crate::ontology::{
    coextension_class, resolve_site, root_class, ClosureTable, CoextensionClass, Ontology,
    OntologyError, RootClass, RootConfig, SiteIndex,
};
use crate::tsv::{TsvError, TsvFile};
use crate::weights::GridWeight;
use crate::ConceptId;

pub use stats::{kb_statistics, StatsReport};
pub use validate::{validate_kb, ValidationReport};

#[derive(Debug, Error)]
pub enum KbError {
    #[error(transparent)]
    Tsv(#[from] TsvError),
    #[error("{0}")]
    Ontology(#[from] OntologyError),
    #[error("{location}: {message}")]
    Integrity { location: String, message: String },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn integrity(location: impl Into<String>, message: impl Into<String>) -> KbError {
    KbError::Integrity {
        location: location.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Infection,
    Neoplasia,
    ConnectiveTissue,
    Other,
}

impl Category {
    pub fn code(self) -> &'static str {
        match self {
            Category::Infection => "infection",
            Category::Neoplasia => "neoplasia",
            Category::ConnectiveTissue => "connective_tissue",
            Category::Other => "other",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        [
            Category::Infection,
            Category::Neoplasia,
            Category::ConnectiveTissue,
            Category::Other,
        ]
        .into_iter()
        .find(|c| c.code() == code)
    }
}

/// Whether a finding's presence confirms and/or its absence refutes a disorder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concomitance {
    BothAssertNegate,
    AssertOnly,
    NegateOnly,
}

impl Concomitance {
    pub const ALL: [Concomitance; 3] = [
        Concomitance::BothAssertNegate,
        Concomitance::AssertOnly,
        Concomitance::NegateOnly,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Concomitance::BothAssertNegate => "B",
            Concomitance::AssertOnly => "A",
            Concomitance::NegateOnly => "N",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Concomitance::ALL.into_iter().find(|c| c.code() == code)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disorder {
    pub id: ConceptId,
    pub name: String,
    pub category: Category,
    /// Annual new cases per person.
    pub incidence: f64,
    pub processes: Vec<ConceptId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FindingDef {
    pub id: ConceptId,
    pub name: String,
    pub root: RootClass,
    pub synonyms: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiseaseFeatureLink {
    pub disorder: ConceptId,
    pub finding: ConceptId,
    pub concomitance: Concomitance,
    pub coextension: Option<CoextensionClass>,
    pub vector_tier: Option<VectorTier>,
    pub weight: Option<GridWeight>,
}

impl DiseaseFeatureLink {
    pub fn new(disorder: ConceptId, finding: ConceptId, concomitance: Concomitance) -> Self {
        DiseaseFeatureLink {
            disorder,
            finding,
            concomitance,
            coextension: None,
            vector_tier: None,
            weight: None,
        }
    }

    pub fn key(&self) -> (ConceptId, ConceptId) {
        (self.disorder, self.finding)
    }

    pub fn is_compiled(&self) -> bool {
        self.coextension.is_some() && self.vector_tier.is_some() && self.weight.is_some()
    }
}

// ---------------------------------------------------------------------------
// Raw tables

#[derive(Debug, Clone, PartialEq)]
pub struct DisorderRow {
    pub line: usize,
    pub id: ConceptId,
    pub name: String,
    pub category: Category,
    pub incidence: f64,
    pub processes: Vec<ConceptId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FindingRow {
    pub line: usize,
    pub id: ConceptId,
    pub name: String,
    pub synonyms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkRow {
    pub line: usize,
    pub disorder: ConceptId,
    pub finding: ConceptId,
    pub concomitance: Concomitance,
    pub coextension: Option<CoextensionClass>,
    /// Raw value as written; grid membership is checked later.
    pub weight: Option<f64>,
    pub vector_tier: Option<VectorTier>,
}

/// Syntactically valid rows, before any integrity check.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KbTables {
    pub disorders: Vec<DisorderRow>,
    pub findings: Vec<FindingRow>,
    pub links: Vec<LinkRow>,
}

impl KbTables {
    pub fn read(
        disorders_path: impl AsRef<Path>,
        findings_path: impl AsRef<Path>,
        links_path: impl AsRef<Path>,
    ) -> Result<Self, KbError> {
        Ok(KbTables {
            disorders: read_disorders(&TsvFile::open(disorders_path)?)?,
            findings: read_findings(&TsvFile::open(findings_path)?)?,
            links: read_links(&TsvFile::open(links_path)?)?,
        })
    }
}

fn split_list(raw: &str, sep: char) -> impl Iterator<Item = &str> {
    raw.split(sep).map(str::trim).filter(|s| !s.is_empty())
}

fn read_disorders(file: &TsvFile) -> Result<Vec<DisorderRow>, KbError> {
    let mut out = Vec::new();
    for row in file.rows() {
        file.expect_columns(&row, &[4, 5])?;
        let category = Category::from_code(row.fields[2].trim())
            .ok_or_else(|| file.error(row.line, format!("unknown category `{}`", row.fields[2])))?;
        let mut processes = Vec::new();
        for p in split_list(row.fields.get(4).copied().unwrap_or(""), ',') {
            processes.push(
                p.parse()
                    .map_err(|_| file.error(row.line, format!("invalid process id `{p}`")))?,
            );
        }
        out.push(DisorderRow {
            line: row.line,
            id: file.parse(&row, 0, "disorder id")?,
            name: row.fields[1].trim().to_string(),
            category,
            incidence: file.parse(&row, 3, "incidence")?,
            processes,
        });
    }
    Ok(out)
}

fn read_findings(file: &TsvFile) -> Result<Vec<FindingRow>, KbError> {
    let mut out = Vec::new();
    for row in file.rows() {
        file.expect_columns(&row, &[2, 3])?;
        out.push(FindingRow {
            line: row.line,
            id: file.parse(&row, 0, "finding id")?,
            name: row.fields[1].trim().to_string(),
            synonyms: split_list(row.fields.get(2).copied().unwrap_or(""), '|')
                .map(str::to_string)
                .collect(),
        });
    }
    Ok(out)
}

fn read_links(file: &TsvFile) -> Result<Vec<LinkRow>, KbError> {
    let mut out = Vec::new();
    for row in file.rows() {
        file.expect_columns(&row, &[3, 6])?;
        let concomitance = Concomitance::from_code(row.fields[2].trim()).ok_or_else(|| {
            file.error(row.line, format!("concomitance must be B, A or N, found `{}`", row.fields[2]))
        })?;
        let (coextension, weight, vector_tier) = if row.fields.len() == 6 {
            let coext = CoextensionClass::from_code(row.fields[3].trim()).ok_or_else(|| {
                file.error(row.line, format!("unknown co-extension `{}`", row.fields[3]))
            })?;
            let weight: f64 = file.parse(&row, 4, "weight")?;
            let tier = VectorTier::from_code(row.fields[5].trim()).ok_or_else(|| {
                file.error(row.line, format!("unknown vector tier `{}`", row.fields[5]))
            })?;
            (Some(coext), Some(weight), Some(tier))
        } else {
            (None, None, None)
        };
        out.push(LinkRow {
            line: row.line,
            disorder: file.parse(&row, 0, "disorder id")?,
            finding: file.parse(&row, 1, "finding id")?,
            concomitance,
            coextension,
            weight,
            vector_tier,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Knowledge base

/// Ontology pieces needed to resolve ids and classify findings.
#[derive(Debug, Clone, Copy)]
pub struct OntologyContext<'a> {
    pub ontology: &'a Ontology,
    pub closure: &'a ClosureTable,
    pub roots: &'a RootConfig,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KnowledgeBase {
    disorders: BTreeMap<ConceptId, Disorder>,
    findings: BTreeMap<ConceptId, FindingDef>,
    /// Sorted by (disorder, finding).
    links: Vec<DiseaseFeatureLink>,
}

impl KnowledgeBase {
    /// Assembles a knowledge base, enforcing referential integrity and the
    /// per-record invariants.
    pub fn new(
        disorders: impl IntoIterator<Item = Disorder>,
        findings: impl IntoIterator<Item = FindingDef>,
        links: impl IntoIterator<Item = DiseaseFeatureLink>,
    ) -> Result<Self, KbError> {
        let mut dmap = BTreeMap::new();
        for d in disorders {
            check_disorder(&d, &format!("disorder {}", d.id))?;
            let id = d.id;
            if dmap.insert(id, d).is_some() {
                return Err(integrity(format!("disorder {id}"), "duplicate disorder id"));
            }
        }
        let mut fmap = BTreeMap::new();
        for f in findings {
            check_finding(&f.name, &f.synonyms, &format!("finding {}", f.id))?;
            let id = f.id;
            if fmap.insert(id, f).is_some() {
                return Err(integrity(format!("finding {id}"), "duplicate finding id"));
            }
        }
        let mut lmap = BTreeMap::new();
        for l in links {
            let loc = format!("link {}->{}", l.disorder, l.finding);
            check_link(&l, &dmap, &fmap, &loc)?;
            if lmap.insert(l.key(), l).is_some() {
                return Err(integrity(loc, "duplicate link"));
            }
        }
        Ok(KnowledgeBase {
            disorders: dmap,
            findings: fmap,
            links: lmap.into_values().collect(),
        })
    }

    /// Converts raw rows, resolving every id against the ontology and
    /// classifying findings under their root class. Ontology synonyms are
    /// merged into each finding's synonym list.
    pub fn from_tables(tables: &KbTables, ctx: OntologyContext<'_>) -> Result<Self, KbError> {
        let resolve = |id: ConceptId, what: &str, line: usize| -> Result<(), KbError> {
            if ctx.ontology.contains(id) {
                Ok(())
            } else {
                Err(integrity(format!("{what} row {line}"), format!("unknown concept {id}")))
            }
        };

        let mut disorders = Vec::new();
        for r in &tables.disorders {
            resolve(r.id, "disorders", r.line)?;
            for p in &r.processes {
                resolve(*p, "disorders", r.line)?;
            }
            let d = Disorder {
                id: r.id,
                name: r.name.clone(),
                category: r.category,
                incidence: r.incidence,
                processes: r.processes.clone(),
            };
            check_disorder(&d, &format!("disorders row {}", r.line))?;
            disorders.push(d);
        }

        let mut findings = Vec::new();
        for r in &tables.findings {
            resolve(r.id, "findings", r.line)?;
            check_finding(&r.name, &r.synonyms, &format!("findings row {}", r.line))?;
            let root = root_class(ctx.closure, ctx.roots, r.id)?;
            let mut synonyms = r.synonyms.clone();
            if let Some(c) = ctx.ontology.concept(r.id) {
                for s in &c.synonyms {
                    let dup = s.eq_ignore_ascii_case(&r.name)
                        || synonyms.iter().any(|x| x.eq_ignore_ascii_case(s));
                    if !dup {
                        synonyms.push(s.clone());
                    }
                }
            }
            findings.push(FindingDef {
                id: r.id,
                name: r.name.clone(),
                root,
                synonyms,
            });
        }

        let known_d: BTreeSet<_> = disorders.iter().map(|d| d.id).collect();
        let known_f: BTreeSet<_> = findings.iter().map(|f| f.id).collect();
        let mut seen = BTreeMap::new();
        let mut links = Vec::new();
        for r in &tables.links {
            let loc = format!("links row {}", r.line);
            if !known_d.contains(&r.disorder) {
                return Err(integrity(loc, format!("dangling disorder id {}", r.disorder)));
            }
            if !known_f.contains(&r.finding) {
                return Err(integrity(loc, format!("dangling finding id {}", r.finding)));
            }
            if let Some(first) = seen.insert((r.disorder, r.finding), r.line) {
                return Err(integrity(loc, format!("duplicate link (first on row {first})")));
            }
            let weight = match r.weight {
                Some(w) => Some(
                    GridWeight::from_value(w)
                        .ok_or_else(|| integrity(&loc, format!("weight {w} is not a grid value")))?,
                ),
                None => None,
            };
            links.push(DiseaseFeatureLink {
                disorder: r.disorder,
                finding: r.finding,
                concomitance: r.concomitance,
                coextension: r.coextension,
                vector_tier: r.vector_tier,
                weight,
            });
        }
        KnowledgeBase::new(disorders, findings, links)
    }

    pub fn disorders(&self) -> impl ExactSizeIterator<Item = &Disorder> {
        self.disorders.values()
    }

    pub fn findings(&self) -> impl ExactSizeIterator<Item = &FindingDef> {
        self.findings.values()
    }

    pub fn links(&self) -> &[DiseaseFeatureLink] {
        &self.links
    }

    pub fn disorder(&self, id: ConceptId) -> Option<&Disorder> {
        self.disorders.get(&id)
    }

    pub fn finding(&self, id: ConceptId) -> Option<&FindingDef> {
        self.findings.get(&id)
    }

    pub fn link(&self, disorder: ConceptId, finding: ConceptId) -> Option<&DiseaseFeatureLink> {
        self.links
            .binary_search_by(|l| l.key().cmp(&(disorder, finding)))
            .ok()
            .map(|i| &self.links[i])
    }

    pub fn links_of(&self, disorder: ConceptId) -> &[DiseaseFeatureLink] {
        let start = self.links.partition_point(|l| l.disorder < disorder);
        let end = self.links.partition_point(|l| l.disorder <= disorder);
        &self.links[start..end]
    }

    pub fn is_compiled(&self) -> bool {
        self.links.iter().all(DiseaseFeatureLink::is_compiled)
    }

    /// Fills every link's co-extension class from the organ/system sites of
    /// its disorder and finding.
    pub fn assign_coextension(&mut self, closure: &ClosureTable, ontology: &Ontology, sites: &SiteIndex) {
        let mut cache = BTreeMap::new();
        let mut site = |id: ConceptId| *cache.entry(id).or_insert_with(|| resolve_site(closure, ontology, sites, id));
        for l in &mut self.links {
            let d = site(l.disorder);
            let f = site(l.finding);
            l.coextension = Some(coextension_class(d, f));
        }
    }

    pub(crate) fn links_mut(&mut self) -> &mut [DiseaseFeatureLink] {
        &mut self.links
    }

    /// Canonical TSV text for the disorders, findings and links tables.
    pub fn to_tsv(&self) -> (String, String, String) {
        let mut disorders = String::new();
        for d in self.disorders.values() {
            let procs: Vec<String> = d.processes.iter().map(|p| p.to_string()).collect();
            let _ = writeln!(
                disorders,
                "{}\t{}\t{}\t{}\t{}",
                d.id,
                d.name,
                d.category.code(),
                d.incidence,
                procs.join(",")
            );
        }
        let mut findings = String::new();
        for f in self.findings.values() {
            let _ = writeln!(findings, "{}\t{}\t{}", f.id, f.name, f.synonyms.join("|"));
        }
        let mut links = String::new();
        for l in &self.links {
            let _ = write!(links, "{}\t{}\t{}", l.disorder, l.finding, l.concomitance.code());
            if let (Some(c), Some(w), Some(t)) = (l.coextension, l.weight, l.vector_tier) {
                let _ = write!(links, "\t{}\t{}\t{}", c.code(), w, t.code());
            }
            links.push('\n');
        }
        (disorders, findings, links)
    }

    pub fn save(
        &self,
        disorders_path: impl AsRef<Path>,
        findings_path: impl AsRef<Path>,
        links_path: impl AsRef<Path>,
    ) -> Result<(), KbError> {
        let (d, f, l) = self.to_tsv();
        for (path, body) in [
            (disorders_path.as_ref(), d),
            (findings_path.as_ref(), f),
            (links_path.as_ref(), l),
        ] {
            std::fs::write(path, body).map_err(|source| KbError::Write {
                path: path.to_path_buf(),
                source,
            })?;
        }
        Ok(())
    }
}

/// Reads the three tables and resolves them against the ontology.
pub fn load_kb(
    disorders_path: impl AsRef<Path>,
    findings_path: impl AsRef<Path>,
    links_path: impl AsRef<Path>,
    ctx: OntologyContext<'_>,
) -> Result<KnowledgeBase, KbError> {
    let tables = KbTables::read(disorders_path, findings_path, links_path)?;
    KnowledgeBase::from_tables(&tables, ctx)
}

fn check_disorder(d: &Disorder, loc: &str) -> Result<(), KbError> {
    if d.name.trim().is_empty() {
        return Err(integrity(loc, "empty disorder name"));
    }
    if !(d.incidence > 0.0 && d.incidence < 1.0) {
        return Err(integrity(loc, format!("incidence {} outside (0, 1)", d.incidence)));
    }
    Ok(())
}

fn check_finding(name: &str, synonyms: &[String], loc: &str) -> Result<(), KbError> {
    if name.trim().is_empty() {
        return Err(integrity(loc, "empty finding name"));
    }
    let mut seen = BTreeSet::new();
    for s in synonyms {
        if !seen.insert(s.to_lowercase()) {
            return Err(integrity(loc, format!("synonym `{s}` repeated")));
        }
    }
    Ok(())
}

fn check_link(
    l: &DiseaseFeatureLink,
    disorders: &BTreeMap<ConceptId, Disorder>,
    findings: &BTreeMap<ConceptId, FindingDef>,
    loc: &str,
) -> Result<(), KbError> {
    if !disorders.contains_key(&l.disorder) {
        return Err(integrity(loc, format!("dangling disorder id {}", l.disorder)));
    }
    if !findings.contains_key(&l.finding) {
        return Err(integrity(loc, format!("dangling finding id {}", l.finding)));
    }
    Ok(())
}
