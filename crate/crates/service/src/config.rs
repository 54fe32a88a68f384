//! TOML configuration. Relative paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dxengine_core::inference::{NetworkParams, MAX_EXACT_SET};
use dxengine_core::ontology::{RootClass, RootConfig, SnapshotConfig, FINDING_SITE_TYPE_ID, ISA_TYPE_ID};
use dxengine_core::pipeline::SourcePaths;
use dxengine_core::ConceptId;
use serde::Deserialize;

use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub concepts: PathBuf,
    pub relations: PathBuf,
    pub descriptions: Option<PathBuf>,
    pub sites: PathBuf,
    pub disorders: PathBuf,
    pub findings: PathBuf,
    pub links: PathBuf,
    pub vectors: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OntologySection {
    #[serde(default = "default_isa")]
    pub isa_type_id: u64,
    /// Attribute type whose targets count toward site resolution; 0 disables it.
    #[serde(default = "default_site")]
    pub site_type_id: u64,
    /// Twelve root concept ids, in the order body structure, disorder,
    /// observable entity, finding, physical force, physical object, organism,
    /// procedure, product, situation, substance, value.
    pub roots: Vec<u64>,
}

fn default_isa() -> u64 {
    ISA_TYPE_ID.0
}

fn default_site() -> u64 {
    FINDING_SITE_TYPE_ID.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceSection {
    #[serde(default = "default_leak")]
    pub leak_default: f64,
    #[serde(default = "default_cap")]
    pub prior_cap: f64,
    #[serde(default = "default_k")]
    pub k_default: usize,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
    /// Finding id → leak probability.
    #[serde(default)]
    pub leak_overrides: BTreeMap<String, f64>,
}

impl Default for InferenceSection {
    fn default() -> Self {
        InferenceSection {
            leak_default: default_leak(),
            prior_cap: default_cap(),
            k_default: default_k(),
            top_n: default_top_n(),
            leak_overrides: BTreeMap::new(),
        }
    }
}

fn default_leak() -> f64 {
    0.001
}

fn default_cap() -> f64 {
    0.05
}

fn default_k() -> usize {
    8
}

fn default_top_n() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSection {
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default = "default_store")]
    pub case_store: PathBuf,
}

impl Default for ServerSection {
    fn default() -> Self {
        ServerSection {
            port: default_port(),
            case_store: default_store(),
        }
    }
}

fn default_port() -> u16 {
    8080
}

fn default_store() -> PathBuf {
    PathBuf::from("case-store")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    pub data: DataSection,
    pub ontology: OntologySection,
    #[serde(default)]
    pub inference: InferenceSection,
    #[serde(default)]
    pub server: ServerSection,
    /// Directory of the config file; set on load.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl AppConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: AppConfig =
            toml::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn source_paths(&self) -> SourcePaths {
        let d = &self.data;
        SourcePaths {
            concepts: self.resolve(&d.concepts),
            relations: self.resolve(&d.relations),
            descriptions: d.descriptions.as_deref().map(|p| self.resolve(p)),
            sites: self.resolve(&d.sites),
            disorders: self.resolve(&d.disorders),
            findings: self.resolve(&d.findings),
            links: self.resolve(&d.links),
            vectors: self.resolve(&d.vectors),
        }
    }

    pub fn case_store(&self) -> PathBuf {
        self.resolve(&self.server.case_store)
    }

    pub fn snapshot_config(&self) -> SnapshotConfig {
        SnapshotConfig {
            isa_type: ConceptId(self.ontology.isa_type_id),
            site_type: (self.ontology.site_type_id != 0).then_some(ConceptId(self.ontology.site_type_id)),
        }
    }

    pub fn root_config(&self) -> Result<RootConfig, ServiceError> {
        if self.ontology.roots.len() != RootClass::ALL.len() {
            return Err(ServiceError::Config(format!(
                "ontology.roots lists {} ids, expected {}",
                self.ontology.roots.len(),
                RootClass::ALL.len()
            )));
        }
        RootConfig::new(RootClass::ALL.iter().copied().zip(self.ontology.roots.iter().map(|i| ConceptId(*i))))
            .map_err(|e| ServiceError::Config(e.to_string()))
    }

    pub fn network_params(&self) -> Result<NetworkParams, ServiceError> {
        let mut leak_overrides = BTreeMap::new();
        for (k, v) in &self.inference.leak_overrides {
            let id: ConceptId = k
                .parse()
                .map_err(|_| ServiceError::Config(format!("leak override key `{k}` is not a concept id")))?;
            leak_overrides.insert(id, *v);
        }
        Ok(NetworkParams {
            leak_default: self.inference.leak_default,
            leak_overrides,
            prior_cap: self.inference.prior_cap,
        })
    }

    fn validate(&self) -> Result<(), ServiceError> {
        if self.inference.k_default > MAX_EXACT_SET {
            return Err(ServiceError::Config(format!(
                "inference.k_default {} exceeds {MAX_EXACT_SET}",
                self.inference.k_default
            )));
        }
        self.root_config()?;
        self.network_params()?;
        let p = self.source_paths();
        let required = [
            &p.concepts,
            &p.relations,
            &p.sites,
            &p.disorders,
            &p.findings,
            &p.links,
            &p.vectors,
        ];
        for path in required.into_iter().chain(p.descriptions.as_ref()) {
            if !path.exists() {
                return Err(ServiceError::Config(format!("data file {} does not exist", path.display())));
            }
        }
        Ok(())
    }
}
