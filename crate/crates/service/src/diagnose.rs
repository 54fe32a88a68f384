//! The single diagnosis path shared by the CLI and the HTTP API.

use std::path::Path;

use dxengine_core::inference::{
    rank_differential, variational_posteriors, Demographics, Differential, Evidence, VariationalConfig,
};
use dxengine_core::nlp::{case_evidence, parse_case_xml, Case};
use dxengine_core::ConceptId;
use serde::{Deserialize, Serialize};

use crate::{ServiceError, Snapshot};

/// A case in one of the accepted encodings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaseInput {
    Json(String),
    Xml(String),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonCase {
    #[serde(default)]
    positive: Vec<ConceptId>,
    #[serde(default)]
    negative: Vec<ConceptId>,
    #[serde(default)]
    demographics: Demographics,
}

impl CaseInput {
    /// Chooses the encoding from a media type, ignoring parameters.
    pub fn from_content_type(content_type: &str, body: String) -> Result<Self, ServiceError> {
        let media = content_type.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
        match media.as_str() {
            "application/json" => Ok(CaseInput::Json(body)),
            "application/xml" | "text/xml" => Ok(CaseInput::Xml(body)),
            "text/plain" => Ok(CaseInput::Text(body)),
            _ => Err(ServiceError::UnsupportedMedia(content_type.to_string())),
        }
    }

    /// Chooses the encoding from the file extension; anything other than
    /// `.json` or `.xml` is read as plain text.
    pub fn from_path(path: &Path) -> Result<Self, ServiceError> {
        let body = std::fs::read_to_string(path).map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))?;
        Ok(match path.extension().and_then(|e| e.to_str()) {
            Some("json") => CaseInput::Json(body),
            Some("xml") => CaseInput::Xml(body),
            _ => CaseInput::Text(body),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CaseInput::Json(_) => "json",
            CaseInput::Xml(_) => "xml",
            CaseInput::Text(_) => "txt",
        }
    }

    pub fn body(&self) -> &str {
        match self {
            CaseInput::Json(b) | CaseInput::Xml(b) | CaseInput::Text(b) => b,
        }
    }

    pub fn evidence(&self, snapshot: &Snapshot) -> Result<Evidence, ServiceError> {
        match self {
            CaseInput::Json(body) => {
                let c: JsonCase =
                    serde_json::from_str(body).map_err(|e| ServiceError::BadInput(format!("JSON case: {e}")))?;
                for id in c.positive.iter().chain(&c.negative) {
                    if !snapshot.lexicon.contains_finding(*id) {
                        return Err(dxengine_core::nlp::NlpError::UnknownFinding(*id).into());
                    }
                }
                Ok(Evidence::new(c.positive, c.negative)?.with_demographics(c.demographics))
            }
            CaseInput::Xml(body) => Ok(case_evidence(&parse_case_xml(body)?, &snapshot.lexicon)?),
            CaseInput::Text(body) => Ok(case_evidence(&Case::from_text(body.clone()), &snapshot.lexicon)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceEcho {
    pub positive: Vec<ConceptId>,
    pub negative: Vec<ConceptId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Natural-log upper bound on the evidence probability.
    pub bound: f64,
    pub exact_set: Vec<ConceptId>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosisResponse {
    pub fingerprint: String,
    pub evidence: EvidenceEcho,
    pub differential: Differential,
    pub diagnostics: Diagnostics,
    pub demographics: Demographics,
}

/// Marginals for every disorder, in network order, plus diagnostics.
pub fn posteriors(snapshot: &Snapshot, ev: &Evidence) -> Result<(Vec<(ConceptId, f64)>, Diagnostics), ServiceError> {
    let cfg = VariationalConfig {
        exact_count: Some(snapshot.k_default.min(ev.positive().len())),
        ..VariationalConfig::default()
    };
    let (marginals, state) = variational_posteriors(&snapshot.network, ev, &cfg)?;
    let by_id = snapshot.network.disorder_ids().iter().copied().zip(marginals).collect();
    Ok((
        by_id,
        Diagnostics {
            bound: state.bound,
            exact_set: state.exact_set,
            iterations: state.iterations,
        },
    ))
}

pub fn diagnose(snapshot: &Snapshot, input: &CaseInput) -> Result<DiagnosisResponse, ServiceError> {
    let ev = input.evidence(snapshot)?;
    let (by_id, diagnostics) = posteriors(snapshot, &ev)?;
    let differential = rank_differential(
        &by_id,
        &snapshot.compiled.kb,
        &ev,
        snapshot.top_n,
        Some(&snapshot.compiled.onto.ontology),
    );
    Ok(DiagnosisResponse {
        fingerprint: snapshot.fingerprint.clone(),
        evidence: EvidenceEcho {
            positive: ev.positive().iter().copied().collect(),
            negative: ev.negative().iter().copied().collect(),
        },
        differential,
        diagnostics,
        demographics: ev.demographics.clone(),
    })
}

/// Pretty-printed response JSON; both entry points emit exactly these bytes.
pub fn diagnose_to_json(snapshot: &Snapshot, input: &CaseInput) -> Result<String, ServiceError> {
    let r = diagnose(snapshot, input)?;
    serde_json::to_string_pretty(&r).map_err(|e| ServiceError::Io(e.to_string()))
}
