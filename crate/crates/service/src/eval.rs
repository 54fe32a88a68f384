//! Top-k evaluation over a directory of case XML files.

use std::fs;
use std::path::Path;

use dxengine_core::nlp::{case_evidence, parse_case_xml, write_case_xml, Case};
use dxengine_core::ConceptId;
use serde::Serialize;

use crate::diagnose::posteriors;
use crate::{ServiceError, Snapshot};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseRank {
    pub file: String,
    pub truth: ConceptId,
    /// 1-based position of the truth in the full ranking.
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub cases: usize,
    pub skipped: usize,
    pub top1: usize,
    pub top5: usize,
    pub top20: usize,
    pub ranks: Vec<CaseRank>,
}

impl EvalResult {
    pub fn hit_rate(&self, hits: usize) -> f64 {
        if self.cases == 0 {
            0.0
        } else {
            hits as f64 / self.cases as f64
        }
    }
}

/// Ranks each case's truth among all disorders (posterior descending, ties to
/// the lower id). Cases without a truth attribute are skipped with a warning.
pub fn eval_run(corpus: &Path, snapshot: &Snapshot) -> Result<EvalResult, ServiceError> {
    let io = |e: std::io::Error| ServiceError::Io(format!("{}: {e}", corpus.display()));
    let mut files: Vec<_> = fs::read_dir(corpus)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "xml"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(ServiceError::BadInput(format!("{} holds no case XML files", corpus.display())));
    }
    let mut result = EvalResult {
        cases: 0,
        skipped: 0,
        top1: 0,
        top5: 0,
        top20: 0,
        ranks: Vec::new(),
    };
    for path in files {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let text = fs::read_to_string(&path).map_err(io)?;
        let case = parse_case_xml(&text).map_err(|e| ServiceError::BadInput(format!("{name}: {e}")))?;
        let Some(truth) = case.truth else {
            tracing::warn!(file = %name, "case has no truth attribute; skipped");
            result.skipped += 1;
            continue;
        };
        let ev = case_evidence(&case, &snapshot.lexicon).map_err(|e| ServiceError::BadInput(format!("{name}: {e}")))?;
        let (mut by_id, _) = posteriors(snapshot, &ev)?;
        by_id.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let rank = by_id.iter().position(|(id, _)| *id == truth).map(|i| i + 1);
        result.cases += 1;
        for (k, slot) in [(1, &mut result.top1), (5, &mut result.top5), (20, &mut result.top20)] {
            if rank.is_some_and(|r| r <= k) {
                *slot += 1;
            }
        }
        result.ranks.push(CaseRank { file: name, truth, rank });
    }
    Ok(result)
}

/// Writes `case_0001.xml`, `case_0002.xml`, … into `dir`.
pub fn write_corpus(cases: &[Case], dir: &Path) -> Result<(), ServiceError> {
    let io = |e: std::io::Error| ServiceError::Io(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    for (i, c) in cases.iter().enumerate() {
        fs::write(dir.join(format!("case_{:04}.xml", i + 1)), write_case_xml(c)).map_err(io)?;
    }
    Ok(())
}
