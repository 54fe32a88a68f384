//! Immutable compiled state shared by all requests.

use std::collections::BTreeSet;

use dxengine_core::inference::{build_network, NetworkParams, NoisyOrNetwork};
use dxengine_core::nlp::{build_lexicon, Lexicon};
use dxengine_core::pipeline::{compile_sources, Compiled};
use sha2::{Digest, Sha256};

use crate::{AppConfig, ServiceError};

pub struct Snapshot {
    pub compiled: Compiled,
    pub network: NoisyOrNetwork,
    pub lexicon: Lexicon,
    pub params: NetworkParams,
    pub k_default: usize,
    pub top_n: usize,
    /// SHA-256 over the compiled tables, inference settings and process names.
    pub fingerprint: String,
}

impl Snapshot {
    pub fn build(cfg: &AppConfig) -> Result<Self, ServiceError> {
        let compiled = compile_sources(&cfg.source_paths(), &cfg.snapshot_config(), cfg.root_config()?)?;
        let params = cfg.network_params()?;
        let network = build_network(&compiled.kb, &params)?;
        let lexicon = build_lexicon(&compiled.kb)?;
        let fingerprint = fingerprint(&compiled, &params, cfg.inference.k_default, cfg.inference.top_n);
        Ok(Snapshot {
            compiled,
            network,
            lexicon,
            params,
            k_default: cfg.inference.k_default,
            top_n: cfg.inference.top_n,
            fingerprint,
        })
    }
}

fn fingerprint(c: &Compiled, params: &NetworkParams, k: usize, top_n: usize) -> String {
    let mut h = Sha256::new();
    let (d, f, l) = c.kb.to_tsv();
    for part in [d, f, l] {
        h.update(part.as_bytes());
        h.update([0]);
    }
    h.update(format!("leak={:?};cap={:?};k={k};top={top_n}\n", params.leak_default, params.prior_cap));
    for (id, leak) in &params.leak_overrides {
        h.update(format!("{id}={leak:?}\n"));
    }
    let processes: BTreeSet<_> = c.kb.disorders().flat_map(|d| d.processes.iter().copied()).collect();
    for p in processes {
        h.update(format!("{p}:{}\n", c.onto.ontology.term(p).unwrap_or("")));
    }
    hex::encode(h.finalize())
}
