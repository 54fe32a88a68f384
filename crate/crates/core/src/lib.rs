//! Diagnostic knowledge compiler and variational noisy-OR inference.
//!
//! The pipeline runs in stages:
//!
//! 1. [`ontology`] loads an IS-A snapshot, closes it transitively, classifies
//!    concepts under the configured root classes and resolves organ/system sites.
//! 2. [`kb`] loads disorders, findings and disorder–finding links.
//! 3. [`embeddings`] bins every link by the cosine distance of its phrase vectors.
//! 4. [`weights`] compiles concomitance, co-extension and vector tier into one of
//!    nine grid weights.
//! 5. [`inference`] builds a two-layer noisy-OR network and ranks disorders, either
//!    by exact enumeration or by the conjugate-bound variational method.
//! 6. [`nlp`] turns free text or case XML into evidence.

pub mod embeddings;
pub mod ids;
pub mod inference;
pub mod kb;
pub mod nlp;
pub mod ontology;
pub mod pipeline;
pub mod synth;
pub mod tsv;
pub mod weights;

pub use ids::ConceptId;
