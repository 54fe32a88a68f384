#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use tempfile::TempDir;

pub const MINI_FILES: [&str; 8] = [
    "concepts.tsv",
    "relations.tsv",
    "descriptions.tsv",
    "sites.tsv",
    "disorders.tsv",
    "findings.tsv",
    "links.tsv",
    "vectors.txt",
];

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Copies the mini fixture into a temp dir with a local case store and
/// returns the directory and its config path.
pub fn mini_copy() -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    for f in MINI_FILES {
        fs::copy(fixtures().join("mini").join(f), dir.path().join(f)).unwrap();
    }
    let config = mini_config(0.001);
    let path = dir.path().join("config.toml");
    fs::write(&path, config).unwrap();
    (dir, path)
}

pub fn mini_config(leak: f64) -> String {
    let text = fs::read_to_string(fixtures().join("mini/config.toml")).unwrap();
    text.replace("leak_default = 0.001", &format!("leak_default = {leak}"))
        .replace("case_store = \"../../target/mini-case-store\"", "case_store = \"store\"")
}

pub fn mini_cases() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(fixtures().join("mini/cases"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
}

pub fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => "application/json",
        Some("xml") => "application/xml",
        _ => "text/plain",
    }
}
