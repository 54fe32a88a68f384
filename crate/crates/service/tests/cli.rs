mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dxengine_core::nlp::{Case, CaseFinding, Polarity};
use dxengine_service::eval::write_corpus;
use dxengine_service::{AppConfig, Snapshot};
use tempfile::TempDir;

fn dxengine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dxengine"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env("RUST_BACKTRACE", "0")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn cyclic_closure_fails_with_the_cycle() {
    let dir = common::fixtures().join("cyclic");
    let out = dxengine(&[
        "closure",
        "--concepts",
        s(&dir.join("concepts.tsv")),
        "--relations",
        s(&dir.join("relations.tsv")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cycle"), "{err}");
}

#[test]
fn closure_writes_pairs() {
    let (dir, config) = common::mini_copy();
    let pairs = dir.path().join("closure.tsv");
    let out = dxengine(&["closure", "--config", s(&config), "--out", s(&pairs)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = fs::read_to_string(&pairs).unwrap().lines().count();
    assert_eq!(report["pairs"].as_u64().unwrap() as usize, rows);
    assert!(rows > 0);
}

#[test]
fn ingest_tiers_compile_and_stats() {
    let (dir, config) = common::mini_copy();
    let out = dxengine(&["ingest", "--config", s(&config)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let tiers = dir.path().join("tiers.tsv");
    assert!(dxengine(&["tiers", "--config", s(&config), "--out", s(&tiers)]).status.success());
    assert_eq!(fs::read_to_string(&tiers).unwrap().lines().count(), 81);

    let compiled = dir.path().join("compiled");
    let out = dxengine(&["compile", "--config", s(&config), "--out", s(&compiled)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let hist = dir.path().join("hist.csv");
    let out = dxengine(&[
        "stats",
        "--config",
        s(&config),
        "--compiled",
        s(&compiled),
        "--histogram",
        s(&hist),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stats["total_links"], 80);
    assert_eq!(
        fs::read_to_string(&hist).unwrap(),
        fs::read_to_string(compiled.join("histogram.csv")).unwrap()
    );
}

#[test]
fn ingest_rejects_dangling_links() {
    let (dir, config) = common::mini_copy();
    let links = dir.path().join("links.tsv");
    let mut text = fs::read_to_string(&links).unwrap();
    text.push_str("60\t99999\tA\n");
    fs::write(&links, text).unwrap();
    let out = dxengine(&["ingest", "--config", s(&config)]);
    assert!(!out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!report["validation"]["dangling"].as_array().unwrap().is_empty());
}

#[test]
fn diagnose_writes_response_json() {
    let (dir, config) = common::mini_copy();
    let case = common::mini_cases()[0].clone();
    let target = dir.path().join("out.json");
    let out = dxengine(&["diagnose", "--config", s(&config), "--in", s(&case), "--out", s(&target)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let snap = Snapshot::build(&AppConfig::load(&config).unwrap()).unwrap();
    let input = dxengine_service::CaseInput::from_path(&case).unwrap();
    assert_eq!(
        fs::read_to_string(&target).unwrap(),
        dxengine_service::diagnose_to_json(&snap, &input).unwrap()
    );
}

#[test]
fn eval_rejects_an_empty_corpus() {
    let (dir, config) = common::mini_copy();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = dxengine(&["eval", "--config", s(&config), "--cases", s(&empty)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no case XML"));
}

#[test]
fn top_weight_corpus_ranks_every_truth_in_top_20() {
    let dir = TempDir::new().unwrap();
    let kb_dir = dir.path().join("kb");
    let out = dxengine(&["gen-kb", "--out", s(&kb_dir), "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let config = kb_dir.join("config.toml");
    let snap = Snapshot::build(&AppConfig::load(&config).unwrap()).unwrap();
    let kb = &snap.compiled.kb;
    let cases: Vec<Case> = kb
        .disorders()
        .map(|d| {
            let mut links: Vec<_> = kb.links_of(d.id).iter().collect();
            links.sort_by(|a, b| b.weight.cmp(&a.weight).then(a.finding.cmp(&b.finding)));
            Case {
                truth: Some(d.id),
                findings: links
                    .iter()
                    .take(3)
                    .map(|l| CaseFinding {
                        id: l.finding,
                        polarity: Polarity::Present,
                    })
                    .collect(),
                ..Case::default()
            }
        })
        .collect();
    assert_eq!(cases.len(), 100);
    let corpus = dir.path().join("corpus");
    write_corpus(&cases, &corpus).unwrap();
    let out = dxengine(&["eval", "--config", s(&config), "--cases", s(&corpus)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let result: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(result["cases"], 100);
    assert_eq!(result["top20"], 100, "{result}");
}

#[test]
fn generated_cases_evaluate() {
    let dir = TempDir::new().unwrap();
    let kb_dir = dir.path().join("kb");
    assert!(dxengine(&["gen-kb", "--out", s(&kb_dir), "--disorders", "40"]).status.success());
    let config = kb_dir.join("config.toml");
    let corpus = dir.path().join("cases");
    let out = dxengine(&[
        "gen-cases",
        "--config",
        s(&config),
        "--out",
        s(&corpus),
        "--count",
        "30",
        "--findings-per-case",
        "5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_dir(&corpus).unwrap().count(), 30);
    let out = dxengine(&["eval", "--config", s(&config), "--cases", s(&corpus)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let result: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(result["cases"], 30);
    assert!(result["top20"].as_u64().unwrap() >= 27, "{result}");
}

#[test]
fn serve_exits_nonzero_on_a_busy_port() {
    let (_dir, config) = common::mini_copy();
    let held = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = held.local_addr().unwrap().port().to_string();
    let out = dxengine(&["serve", "--config", s(&config), "--port", &port]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("port already in use"));
}
