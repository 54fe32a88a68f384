use dxengine_core::inference::{build_network, rank_differential, variational_posteriors, NetworkParams, VariationalConfig};
use dxengine_core::kb::kb_statistics;
use dxengine_core::nlp::{build_lexicon, case_evidence, parse_case_xml, write_case_xml};
use dxengine_core::ontology::{RootConfig, SnapshotConfig};
use dxengine_core::pipeline::{compile_sources, Compiled, SourcePaths};
use dxengine_core::synth::{generate_cases, synthetic_kb, synthetic_roots, SyntheticSpec};

fn compiled(dir: &std::path::Path) -> Compiled {
    synthetic_kb(&SyntheticSpec::default()).write_to(dir).unwrap();
    compile_sources(&SourcePaths::in_dir(dir), &SnapshotConfig::default(), RootConfig::new(synthetic_roots()).unwrap())
        .unwrap()
}

#[test]
fn bundle_is_deterministic() {
    assert_eq!(synthetic_kb(&SyntheticSpec::default()), synthetic_kb(&SyntheticSpec::default()));
    let other = SyntheticSpec { seed: 2, ..SyntheticSpec::default() };
    assert_ne!(synthetic_kb(&SyntheticSpec::default()), synthetic_kb(&other));
}

#[test]
fn synthetic_kb_compiles_and_diagnoses() {
    let dir = tempfile::tempdir().unwrap();
    let c = compiled(dir.path());
    assert_eq!(c.kb.disorders().len(), 100);
    kb_statistics(&c.kb).check_partitions().unwrap();
    build_lexicon(&c.kb).unwrap();

    let params = NetworkParams::default();
    let net = build_network(&c.kb, &params).unwrap();
    let cases = generate_cases(&c.kb, params.prior_cap, 200, 6, 7);
    assert_eq!(cases, generate_cases(&c.kb, params.prior_cap, 200, 6, 7));
    let mean = cases.iter().map(|c| c.findings.len()).sum::<usize>() as f64 / cases.len() as f64;
    assert!(mean >= 5.0, "mean case size {mean}");

    let lex = build_lexicon(&c.kb).unwrap();
    let mut hits = 0;
    for case in &cases {
        let case = parse_case_xml(&write_case_xml(case)).unwrap();
        let ev = case_evidence(&case, &lex).unwrap();
        let (marg, _) = variational_posteriors(&net, &ev, &VariationalConfig::default()).unwrap();
        let by_id: Vec<_> = net.disorder_ids().iter().copied().zip(marg).collect();
        let diff = rank_differential(&by_id, &c.kb, &ev, 20, None);
        if diff.entries.iter().any(|e| Some(e.disorder_id) == case.truth) {
            hits += 1;
        }
    }
    println!("top-20 hits {hits}/200, mean size {mean}");
    assert!(hits >= 180);
}
