use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dxengine_core::kb::{kb_statistics, validate_kb, KbTables};
use dxengine_core::ontology::{load_snapshot, transitive_closure, SnapshotConfig};
use dxengine_core::pipeline::{load_classified_kb, load_ontology};
use dxengine_core::synth::{generate_cases, synthetic_kb, SyntheticSpec};
use dxengine_service::api::{self, AppState};
use dxengine_service::eval::{eval_run, write_corpus};
use dxengine_service::{diagnose_to_json, AppConfig, CaseInput, Snapshot};
use serde_json::json;

#[derive(Parser)]
#[command(name = "dxengine", version, about = "Diagnostic knowledge compiler and noisy-OR inference service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the ontology and knowledge base and report integrity problems.
    Ingest {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute the IS-A transitive closure.
    Closure {
        #[arg(long, required_unless_present_all = ["concepts", "relations"])]
        config: Option<PathBuf>,
        #[arg(long, requires = "relations")]
        concepts: Option<PathBuf>,
        #[arg(long, requires = "concepts")]
        relations: Option<PathBuf>,
        /// Write `descendant<TAB>ancestor` pairs here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute link distances and vector tiers.
    Tiers {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile grid weights and write the compiled tables.
    Compile {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print link statistics and write the weight histogram CSV.
    Stats {
        #[arg(long)]
        config: PathBuf,
        /// Directory written by `compile`; compiled in memory when omitted.
        #[arg(long)]
        compiled: Option<PathBuf>,
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Diagnose one case (.json, .xml, anything else is plain text).
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Top-k evaluation over a directory of case XML files.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        cases: PathBuf,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        port: Option<u16>,
    },
    /// Generate synthetic cases from the configured knowledge base.
    GenCases {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 6)]
        findings_per_case: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write a synthetic source bundle with a config file.
    GenKb {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        disorders: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn write_or_print(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{body}");
            Ok(())
        }
    }
}

fn pretty(v: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn ingest(config: &Path) -> Result<()> {
    let cfg = AppConfig::load(config)?;
    let paths = cfg.source_paths();
    let onto = load_ontology(&paths, &cfg.snapshot_config(), cfg.root_config()?)?;
    let tables = KbTables::read(&paths.disorders, &paths.findings, &paths.links)?;
    let validation = validate_kb(&tables, Some(&onto.ontology));
    let clean = validation.is_clean();
    let kb = if clean { Some(load_classified_kb(&paths, &onto)?) } else { None };
    let report = json!({
        "ontology": onto.ontology.report(),
        "concepts": onto.ontology.len(),
        "closure_pairs": onto.closure.pair_count(),
        "sites": onto.sites.len(),
        "disorders": tables.disorders.len(),
        "findings": tables.findings.len(),
        "links": tables.links.len(),
        "validation": validation,
        "coextension": kb.map(|kb| kb_statistics(&kb).coextension),
    });
    println!("{}", pretty(&report)?);
    if !clean {
        bail!("knowledge base failed validation");
    }
    Ok(())
}

fn closure(config: Option<&Path>, concepts: Option<&Path>, relations: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let (concepts, relations, descriptions, snap) = match (concepts, relations, config) {
        (Some(c), Some(r), _) => (c.to_path_buf(), r.to_path_buf(), None, SnapshotConfig::default()),
        (_, _, Some(cfg)) => {
            let cfg = AppConfig::load(cfg)?;
            let p = cfg.source_paths();
            (p.concepts, p.relations, p.descriptions, cfg.snapshot_config())
        }
        _ => bail!("give --config or both --concepts and --relations"),
    };
    let onto = load_snapshot(&concepts, &relations, descriptions.as_deref(), &snap)?;
    let closure = transitive_closure(&onto)?;
    let max_depth = closure.concepts().filter_map(|c| closure.depth(c)).max().unwrap_or(0);
    if let Some(out) = out {
        let mut body = String::new();
        for (d, a) in closure.pairs() {
            body.push_str(&format!("{d}\t{a}\n"));
        }
        fs::write(out, body).with_context(|| format!("writing {}", out.display()))?;
    }
    println!(
        "{}",
        pretty(&json!({ "concepts": onto.len(), "pairs": closure.pair_count(), "max_depth": max_depth }))?
    );
    Ok(())
}

fn tiers(config: &Path, out: Option<&Path>) -> Result<()> {
    let snap = Snapshot::build(&AppConfig::load(config)?)?;
    let c = &snap.compiled;
    let mut body = String::from("disorder\tfinding\tcosine_distance\ttier\n");
    for d in &c.distances {
        let tier = c.tiers[&(d.disorder, d.finding)];
        let dist = d.cosine_distance.map(|x| format!("{x:.6}")).unwrap_or_else(|| "NA".into());
        body.push_str(&format!("{}\t{}\t{dist}\t{}\n", d.disorder, d.finding, tier.code()));
    }
    write_or_print(out, body.trim_end())
}

fn compile(config: &Path, out: &Path) -> Result<()> {
    let snap = Snapshot::build(&AppConfig::load(config)?)?;
    fs::create_dir_all(out)?;
    snap.compiled
        .kb
        .save(out.join("disorders.tsv"), out.join("findings.tsv"), out.join("links.tsv"))?;
    fs::write(out.join("histogram.csv"), snap.compiled.histogram.to_csv())?;
    println!(
        "{}",
        pretty(&json!({ "links": snap.compiled.kb.links().len(), "fingerprint": snap.fingerprint }))?
    );
    Ok(())
}

fn stats(config: &Path, compiled: Option<&Path>, histogram: Option<&Path>) -> Result<()> {
    let cfg = AppConfig::load(config)?;
    let kb = match compiled {
        Some(dir) => {
            let onto = load_ontology(&cfg.source_paths(), &cfg.snapshot_config(), cfg.root_config()?)?;
            dxengine_core::kb::load_kb(
                dir.join("disorders.tsv"),
                dir.join("findings.tsv"),
                dir.join("links.tsv"),
                dxengine_core::kb::OntologyContext {
                    ontology: &onto.ontology,
                    closure: &onto.closure,
                    roots: &onto.roots,
                },
            )?
        }
        None => Snapshot::build(&cfg)?.compiled.kb,
    };
    let report = kb_statistics(&kb);
    if let Err(e) = report.check_partitions() {
        bail!("statistics do not partition the links: {e}");
    }
    if let Some(path) = histogram {
        let hist = dxengine_core::weights::WeightHistogram::from_links(kb.links());
        fs::write(path, hist.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{}", pretty(&report)?);
    Ok(())
}

fn diagnose(config: &Path, input: &Path, out: Option<&Path>) -> Result<()> {
    let snap = Snapshot::build(&AppConfig::load(config)?)?;
    let json = diagnose_to_json(&snap, &CaseInput::from_path(input)?)?;
    match out {
        Some(p) => fs::write(p, json).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn eval(config: &Path, cases: &Path) -> Result<()> {
    let snap = Snapshot::build(&AppConfig::load(config)?)?;
    let result = eval_run(cases, &snap)?;
    println!("{}", pretty(&result)?);
    Ok(())
}

fn serve(config: &Path, port: Option<u16>) -> Result<()> {
    let cfg = AppConfig::load(config)?;
    let port = port.unwrap_or(cfg.server.port);
    let state = Arc::new(AppState::from_config_path(config)?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = api::bind(port).await?;
        api::serve(state, listener).await
    })?;
    Ok(())
}

fn gen_cases(config: &Path, out: &Path, count: usize, per_case: usize, seed: u64) -> Result<()> {
    let cfg = AppConfig::load(config)?;
    let snap = Snapshot::build(&cfg)?;
    let cases = generate_cases(&snap.compiled.kb, snap.params.prior_cap, count, per_case, seed);
    write_corpus(&cases, out)?;
    println!("{}", pretty(&json!({ "cases": cases.len(), "dir": out }))?);
    Ok(())
}

fn gen_kb(out: &Path, disorders: usize, seed: u64) -> Result<()> {
    let spec = SyntheticSpec {
        disorders,
        findings: (disorders * 4).max(8),
        seed,
        ..SyntheticSpec::default()
    };
    synthetic_kb(&spec).write_to(out)?;
    let mut data = BTreeMap::new();
    for (key, file) in [
        ("concepts", "concepts.tsv"),
        ("relations", "relations.tsv"),
        ("descriptions", "descriptions.tsv"),
        ("sites", "sites.tsv"),
        ("disorders", "disorders.tsv"),
        ("findings", "findings.tsv"),
        ("links", "links.tsv"),
        ("vectors", "vectors.txt"),
    ] {
        data.insert(key, file);
    }
    let mut config = String::from("[data]\n");
    for (k, v) in data {
        config.push_str(&format!("{k} = \"{v}\"\n"));
    }
    config.push_str("\n[ontology]\nroots = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12]\n");
    fs::write(out.join("config.toml"), config)?;
    println!("{}", pretty(&json!({ "dir": out, "disorders": disorders, "seed": seed }))?);
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Ingest { config } => ingest(&config),
        Command::Closure {
            config,
            concepts,
            relations,
            out,
        } => closure(config.as_deref(), concepts.as_deref(), relations.as_deref(), out.as_deref()),
        Command::Tiers { config, out } => tiers(&config, out.as_deref()),
        Command::Compile { config, out } => compile(&config, &out),
        Command::Stats {
            config,
            compiled,
            histogram,
        } => stats(&config, compiled.as_deref(), histogram.as_deref()),
        Command::Diagnose { config, input, out } => diagnose(&config, &input, out.as_deref()),
        Command::Eval { config, cases } => eval(&config, &cases),
        Command::Serve { config, port } => serve(&config, port),
        Command::GenCases {
            config,
            out,
            count,
            findings_per_case,
            seed,
        } => gen_cases(&config, &out, count, findings_per_case, seed),
        Command::GenKb { out, disorders, seed } => gen_kb(&out, disorders, seed),
    }
}
