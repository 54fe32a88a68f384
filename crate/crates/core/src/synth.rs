//! Deterministic synthetic inputs: a raw knowledge-base bundle, generated
//! cases, and small random noisy-OR networks with sampled evidence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::inference::{prior_from_incidence, Evidence, NoisyOrNetwork};
use crate::kb::{Category, KnowledgeBase};
use crate::nlp::{Case, CaseFinding, Polarity};
use crate::ontology::{RootClass, FINDING_SITE_TYPE_ID, ISA_TYPE_ID};
use crate::ConceptId;

/// Absent high-weight links become negative findings at or above this weight.
pub const NEGATION_WEIGHT: f64 = 0.54;

/// Root concepts of synthetic bundles: ids 1–12 in [`RootClass::ALL`] order.
pub fn synthetic_roots() -> Vec<(RootClass, ConceptId)> {
    RootClass::ALL
        .iter()
        .enumerate()
        .map(|(i, c)| (*c, ConceptId(i as u64 + 1)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub disorders: usize,
    pub findings: usize,
    pub systems: usize,
    pub organs_per_system: usize,
    pub min_links: usize,
    pub max_links: usize,
    pub processes: usize,
    pub vocabulary: usize,
    pub dimension: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            disorders: 100,
            findings: 400,
            systems: 8,
            organs_per_system: 4,
            min_links: 10,
            max_links: 18,
            processes: 10,
            vocabulary: 240,
            dimension: 16,
            seed: 1,
        }
    }
}

/// Raw input files, in the formats the loaders read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticBundle {
    pub concepts: String,
    pub relations: String,
    pub descriptions: String,
    pub sites: String,
    pub disorders: String,
    pub findings: String,
    pub links: String,
    pub vectors: String,
}

impl SyntheticBundle {
    pub const FILES: [&'static str; 8] = [
        "concepts.tsv",
        "relations.tsv",
        "descriptions.tsv",
        "sites.tsv",
        "disorders.tsv",
        "findings.tsv",
        "links.tsv",
        "vectors.txt",
    ];

    pub fn contents(&self) -> [&str; 8] {
        [
            &self.concepts,
            &self.relations,
            &self.descriptions,
            &self.sites,
            &self.disorders,
            &self.findings,
            &self.links,
            &self.vectors,
        ]
    }

    pub fn write_to(&self, dir: impl AsRef<Path>) -> io::Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for (name, body) in Self::FILES.iter().zip(self.contents()) {
            fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ru", "te", "sa", "vo", "ne", "di", "pa", "go", "le", "zu", "ri", "mo", "ta", "ve",
    "si", "ba", "ku", "fe", "ho", "ni", "da",
];

fn vocabulary(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let mut words = BTreeSet::new();
    while words.len() < n {
        let w: String = (0..3).map(|_| *SYLLABLES.choose(rng).expect("nonempty")).collect();
        words.insert(w);
    }
    let mut words: Vec<String> = words.into_iter().collect();
    words.shuffle(rng);
    words
}

fn unique_phrase(rng: &mut ChaCha8Rng, words: &[String], used: &mut BTreeSet<String>) -> String {
    loop {
        let a = words.choose(rng).expect("nonempty");
        let b = words.choose(rng).expect("nonempty");
        if a == b {
            continue;
        }
        let p = format!("{a} {b}");
        if used.insert(p.clone()) {
            let mut c = p.chars();
            return c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or(p);
        }
    }
}

/// A raw bundle with an IS-A tree, a site index, finding-site links, vectors,
/// and disorder–finding links that favour the disorder's own organ and system.
pub fn synthetic_kb(spec: &SyntheticSpec) -> SyntheticBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let words = vocabulary(&mut rng, spec.vocabulary);
    let mut used = BTreeSet::new();

    let mut concepts = String::new();
    let mut relations = String::new();
    let mut descriptions = String::new();
    let mut sites = String::new();
    let isa = |rel: &mut String, c: u64, p: u64| {
        let _ = writeln!(rel, "{c}\t{p}\t{ISA_TYPE_ID}\t1");
    };
    for (class, id) in synthetic_roots() {
        let _ = writeln!(concepts, "{id}\t1\t{}", class.as_str().replace('_', " "));
    }
    let body = 1;
    let disorder_root = 2;
    let observable = 3;
    let finding_root = 4;

    let system_id = |s: usize| 100 + s as u64;
    let organ_id = |s: usize, o: usize| 200 + (s * spec.organs_per_system + o) as u64;
    for s in 0..spec.systems {
        let _ = writeln!(concepts, "{}\t1\tSystem {s}", system_id(s));
        isa(&mut relations, system_id(s), body);
        let _ = writeln!(sites, "{}\tsystem\t", system_id(s));
        for o in 0..spec.organs_per_system {
            let _ = writeln!(concepts, "{}\t1\tOrgan {s}.{o}", organ_id(s, o));
            isa(&mut relations, organ_id(s, o), system_id(s));
            let _ = writeln!(sites, "{}\torgan\t{}", organ_id(s, o), system_id(s));
        }
    }
    let organs = spec.systems * spec.organs_per_system;
    let site_link = |rel: &mut String, c: u64, organ: usize| {
        let (s, o) = (organ / spec.organs_per_system, organ % spec.organs_per_system);
        let _ = writeln!(rel, "{c}\t{}\t{FINDING_SITE_TYPE_ID}\t1", organ_id(s, o));
    };

    let process_ids: Vec<u64> = (0..spec.processes as u64).map(|p| 900 + p).collect();
    for p in &process_ids {
        let _ = writeln!(concepts, "{p}\t1\tProcess {}", p - 900);
        isa(&mut relations, *p, observable);
    }

    // findings: spread round-robin over organs
    let mut findings_tsv = String::new();
    let mut by_organ: Vec<Vec<u64>> = vec![Vec::new(); organs];
    let mut finding_organ = BTreeMap::new();
    for k in 0..spec.findings {
        let id = 5000 + k as u64;
        let organ = k % organs;
        let name = unique_phrase(&mut rng, &words, &mut used);
        let _ = writeln!(concepts, "{id}\t1\t{name}");
        isa(&mut relations, id, finding_root);
        site_link(&mut relations, id, organ);
        if rng.gen_bool(0.2) {
            let s = unique_phrase(&mut rng, &words, &mut used).to_lowercase();
            let _ = writeln!(descriptions, "{id}\t{s}");
        }
        let _ = writeln!(findings_tsv, "{id}\t{name}\t");
        by_organ[organ].push(id);
        finding_organ.insert(id, organ);
    }
    let all_findings: Vec<u64> = finding_organ.keys().copied().collect();

    let categories = [
        Category::Infection,
        Category::Neoplasia,
        Category::ConnectiveTissue,
        Category::Other,
    ];
    let mut disorders_tsv = String::new();
    let mut links_tsv = String::new();
    for k in 0..spec.disorders {
        let id = 1000 + k as u64;
        let organ = rng.gen_range(0..organs);
        let system = organ / spec.organs_per_system;
        let name = unique_phrase(&mut rng, &words, &mut used);
        let _ = writeln!(concepts, "{id}\t1\t{name}");
        isa(&mut relations, id, disorder_root);
        site_link(&mut relations, id, organ);
        let incidence = 10f64.powf(rng.gen_range(-5.0..-2.5));
        let n_proc = rng.gen_range(0..=2.min(process_ids.len()));
        let procs: Vec<String> = process_ids
            .choose_multiple(&mut rng, n_proc)
            .map(|p| p.to_string())
            .collect();
        let _ = writeln!(
            disorders_tsv,
            "{id}\t{name}\t{}\t{incidence:.3e}\t{}",
            categories.choose(&mut rng).expect("nonempty").code(),
            procs.join(",")
        );

        let n_links = rng.gen_range(spec.min_links..=spec.max_links).min(all_findings.len());
        let mut chosen = BTreeSet::new();
        while chosen.len() < n_links {
            let r: f64 = rng.gen();
            let pool: &[u64] = if r < 0.5 {
                &by_organ[organ]
            } else if r < 0.8 {
                let o = system * spec.organs_per_system + rng.gen_range(0..spec.organs_per_system);
                &by_organ[o]
            } else {
                &all_findings
            };
            if let Some(f) = pool.choose(&mut rng) {
                chosen.insert(*f);
            }
        }
        for f in chosen {
            let r: f64 = rng.gen();
            let code = if r < 0.6 {
                "B"
            } else if r < 0.85 {
                "A"
            } else {
                "N"
            };
            let _ = writeln!(links_tsv, "{id}\t{f}\t{code}");
        }
    }

    let mut vectors = format!("{} {}\n", words.len(), spec.dimension);
    let mut sorted = words.clone();
    sorted.sort();
    for w in &sorted {
        vectors.push_str(w);
        for _ in 0..spec.dimension {
            let _ = write!(vectors, " {:.6}", rng.sample::<f64, _>(StandardNormal));
        }
        vectors.push('\n');
    }

    SyntheticBundle {
        concepts,
        relations,
        descriptions,
        sites,
        disorders: disorders_tsv,
        findings: findings_tsv,
        links: links_tsv,
        vectors,
    }
}

/// Cases drawn from a compiled knowledge base. Each case samples a disorder in
/// proportion to its prior, then walks the disorder's links in random order:
/// a link is observed present with probability equal to its weight, otherwise
/// absent when its weight is at least [`NEGATION_WEIGHT`], otherwise left for
/// a later pass. Passes repeat until `findings_per_case` findings are observed
/// or every link is.
pub fn generate_cases(
    kb: &KnowledgeBase,
    prior_cap: f64,
    count: usize,
    findings_per_case: usize,
    seed: u64,
) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates: Vec<_> = kb
        .disorders()
        .filter(|d| !kb.links_of(d.id).is_empty())
        .collect();
    if candidates.is_empty() {
        return Vec::new();
    }
    let dist = WeightedIndex::new(
        candidates
            .iter()
            .map(|d| prior_from_incidence(d.incidence, prior_cap)),
    )
    .expect("priors are positive");

    (0..count)
        .map(|_| {
            let d = candidates[dist.sample(&mut rng)];
            let mut links: Vec<(ConceptId, f64)> = kb
                .links_of(d.id)
                .iter()
                .map(|l| (l.finding, l.weight.map_or(0.0, |w| w.value())))
                .collect();
            links.shuffle(&mut rng);
            let mut observed: BTreeMap<ConceptId, Polarity> = BTreeMap::new();
            let target = findings_per_case.min(links.len());
            while observed.len() < target {
                for (f, w) in &links {
                    if observed.len() >= target {
                        break;
                    }
                    if observed.contains_key(f) {
                        continue;
                    }
                    if rng.gen_bool(w.clamp(0.0, 1.0)) {
                        observed.insert(*f, Polarity::Present);
                    } else if *w >= NEGATION_WEIGHT {
                        observed.insert(*f, Polarity::Absent);
                    }
                }
                if links.iter().all(|(f, w)| observed.contains_key(f) || *w <= 0.0) {
                    break;
                }
            }
            Case {
                truth: Some(d.id),
                findings: observed
                    .into_iter()
                    .map(|(id, polarity)| CaseFinding { id, polarity })
                    .collect(),
                ..Case::default()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomNetworkSpec {
    pub disorders: usize,
    pub findings: usize,
    pub link_probability: f64,
    pub prior_range: (f64, f64),
    pub leak_range: (f64, f64),
    pub weight_range: (f64, f64),
}

impl Default for RandomNetworkSpec {
    fn default() -> Self {
        RandomNetworkSpec {
            disorders: 10,
            findings: 12,
            link_probability: 0.35,
            prior_range: (0.02, 0.3),
            leak_range: (0.001, 0.05),
            weight_range: (0.05, 0.95),
        }
    }
}

/// Disorders get ids from 1, findings from 1001. Every finding has at least
/// one parent.
pub fn random_network(rng: &mut impl Rng, spec: &RandomNetworkSpec) -> NoisyOrNetwork {
    let disorders: Vec<(ConceptId, f64)> = (0..spec.disorders)
        .map(|j| (ConceptId(j as u64 + 1), rng.gen_range(spec.prior_range.0..=spec.prior_range.1)))
        .collect();
    let findings: Vec<(ConceptId, f64)> = (0..spec.findings)
        .map(|i| (ConceptId(i as u64 + 1001), rng.gen_range(spec.leak_range.0..=spec.leak_range.1)))
        .collect();
    let mut links = Vec::new();
    for (f, _) in &findings {
        let mut any = false;
        for (d, _) in &disorders {
            if rng.gen_bool(spec.link_probability) {
                links.push((*d, *f, rng.gen_range(spec.weight_range.0..spec.weight_range.1)));
                any = true;
            }
        }
        if !any && !disorders.is_empty() {
            let d = disorders[rng.gen_range(0..disorders.len())].0;
            links.push((d, *f, rng.gen_range(spec.weight_range.0..spec.weight_range.1)));
        }
    }
    NoisyOrNetwork::from_parts(disorders, findings, links).expect("generated parameters are valid")
}

/// Forward-samples disorders and findings, observes each finding with
/// probability `observe`, and keeps at most `max_positive` positives.
pub fn sample_evidence(rng: &mut impl Rng, net: &NoisyOrNetwork, observe: f64, max_positive: usize) -> Evidence {
    let present: Vec<bool> = net.priors().iter().map(|p| rng.gen_bool(*p)).collect();
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for (i, id) in net.finding_ids().iter().enumerate() {
        let mut off = net.leak_theta(i);
        for (j, t) in net.parents(i) {
            if present[*j] {
                off += t;
            }
        }
        let on = rng.gen_bool((-(-off).exp_m1()).clamp(0.0, 1.0));
        if !rng.gen_bool(observe) {
            continue;
        }
        if on {
            positive.push(*id);
        } else {
            negative.push(*id);
        }
    }
    positive.shuffle(rng);
    positive.truncate(max_positive);
    Evidence::new(positive, negative).expect("disjoint by construction")
}
