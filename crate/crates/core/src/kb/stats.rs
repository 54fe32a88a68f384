use std::collections::BTreeMap;

use serde::Serialize;

use super::{Concomitance, KnowledgeBase};
use crate::weights::{band, GridWeight};

/// Link-count breakdowns. Co-extension, weight and band breakdowns are
/// present only when every link carries the attribute.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub total_links: usize,
    pub disorders: usize,
    pub findings: usize,
    pub concomitance: BTreeMap<String, usize>,
    /// AssertOnly + NegateOnly.
    pub single_concomitance: usize,
    pub coextension: Option<BTreeMap<String, usize>>,
    pub weights: Option<BTreeMap<String, usize>>,
    pub bands: Option<BTreeMap<String, usize>>,
    /// Each present breakdown divided by the link total, keyed by breakdown name.
    pub proportions: BTreeMap<String, BTreeMap<String, f64>>,
}

impl StatsReport {
    /// Fraction of links per key, for a breakdown produced by this report.
    pub fn proportions(&self, breakdown: &BTreeMap<String, usize>) -> BTreeMap<String, f64> {
        let total = self.total_links.max(1) as f64;
        breakdown.iter().map(|(k, v)| (k.clone(), *v as f64 / total)).collect()
    }

    /// Every breakdown must sum to the link total.
    pub fn check_partitions(&self) -> Result<(), String> {
        let mut all = vec![("concomitance", &self.concomitance)];
        for (name, b) in [
            ("coextension", &self.coextension),
            ("weights", &self.weights),
            ("bands", &self.bands),
        ] {
            if let Some(b) = b {
                all.push((name, b));
            }
        }
        for (name, b) in all {
            let sum: usize = b.values().sum();
            if sum != self.total_links {
                return Err(format!("{name} breakdown sums to {sum}, expected {}", self.total_links));
            }
        }
        Ok(())
    }
}

pub fn kb_statistics(kb: &KnowledgeBase) -> StatsReport {
    let links = kb.links();
    let mut concomitance: BTreeMap<String, usize> =
        Concomitance::ALL.iter().map(|c| (c.code().to_string(), 0)).collect();
    for l in links {
        *concomitance.get_mut(l.concomitance.code()).expect("seeded") += 1;
    }
    let single = concomitance["A"] + concomitance["N"];

    let coextension = links.iter().all(|l| l.coextension.is_some()).then(|| {
        let mut m: BTreeMap<String, usize> = crate::ontology::CoextensionClass::ALL
            .iter()
            .map(|c| (c.code().to_string(), 0))
            .collect();
        for l in links {
            *m.get_mut(l.coextension.expect("checked").code()).expect("seeded") += 1;
        }
        m
    });

    let weights = links.iter().all(|l| l.weight.is_some()).then(|| {
        let mut m: BTreeMap<String, usize> = GridWeight::ALL.iter().map(|w| (w.to_string(), 0)).collect();
        for l in links {
            *m.get_mut(&l.weight.expect("checked").to_string()).expect("seeded") += 1;
        }
        m
    });

    let bands = coextension.as_ref().map(|_| {
        let mut m: BTreeMap<String, usize> = crate::weights::Band::ALL
            .iter()
            .map(|b| (b.code().to_string(), 0))
            .collect();
        for l in links {
            *m.get_mut(band(l).expect("checked").code()).expect("seeded") += 1;
        }
        m
    });

    let mut report = StatsReport {
        total_links: links.len(),
        disorders: kb.disorders().len(),
        findings: kb.findings().len(),
        concomitance,
        single_concomitance: single,
        coextension,
        weights,
        bands,
        proportions: BTreeMap::new(),
    };
    let mut proportions = BTreeMap::new();
    proportions.insert("concomitance".to_string(), report.proportions(&report.concomitance));
    for (name, b) in [
        ("coextension", &report.coextension),
        ("weights", &report.weights),
        ("bands", &report.bands),
    ] {
        if let Some(b) = b {
            proportions.insert(name.to_string(), report.proportions(b));
        }
    }
    report.proportions = proportions;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{Category, Disorder, DiseaseFeatureLink, FindingDef};
    use crate::ontology::RootClass;
    use crate::ConceptId;

    #[test]
    fn direct_tally() {
        let kb = KnowledgeBase::new(
            [Disorder {
                id: ConceptId(1),
                name: "d".into(),
                category: Category::Other,
                incidence: 0.1,
                processes: vec![],
            }],
            (10..13).map(|i| FindingDef {
                id: ConceptId(i),
                name: format!("f{i}"),
                root: RootClass::Finding,
                synonyms: vec![],
            }),
            [
                DiseaseFeatureLink::new(ConceptId(1), ConceptId(10), Concomitance::BothAssertNegate),
                DiseaseFeatureLink::new(ConceptId(1), ConceptId(11), Concomitance::AssertOnly),
                DiseaseFeatureLink::new(ConceptId(1), ConceptId(12), Concomitance::AssertOnly),
            ],
        )
        .unwrap();
        let r = kb_statistics(&kb);
        assert_eq!(r.concomitance["B"], 1);
        assert_eq!(r.single_concomitance, 2);
        assert!(r.coextension.is_none());
        assert!(r.weights.is_none());
        r.check_partitions().unwrap();
        assert!((r.proportions["concomitance"]["A"] - 2.0 / 3.0).abs() < 1e-15);
    }
}
