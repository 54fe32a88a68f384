//! Nine-value weight grid.
//!
//! Concomitance and co-extension pick a band; the vector tier picks the value
//! inside the band. Grid values are `0.09 * k` for `k = 1..=9`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::embeddings::VectorTier;
use crate::kb::{Concomitance, DiseaseFeatureLink, KnowledgeBase};
use crate::ontology::CoextensionClass;
use crate::ConceptId;

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("link {disorder}->{finding} has no {missing}")]
    MissingAttribute {
        disorder: ConceptId,
        finding: ConceptId,
        missing: &'static str,
    },
}

/// A weight on the grid, stored as its multiple of 0.09.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridWeight(u8);

impl GridWeight {
    pub const ALL: [GridWeight; 9] = [
        GridWeight(1),
        GridWeight(2),
        GridWeight(3),
        GridWeight(4),
        GridWeight(5),
        GridWeight(6),
        GridWeight(7),
        GridWeight(8),
        GridWeight(9),
    ];

    pub fn new(level: u8) -> Option<Self> {
        (1..=9).contains(&level).then_some(GridWeight(level))
    }

    pub fn level(self) -> u8 {
        self.0
    }

    pub fn value(self) -> f64 {
        // 9k/100 rounds to the nearest double of the decimal literal; 0.09*k does not
        f64::from(self.0) * 9.0 / 100.0
    }

    /// Snaps a decimal weight to the grid, or `None` if it is off-grid.
    pub fn from_value(w: f64) -> Option<Self> {
        let k = (w / 0.09).round();
        if !(1.0..=9.0).contains(&k) || (w - k * 0.09).abs() > 1e-6 {
            return None;
        }
        GridWeight::new(k as u8)
    }
}

impl fmt::Display for GridWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.value())
    }
}

impl Serialize for GridWeight {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for GridWeight {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = f64::deserialize(d)?;
        GridWeight::from_value(w).ok_or_else(|| serde::de::Error::custom(format!("{w} is not a grid weight")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Low,
    Mid,
    High,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::High, Band::Mid, Band::Low];

    pub fn code(self) -> &'static str {
        match self {
            Band::High => "high",
            Band::Mid => "mid",
            Band::Low => "low",
        }
    }
}

/// Additive preference score behind a band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandScore {
    pub concomitance: u8,
    pub coextension: u8,
}

impl BandScore {
    pub fn new(concomitance: Concomitance, coextension: CoextensionClass) -> Self {
        let c = match concomitance {
            Concomitance::BothAssertNegate => 2,
            Concomitance::AssertOnly | Concomitance::NegateOnly => 1,
        };
        let s = match coextension {
            CoextensionClass::SameSystemAndOrgan => 2,
            CoextensionClass::SameSystemDifferentOrgan => 1,
            CoextensionClass::DifferentSystem => 0,
        };
        BandScore {
            concomitance: c,
            coextension: s,
        }
    }

    pub fn total(self) -> u8 {
        self.concomitance + self.coextension
    }

    pub fn band(self) -> Band {
        match self.total() {
            4 => Band::High,
            3 => Band::Mid,
            _ => Band::Low,
        }
    }
}

pub fn band_of(concomitance: Concomitance, coextension: CoextensionClass) -> Band {
    BandScore::new(concomitance, coextension).band()
}

/// Band of a link, once its co-extension class is known.
pub fn band(link: &DiseaseFeatureLink) -> Option<Band> {
    link.coextension.map(|c| band_of(link.concomitance, c))
}

/// The 3×3 lookup from (band, vector tier) to a grid value.
pub struct WeightGrid;

impl WeightGrid {
    pub fn lookup(band: Band, tier: VectorTier) -> GridWeight {
        let base = match band {
            Band::Low => 0,
            Band::Mid => 3,
            Band::High => 6,
        };
        let step = match tier {
            VectorTier::Far => 1,
            VectorTier::Medium => 2,
            VectorTier::Close => 3,
        };
        GridWeight(base + step)
    }

    /// The three values of a band, ascending (Far, Medium, Close).
    pub fn band_values(band: Band) -> [GridWeight; 3] {
        [VectorTier::Far, VectorTier::Medium, VectorTier::Close].map(|t| WeightGrid::lookup(band, t))
    }
}

pub fn compile_weight(band: Band, tier: VectorTier) -> GridWeight {
    WeightGrid::lookup(band, tier)
}

/// Link counts per grid value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct WeightHistogram {
    counts: BTreeMap<GridWeight, usize>,
}

impl WeightHistogram {
    pub fn from_links<'a>(links: impl IntoIterator<Item = &'a DiseaseFeatureLink>) -> Self {
        let mut counts: BTreeMap<GridWeight, usize> = GridWeight::ALL.iter().map(|w| (*w, 0)).collect();
        for l in links {
            if let Some(w) = l.weight {
                *counts.entry(w).or_default() += 1;
            }
        }
        WeightHistogram { counts }
    }

    pub fn count(&self, w: GridWeight) -> usize {
        self.counts.get(&w).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (GridWeight, usize)> + '_ {
        self.counts.iter().map(|(w, c)| (*w, *c))
    }

    /// `weight,count` rows in ascending weight order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("weight,count\n");
        for (w, c) in self.iter() {
            out.push_str(&format!("{w},{c}\n"));
        }
        out
    }
}

/// Assigns every link its vector tier and grid weight.
///
/// Links must already carry a co-extension class; `tiers` must cover every link.
pub fn compile_all(
    kb: &KnowledgeBase,
    tiers: &BTreeMap<(ConceptId, ConceptId), VectorTier>,
) -> Result<(KnowledgeBase, WeightHistogram), WeightError> {
    let mut out = kb.clone();
    for l in out.links_mut() {
        let coext = l.coextension.ok_or(WeightError::MissingAttribute {
            disorder: l.disorder,
            finding: l.finding,
            missing: "co-extension class",
        })?;
        let tier = *tiers.get(&l.key()).ok_or(WeightError::MissingAttribute {
            disorder: l.disorder,
            finding: l.finding,
            missing: "vector tier",
        })?;
        l.vector_tier = Some(tier);
        l.weight = Some(compile_weight(band_of(l.concomitance, coext), tier));
    }
    let hist = WeightHistogram::from_links(out.links());
    Ok((out, hist))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_examples() {
        use CoextensionClass::*;
        assert_eq!(band_of(Concomitance::BothAssertNegate, SameSystemAndOrgan), Band::High);
        assert_eq!(band_of(Concomitance::AssertOnly, SameSystemAndOrgan), Band::Mid);
        assert_eq!(band_of(Concomitance::NegateOnly, DifferentSystem), Band::Low);
        assert_eq!(band_of(Concomitance::BothAssertNegate, SameSystemDifferentOrgan), Band::Mid);
        assert_eq!(band_of(Concomitance::BothAssertNegate, DifferentSystem), Band::Low);
    }

    #[test]
    fn named_grid_points() {
        assert_eq!(compile_weight(Band::High, VectorTier::Close).value(), 0.81);
        assert_eq!(compile_weight(Band::High, VectorTier::Medium).value(), 0.72);
        assert_eq!(compile_weight(Band::High, VectorTier::Far).value(), 0.63);
        assert_eq!(compile_weight(Band::Low, VectorTier::Close).value(), 0.27);
        assert_eq!(compile_weight(Band::Mid, VectorTier::Far).value(), 0.36);
        assert_eq!(compile_weight(Band::Low, VectorTier::Far).value(), 0.09);
    }

    #[test]
    fn grid_is_nine_distinct_ascending_values() {
        let mut all = Vec::new();
        for b in [Band::Low, Band::Mid, Band::High] {
            let v = WeightGrid::band_values(b);
            assert!(v[0] < v[1] && v[1] < v[2]);
            all.extend(v);
        }
        let values: Vec<f64> = all.iter().map(|w| w.value()).collect();
        assert_eq!(values, vec![0.09, 0.18, 0.27, 0.36, 0.45, 0.54, 0.63, 0.72, 0.81]);
    }

    #[test]
    fn snapping() {
        assert_eq!(GridWeight::from_value(0.81), GridWeight::new(9));
        assert_eq!(GridWeight::from_value(0.450000001), GridWeight::new(5));
        assert_eq!(GridWeight::from_value(0.9), None);
        assert_eq!(GridWeight::from_value(0.5), None);
        assert_eq!(GridWeight::from_value(0.0), None);
        assert_eq!(GridWeight::new(9).unwrap().to_string(), "0.81");
    }

    #[test]
    fn histogram_csv() {
        let h = WeightHistogram::default();
        assert_eq!(h.total(), 0);
        let csv = WeightHistogram::from_links([]).to_csv();
        assert_eq!(csv.lines().count(), 10);
        assert!(csv.starts_with("weight,count\n0.09,0\n"));
    }
}
