//! Word-vector store, phrase vectors and distance tiers for links.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::KnowledgeBase;
use crate::nlp::tokenize;
use crate::ConceptId;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: vector file is empty")]
    Empty { path: PathBuf },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("every link distance is missing; no phrase has an in-vocabulary token")]
    AllMissing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorTier {
    Close,
    Medium,
    Far,
}

impl VectorTier {
    pub const ALL: [VectorTier; 3] = [VectorTier::Close, VectorTier::Medium, VectorTier::Far];

    pub fn code(self) -> &'static str {
        match self {
            VectorTier::Close => "close",
            VectorTier::Medium => "medium",
            VectorTier::Far => "far",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        VectorTier::ALL.into_iter().find(|t| t.code() == code)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorStore {
    dimension: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl VectorStore {
    /// Tokens are lowercased; on a clash the first vector is kept.
    pub fn from_entries(
        dimension: usize,
        entries: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Self {
        let mut map = HashMap::new();
        for (token, v) in entries {
            assert_eq!(v.len(), dimension, "vector for `{token}` has the wrong dimension");
            map.entry(token.to_lowercase()).or_insert(v);
        }
        VectorStore {
            dimension,
            entries: map,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    /// Copy with every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        VectorStore {
            dimension: self.dimension,
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|x| x * factor).collect()))
                .collect(),
        }
    }
}

/// Reads the plain-text format: a `V D` header, then `token c1 .. cD` rows.
pub fn load_vectors(path: impl AsRef<Path>) -> Result<VectorStore, EmbeddingError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let fail = |line: usize, message: String| EmbeddingError::Format {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or_else(|| EmbeddingError::Empty {
        path: path.to_path_buf(),
    })?;
    let head: Vec<&str> = header.split_whitespace().collect();
    let (vocab, dimension) = match head.as_slice() {
        [v, d] => match (v.parse::<usize>(), d.parse::<usize>()) {
            (Ok(v), Ok(d)) if d > 0 => (v, d),
            _ => return Err(fail(hline + 1, format!("bad header `{header}`"))),
        },
        _ => return Err(fail(hline + 1, format!("header must be `V D`, found `{header}`"))),
    };

    let mut entries = HashMap::with_capacity(vocab);
    let mut rows = 0usize;
    for (i, line) in lines {
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("non-blank line has a token");
        let mut v = Vec::with_capacity(dimension);
        for raw in parts {
            let x: f64 = raw
                .parse()
                .map_err(|_| fail(i + 1, format!("invalid component `{raw}`")))?;
            v.push(x);
        }
        if v.len() != dimension {
            return Err(fail(
                i + 1,
                format!("expected {dimension} components, found {}", v.len()),
            ));
        }
        rows += 1;
        entries.entry(token.to_lowercase()).or_insert(v);
    }
    if rows != vocab {
        return Err(fail(
            hline + 1,
            format!("header declares {vocab} vectors, file has {rows}"),
        ));
    }
    Ok(VectorStore { dimension, entries })
}

/// Mean of the in-vocabulary token vectors, or `None` when there are none.
pub fn phrase_vector(store: &VectorStore, phrase: &str) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; store.dimension];
    let mut n = 0usize;
    for token in tokenize(phrase) {
        if let Some(v) = store.get(&token) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
    }
    (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect())
}

/// `1 - cos(a, b)`, clamped to [0, 2]. `None` if either vector is zero.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((1.0 - dot / (na * nb)).clamp(0.0, 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkDistance {
    pub disorder: ConceptId,
    pub finding: ConceptId,
    /// `None` when either phrase has no in-vocabulary token.
    pub cosine_distance: Option<f64>,
}

/// Distance between the disorder-name and finding-name phrase vectors of every link.
pub fn link_distances(store: &VectorStore, kb: &KnowledgeBase) -> Vec<LinkDistance> {
    let mut cache: HashMap<ConceptId, Option<Vec<f64>>> = HashMap::new();
    let mut vector = |id: ConceptId, name: &str| {
        cache
            .entry(id)
            .or_insert_with(|| phrase_vector(store, name))
            .clone()
    };
    kb.links()
        .iter()
        .map(|l| {
            let d = vector(l.disorder, &kb.disorder(l.disorder).expect("linked disorder").name);
            let f = vector(l.finding, &kb.finding(l.finding).expect("linked finding").name);
            let cosine_distance = match (d, f) {
                (Some(d), Some(f)) => cosine_distance(&d, &f),
                _ => None,
            };
            LinkDistance {
                disorder: l.disorder,
                finding: l.finding,
                cosine_distance,
            }
        })
        .collect()
}

/// Splits the known distances into tertiles: nearest third `Close`, middle
/// `Medium`, farthest `Far`. Ties are ordered by (disorder, finding).
/// Missing distances land in `Medium`.
pub fn assign_vector_tiers(
    distances: &[LinkDistance],
) -> Result<BTreeMap<(ConceptId, ConceptId), VectorTier>, EmbeddingError> {
    let mut known: Vec<(f64, ConceptId, ConceptId)> = distances
        .iter()
        .filter_map(|d| d.cosine_distance.map(|x| (x, d.disorder, d.finding)))
        .collect();
    if known.is_empty() {
        return Err(EmbeddingError::AllMissing);
    }
    known.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let n = known.len();
    let mut out: BTreeMap<_, _> = distances
        .iter()
        .map(|d| ((d.disorder, d.finding), VectorTier::Medium))
        .collect();
    for (rank, (_, d, f)) in known.into_iter().enumerate() {
        let tier = match 3 * rank / n {
            0 => VectorTier::Close,
            1 => VectorTier::Medium,
            _ => VectorTier::Far,
        };
        out.insert((d, f), tier);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn store() -> VectorStore {
        VectorStore::from_entries(
            3,
            [
                ("chest".to_string(), vec![1.0, 0.0, 0.0]),
                ("pain".to_string(), vec![0.0, 1.0, 0.0]),
                ("Fever".to_string(), vec![0.0, 0.0, 2.0]),
            ],
        )
    }

    fn write(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_header_and_rows() {
        let f = write("2 3\nfoo 1 2 3\nBar 0.5 -1 2e-1\n");
        let s = load_vectors(f.path()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.dimension(), 3);
        assert_eq!(s.get("bar"), Some(&[0.5, -1.0, 0.2][..]));
    }

    #[test]
    fn short_row_is_an_error() {
        let f = write("2 3\nfoo 1 2 3\nbar 1 2\n");
        let err = load_vectors(f.path()).unwrap_err();
        assert!(err.to_string().contains(":3:"), "{err}");
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write("");
        assert!(matches!(load_vectors(f.path()), Err(EmbeddingError::Empty { .. })));
    }

    #[test]
    fn header_count_enforced() {
        let f = write("3 1\na 1\nb 2\n");
        assert!(load_vectors(f.path()).is_err());
    }

    #[test]
    fn phrase_mean() {
        let s = store();
        assert_eq!(phrase_vector(&s, "chest"), Some(vec![1.0, 0.0, 0.0]));
        assert_eq!(phrase_vector(&s, "Chest-PAIN"), Some(vec![0.5, 0.5, 0.0]));
        assert_eq!(phrase_vector(&s, "pain chest"), phrase_vector(&s, "chest pain"));
        assert_eq!(phrase_vector(&s, "fever"), Some(vec![0.0, 0.0, 2.0]));
        assert_eq!(phrase_vector(&s, "unknown words"), None);
    }

    #[test]
    fn distances() {
        let s = store();
        let a = phrase_vector(&s, "chest").unwrap();
        let b = phrase_vector(&s, "pain").unwrap();
        assert_eq!(cosine_distance(&a, &a), Some(0.0));
        assert_eq!(cosine_distance(&a, &b), Some(1.0));
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert_eq!(cosine_distance(&a, &neg), Some(2.0));
        assert_eq!(cosine_distance(&a, &[0.0, 0.0, 0.0]), None);
    }

    fn dist(d: u64, f: u64, x: Option<f64>) -> LinkDistance {
        LinkDistance {
            disorder: ConceptId(d),
            finding: ConceptId(f),
            cosine_distance: x,
        }
    }

    #[test]
    fn nine_distinct_distances_split_three_ways() {
        let ds: Vec<_> = (0..9).map(|i| dist(1, 100 - i, Some(i as f64 * 0.1))).collect();
        let tiers = assign_vector_tiers(&ds).unwrap();
        for t in VectorTier::ALL {
            assert_eq!(tiers.values().filter(|x| **x == t).count(), 3);
        }
        assert_eq!(tiers[&(ConceptId(1), ConceptId(100))], VectorTier::Close);
        assert_eq!(tiers[&(ConceptId(1), ConceptId(92))], VectorTier::Far);
    }

    #[test]
    fn boundary_ties_follow_id_order() {
        // sort oracle: ranks are fixed by (distance, disorder, finding)
        let ds = vec![
            dist(2, 1, Some(0.5)),
            dist(1, 2, Some(0.5)),
            dist(1, 1, Some(0.5)),
            dist(3, 3, Some(0.1)),
            dist(3, 4, Some(0.9)),
            dist(3, 5, Some(0.9)),
        ];
        let mut oracle: Vec<_> = ds.iter().map(|d| (d.cosine_distance.unwrap(), d.disorder, d.finding)).collect();
        oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let tiers = assign_vector_tiers(&ds).unwrap();
        for (rank, (_, d, f)) in oracle.iter().enumerate() {
            let want = [VectorTier::Close, VectorTier::Medium, VectorTier::Far][rank / 2];
            assert_eq!(tiers[&(*d, *f)], want, "rank {rank}");
        }
    }

    #[test]
    fn missing_is_medium_and_all_missing_fails() {
        let ds = vec![dist(1, 1, None), dist(1, 2, Some(0.3))];
        let tiers = assign_vector_tiers(&ds).unwrap();
        assert_eq!(tiers[&(ConceptId(1), ConceptId(1))], VectorTier::Medium);
        assert!(matches!(
            assign_vector_tiers(&[dist(1, 1, None)]),
            Err(EmbeddingError::AllMissing)
        ));
    }
}
