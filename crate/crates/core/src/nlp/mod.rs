//! Finding extraction from free text and case XML.
//!
//! Text is lowercased and split on every non-alphanumeric run. Lexicon phrases
//! are matched greedily left to right, longest first, and never across a
//! clause boundary (sentence punctuation, a line break, or the word "but").
//! A mention is absent when a negation trigger occurs earlier in its clause.

mod case;

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::Evidence;
use crate::kb::KnowledgeBase;
use crate::ConceptId;

pub use case::{case_evidence, parse_case_xml, write_case_xml, Case, CaseFinding};

pub const NEGATION_TRIGGERS: [&str; 5] = ["no", "not", "denies", "without", "absent"];
const CLAUSE_WORD: &str = "but";
const CLAUSE_PUNCTUATION: [char; 5] = ['.', ';', '!', '?', '\n'];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NlpError {
    #[error("phrase \"{phrase}\" maps to both {first} and {second}")]
    PhraseConflict {
        phrase: String,
        first: ConceptId,
        second: ConceptId,
    },
    #[error("finding {0} has a name with no word characters")]
    EmptyPhrase(ConceptId),
    #[error("finding {0} is both present and absent")]
    Conflict(ConceptId),
    #[error("unknown finding {0}")]
    UnknownFinding(ConceptId),
    #[error("malformed case XML: {0}")]
    Xml(String),
    #[error("invalid case: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// Character offsets into the source.
    pub span: Range<usize>,
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    tokens(text).into_iter().map(|t| t.text).collect()
}

/// Lowercased alphanumeric runs with their character spans.
pub fn tokens(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut current: Option<(usize, String)> = None;
    let mut n = 0;
    for (i, c) in text.chars().enumerate() {
        n = i + 1;
        if c.is_alphanumeric() {
            current.get_or_insert_with(|| (i, String::new())).1.extend(c.to_lowercase());
        } else if let Some((start, s)) = current.take() {
            out.push(Token { text: s, span: start..i });
        }
    }
    if let Some((start, s)) = current {
        out.push(Token { text: s, span: start..n });
    }
    out
}

fn normalize(phrase: &str) -> String {
    tokenize(phrase).join(" ")
}

/// Phrase → finding map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    phrases: BTreeMap<String, ConceptId>,
    canonical: BTreeMap<ConceptId, String>,
    max_tokens: usize,
}

impl Lexicon {
    /// Builds from `(id, name, synonyms)`. Synonyms that normalise to nothing
    /// are ignored; a name that does is an error.
    pub fn new<'a>(
        entries: impl IntoIterator<Item = (ConceptId, &'a str, &'a [String])>,
    ) -> Result<Self, NlpError> {
        let mut lex = Lexicon::default();
        for (id, name, synonyms) in entries {
            let canonical = normalize(name);
            if canonical.is_empty() {
                return Err(NlpError::EmptyPhrase(id));
            }
            lex.insert(canonical.clone(), id)?;
            lex.canonical.insert(id, canonical);
            for s in synonyms {
                let p = normalize(s);
                if !p.is_empty() {
                    lex.insert(p, id)?;
                }
            }
        }
        Ok(lex)
    }

    fn insert(&mut self, phrase: String, id: ConceptId) -> Result<(), NlpError> {
        match self.phrases.get(&phrase) {
            Some(first) if *first != id => Err(NlpError::PhraseConflict {
                phrase,
                first: *first,
                second: id,
            }),
            Some(_) => Ok(()),
            None => {
                self.max_tokens = self.max_tokens.max(phrase.split(' ').count());
                self.phrases.insert(phrase, id);
                Ok(())
            }
        }
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    pub fn lookup(&self, phrase: &str) -> Option<ConceptId> {
        self.phrases.get(&normalize(phrase)).copied()
    }

    pub fn phrases(&self) -> impl Iterator<Item = (&str, ConceptId)> {
        self.phrases.iter().map(|(p, id)| (p.as_str(), *id))
    }

    pub fn contains_finding(&self, id: ConceptId) -> bool {
        self.canonical.contains_key(&id)
    }

    /// Normalised name of a finding.
    pub fn canonical(&self, id: ConceptId) -> Option<&str> {
        self.canonical.get(&id).map(String::as_str)
    }

    /// Phrases starting with `prefix`, then phrases with a later word starting
    /// with it, each group in lexical order.
    pub fn search(&self, prefix: &str, limit: usize) -> Vec<(&str, ConceptId)> {
        let mut q = normalize(prefix);
        if q.is_empty() {
            return Vec::new();
        }
        if prefix.ends_with(|c: char| !c.is_alphanumeric()) {
            q.push(' ');
        }
        let leading = self
            .phrases
            .range(q.clone()..)
            .take_while(|(p, _)| p.starts_with(&q));
        let inner_pat = format!(" {q}");
        let inner = self.phrases.iter().filter(|(p, _)| !p.starts_with(&q) && p.contains(&inner_pat));
        leading
            .chain(inner)
            .take(limit)
            .map(|(p, id)| (p.as_str(), *id))
            .collect()
    }
}

/// Every finding name and synonym in the knowledge base.
pub fn build_lexicon(kb: &KnowledgeBase) -> Result<Lexicon, NlpError> {
    Lexicon::new(kb.findings().map(|f| (f.id, f.name.as_str(), f.synonyms.as_slice())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Present,
    Absent,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Present => "present",
            Polarity::Absent => "absent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mention {
    pub finding: ConceptId,
    pub polarity: Polarity,
    /// Character offsets into the source text.
    pub span: Range<usize>,
}

/// Clause index of each token.
fn clauses(text: &str, toks: &[Token]) -> Vec<usize> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::with_capacity(toks.len());
    let mut clause = 0;
    let mut prev_end = 0;
    for t in toks {
        if chars[prev_end..t.span.start].iter().any(|c| CLAUSE_PUNCTUATION.contains(c)) {
            clause += 1;
        }
        if t.text == CLAUSE_WORD {
            clause += 1;
            out.push(clause);
            clause += 1;
        } else {
            out.push(clause);
        }
        prev_end = t.span.end;
    }
    out
}

/// Mentions in source order.
pub fn extract_findings(lexicon: &Lexicon, text: &str) -> Vec<Mention> {
    let toks = tokens(text);
    let clause = clauses(text, &toks);
    let mut in_mention = vec![false; toks.len()];
    let mut found: Vec<(usize, usize, ConceptId)> = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let mut best = None;
        let mut phrase = String::new();
        for j in i..toks.len().min(i + lexicon.max_tokens) {
            if clause[j] != clause[i] {
                break;
            }
            if j > i {
                phrase.push(' ');
            }
            phrase.push_str(&toks[j].text);
            if let Some(id) = lexicon.phrases.get(&phrase) {
                best = Some((j, *id));
            }
        }
        match best {
            Some((j, id)) => {
                found.push((i, j, id));
                in_mention[i..=j].iter_mut().for_each(|m| *m = true);
                i = j + 1;
            }
            None => i += 1,
        }
    }
    found
        .into_iter()
        .map(|(i, j, id)| {
            let negated = (0..i)
                .rev()
                .take_while(|k| clause[*k] == clause[i])
                .any(|k| !in_mention[k] && NEGATION_TRIGGERS.contains(&toks[k].text.as_str()));
            Mention {
                finding: id,
                polarity: if negated { Polarity::Absent } else { Polarity::Present },
                span: toks[i].span.start..toks[j].span.end,
            }
        })
        .collect()
}

/// Evidence from mentions; the same finding with both polarities is an error.
pub fn mentions_to_evidence(mentions: &[Mention]) -> Result<Evidence, NlpError> {
    let pick = |p: Polarity| mentions.iter().filter(move |m| m.polarity == p).map(|m| m.finding);
    Evidence::new(pick(Polarity::Present), pick(Polarity::Absent)).map_err(|e| match e {
        crate::inference::InferenceError::Conflict(id) => NlpError::Conflict(id),
        other => NlpError::Schema(other.to_string()),
    })
}

/// One sentence per mention, using each finding's canonical phrase. Extracting
/// from the result reproduces the mentions' findings and polarities.
pub fn render_mentions(lexicon: &Lexicon, mentions: &[Mention]) -> String {
    mentions
        .iter()
        .filter_map(|m| {
            let p = lexicon.canonical(m.finding)?;
            Some(match m.polarity {
                Polarity::Present => format!("{p}."),
                Polarity::Absent => format!("no {p}."),
            })
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex(entries: &[(u64, &str, &[&str])]) -> Lexicon {
        let owned: Vec<(ConceptId, String, Vec<String>)> = entries
            .iter()
            .map(|(id, n, s)| (ConceptId(*id), n.to_string(), s.iter().map(|x| x.to_string()).collect()))
            .collect();
        Lexicon::new(owned.iter().map(|(id, n, s)| (*id, n.as_str(), s.as_slice()))).unwrap()
    }

    fn basic() -> Lexicon {
        lex(&[
            (1, "Chest pain", &["thoracic pain"]),
            (2, "Fever", &[]),
            (3, "Pain", &[]),
            (4, "Absent deep tendon reflexes", &[]),
        ])
    }

    fn summary(l: &Lexicon, text: &str) -> Vec<(u64, Polarity)> {
        extract_findings(l, text).iter().map(|m| (m.finding.0, m.polarity)).collect()
    }

    #[test]
    fn tokens_carry_char_spans() {
        let t = tokens("Fièvre, chest-pain");
        assert_eq!(t[0].text, "fièvre");
        assert_eq!(t[0].span, 0..6);
        assert_eq!(t[1].span, 8..13);
        assert_eq!(t[2].span, 14..18);
    }

    #[test]
    fn synonym_and_name_share_id() {
        let l = basic();
        assert_eq!(l.lookup("thoracic pain"), Some(ConceptId(1)));
        assert_eq!(l.lookup("CHEST PAIN"), Some(ConceptId(1)));
        assert_eq!(l.max_tokens(), 4);
    }

    #[test]
    fn phrase_conflict() {
        let a = vec!["weakness".to_string()];
        let err = Lexicon::new([(ConceptId(1), "Asthenia", a.as_slice()), (ConceptId(2), "Paresis", a.as_slice())])
            .unwrap_err();
        assert!(matches!(err, NlpError::PhraseConflict { first: ConceptId(1), second: ConceptId(2), .. }));
    }

    #[test]
    fn examples() {
        let l = basic();
        use Polarity::*;
        assert_eq!(summary(&l, "chest pain and fever"), vec![(1, Present), (2, Present)]);
        assert_eq!(summary(&l, "no fever but chest pain"), vec![(2, Absent), (1, Present)]);
        assert_eq!(summary(&lex(&[(1, "chest pain", &[])]), "chest"), vec![]);
        assert_eq!(summary(&l, "absent deep tendon reflexes"), vec![(4, Present)]);
    }

    #[test]
    fn spans_point_at_source() {
        let l = basic();
        let text = "Severe Chest  Pain.";
        let m = &extract_findings(&l, text)[0];
        let s: String = text.chars().skip(m.span.start).take(m.span.len()).collect();
        assert_eq!(s, "Chest  Pain");
    }

    #[test]
    fn render_round_trip() {
        let l = basic();
        let m = extract_findings(&l, "Denies fever. Absent deep tendon reflexes; pain");
        let again = extract_findings(&l, &render_mentions(&l, &m));
        assert_eq!(mentions_to_evidence(&m).unwrap(), mentions_to_evidence(&again).unwrap());
    }

    #[test]
    fn conflicting_mentions() {
        let l = basic();
        let m = extract_findings(&l, "fever. no fever.");
        assert_eq!(mentions_to_evidence(&m), Err(NlpError::Conflict(ConceptId(2))));
    }

    #[test]
    fn search_prefix() {
        let l = basic();
        let hits: Vec<_> = l.search("ches", 20).into_iter().map(|(p, _)| p).collect();
        assert_eq!(hits, vec!["chest pain"]);
        let hits: Vec<_> = l.search("pa", 20).into_iter().map(|(p, _)| p).collect();
        assert_eq!(hits, vec!["pain", "chest pain", "thoracic pain"]);
    }
}
