//! Case XML: `<case truth="…">` with optional `<text>`, any number of
//! `<finding id="…" polarity="present|absent"/>`, and optional `<age>`,
//! `<sex>`, `<nationality>`.

use std::fmt::Write;

use super::{extract_findings, Lexicon, NlpError, Polarity};
use crate::inference::{Demographics, Evidence};
use crate::ConceptId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaseFinding {
    pub id: ConceptId,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Case {
    /// Disorder the case was drawn from, when known.
    pub truth: Option<ConceptId>,
    pub text: Option<String>,
    pub findings: Vec<CaseFinding>,
    pub demographics: Demographics,
}

impl Case {
    pub fn from_text(text: impl Into<String>) -> Self {
        Case {
            text: Some(text.into()),
            ..Case::default()
        }
    }
}

fn parse_id(raw: &str, what: &str) -> Result<ConceptId, NlpError> {
    raw.trim()
        .parse()
        .map_err(|_| NlpError::Schema(format!("{what} \"{raw}\" is not a concept id")))
}

pub fn parse_case_xml(payload: &str) -> Result<Case, NlpError> {
    let doc = roxmltree::Document::parse(payload).map_err(|e| NlpError::Xml(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "case" {
        return Err(NlpError::Schema(format!(
            "root element is <{}>, expected <case>",
            root.tag_name().name()
        )));
    }
    let mut case = Case {
        truth: root.attribute("truth").map(|t| parse_id(t, "truth")).transpose()?,
        ..Case::default()
    };
    let text_of = |n: roxmltree::Node| n.text().unwrap_or("").to_string();
    for node in root.children().filter(|n| n.is_element()) {
        let pos = doc.text_pos_at(node.range().start);
        match node.tag_name().name() {
            "text" => case.text = Some(text_of(node)),
            "finding" => {
                let id = node
                    .attribute("id")
                    .ok_or_else(|| NlpError::Schema(format!("<finding> without id at {pos}")))?;
                let polarity = match node.attribute("polarity") {
                    Some("present") => Polarity::Present,
                    Some("absent") => Polarity::Absent,
                    other => {
                        return Err(NlpError::Schema(format!(
                            "<finding> at {pos} has polarity {other:?}, expected present or absent"
                        )))
                    }
                };
                case.findings.push(CaseFinding {
                    id: parse_id(id, "finding id")?,
                    polarity,
                });
            }
            "age" => case.demographics.age = Some(text_of(node).trim().to_string()),
            "sex" => case.demographics.sex = Some(text_of(node).trim().to_string()),
            "nationality" => case.demographics.nationality = Some(text_of(node).trim().to_string()),
            other => return Err(NlpError::Schema(format!("unexpected element <{other}> at {pos}"))),
        }
    }
    Ok(case)
}

/// Explicit findings plus whatever the text yields.
pub fn case_evidence(case: &Case, lexicon: &Lexicon) -> Result<Evidence, NlpError> {
    let mut all: Vec<(ConceptId, Polarity)> = Vec::new();
    for f in &case.findings {
        if !lexicon.contains_finding(f.id) {
            return Err(NlpError::UnknownFinding(f.id));
        }
        all.push((f.id, f.polarity));
    }
    if let Some(text) = &case.text {
        all.extend(extract_findings(lexicon, text).into_iter().map(|m| (m.finding, m.polarity)));
    }
    let pick = |p: Polarity| all.iter().filter(move |(_, q)| *q == p).map(|(id, _)| *id);
    let ev = Evidence::new(pick(Polarity::Present), pick(Polarity::Absent)).map_err(|e| match e {
        crate::inference::InferenceError::Conflict(id) => NlpError::Conflict(id),
        other => NlpError::Schema(other.to_string()),
    })?;
    Ok(ev.with_demographics(case.demographics.clone()))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn write_case_xml(case: &Case) -> String {
    let mut out = String::from("<case");
    if let Some(t) = case.truth {
        let _ = write!(out, " truth=\"{t}\"");
    }
    out.push_str(">\n");
    let d = &case.demographics;
    for (tag, v) in [("age", &d.age), ("sex", &d.sex), ("nationality", &d.nationality)] {
        if let Some(v) = v {
            let _ = writeln!(out, "  <{tag}>{}</{tag}>", escape(v));
        }
    }
    if let Some(text) = &case.text {
        let _ = writeln!(out, "  <text>{}</text>", escape(text));
    }
    for f in &case.findings {
        let _ = writeln!(out, "  <finding id=\"{}\" polarity=\"{}\"/>", f.id, f.polarity.as_str());
    }
    out.push_str("</case>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lexicon() -> Lexicon {
        let none: Vec<String> = vec![];
        Lexicon::new([(ConceptId(7), "Fever", none.as_slice()), (ConceptId(8), "Cough", none.as_slice())]).unwrap()
    }

    #[test]
    fn explicit_finding() {
        let c = parse_case_xml(r#"<case><finding id="7" polarity="present"/></case>"#).unwrap();
        let ev = case_evidence(&c, &lexicon()).unwrap();
        assert_eq!(ev.positive().iter().copied().collect::<Vec<_>>(), vec![ConceptId(7)]);
    }

    #[test]
    fn text_negation() {
        let c = parse_case_xml("<case><text>no fever</text></case>").unwrap();
        let ev = case_evidence(&c, &lexicon()).unwrap();
        assert!(ev.negative().contains(&ConceptId(7)));
        assert!(ev.positive().is_empty());
    }

    #[test]
    fn conflict_between_element_and_text() {
        let c = parse_case_xml(r#"<case><text>fever</text><finding id="7" polarity="absent"/></case>"#).unwrap();
        assert_eq!(case_evidence(&c, &lexicon()), Err(NlpError::Conflict(ConceptId(7))));
    }

    #[test]
    fn malformed_and_unknown() {
        let err = parse_case_xml("<case><text>fever</case>").unwrap_err();
        assert!(matches!(err, NlpError::Xml(ref m) if m.contains("1:")), "{err}");
        let c = parse_case_xml(r#"<case><finding id="99" polarity="present"/></case>"#).unwrap();
        assert_eq!(case_evidence(&c, &lexicon()), Err(NlpError::UnknownFinding(ConceptId(99))));
        assert!(parse_case_xml(r#"<case><finding id="7" polarity="maybe"/></case>"#).is_err());
        assert!(parse_case_xml("<patient/>").is_err());
    }

    #[test]
    fn writer_round_trip() {
        let case = Case {
            truth: Some(ConceptId(60)),
            text: Some("fever & <chills> \"rigors\"".into()),
            findings: vec![CaseFinding { id: ConceptId(8), polarity: Polarity::Absent }],
            demographics: Demographics {
                age: Some("42".into()),
                sex: None,
                nationality: Some("O'Neil land".into()),
            },
        };
        assert_eq!(parse_case_xml(&write_case_xml(&case)).unwrap(), case);
    }
}
