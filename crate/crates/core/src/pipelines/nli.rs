use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_jsonl;
use crate::model::{Dataset, LabeledPair, Passage, Question, Relevance};

/// Prefix turning a Polish declarative premise into a yes/no question.
pub const QUESTION_PREFIX: &str = "Czy ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliLabel {
    Entailment,
    Contradiction,
    Neutral,
}

impl std::str::FromStr for NliLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "entailment" => Ok(NliLabel::Entailment),
            "contradiction" => Ok(NliLabel::Contradiction),
            "neutral" => Ok(NliLabel::Neutral),
            other => Err(Error::invalid(format!("unknown NLI label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliRecord {
    pub premise: String,
    pub hypothesis: String,
    pub label: String,
}

impl NliRecord {
    pub fn new(premise: impl Into<String>, hypothesis: impl Into<String>, label: impl Into<String>) -> Self {
        NliRecord {
            premise: premise.into(),
            hypothesis: hypothesis.into(),
            label: label.into(),
        }
    }
}

/// Reads NLI JSONL rows `{"premise", "hypothesis", "label"}`.
pub fn load_nli(path: impl AsRef<Path>) -> Result<Vec<NliRecord>> {
    let mut out = Vec::new();
    read_jsonl(path.as_ref(), |_, r: NliRecord| {
        out.push(r);
        Ok(())
    })?;
    Ok(out)
}

/// `"Ala ma kota."` → `"Czy Ala ma kota?"`.
pub fn premise_to_question(premise: &str) -> String {
    let body = premise.trim();
    let body = body.strip_suffix('.').unwrap_or(body).trim_end();
    format!("{QUESTION_PREFIX}{body}?")
}

/// Converts NLI records into question-passage pairs.
///
/// The premise becomes a question, the hypothesis a passage. Entailment and
/// contradiction yield positives answered "Yes" and "No"; neutral yields an
/// unanswered negative. Question and passage ids (`nli-q…`, `nli-p…`) are
/// assigned by first appearance of their text, so repeated premises share a
/// question.
pub fn convert_nli(records: &[NliRecord]) -> Result<Dataset> {
    let mut ds = Dataset::new();
    let mut question_ids: HashMap<String, String> = HashMap::new();
    let mut passage_ids: HashMap<String, String> = HashMap::new();
    for (i, record) in records.iter().enumerate() {
        let at = |e: Error| Error::invalid(format!("NLI record {}: {e}", i + 1));
        let label: NliLabel = record.label.parse().map_err(at)?;
        let question = premise_to_question(&record.premise);
        let next_q = question_ids.len() + 1;
        let qid = question_ids
            .entry(question.clone())
            .or_insert_with(|| format!("nli-q{next_q:06}"))
            .clone();
        let next_p = passage_ids.len() + 1;
        let pid = passage_ids
            .entry(record.hypothesis.clone())
            .or_insert_with(|| format!("nli-p{next_p:06}"))
            .clone();
        ds.add_question(Question::new(&qid, question)).map_err(at)?;
        ds.add_passage(Passage::new(&pid, None, record.hypothesis.clone()))
            .map_err(at)?;
        let pair = match label {
            NliLabel::Entailment => LabeledPair::new(qid, pid, Relevance::Positive).with_answer("Yes"),
            NliLabel::Contradiction => LabeledPair::new(qid, pid, Relevance::Positive).with_answer("No"),
            NliLabel::Neutral => LabeledPair::new(qid, pid, Relevance::Negative),
        };
        ds.add_pair(pair)?;
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_way_mapping() {
        let ds = convert_nli(&[
            NliRecord::new("Ala ma kota.", "Ala ma zwierzę.", "entailment"),
            NliRecord::new("Ala ma kota.", "Ala nie ma zwierząt.", "contradiction"),
            NliRecord::new("Pada deszcz.", "Jest wtorek.", "neutral"),
        ])
        .unwrap();
        let pairs = ds.pairs();
        assert_eq!(pairs.len(), 3);
        assert_eq!(ds.question_text(&pairs[0].question_id).unwrap(), "Czy Ala ma kota?");
        assert_eq!(ds.passage_text(&pairs[0].passage_id).unwrap(), "Ala ma zwierzę.");
        assert_eq!((pairs[0].relevance, pairs[0].answer.as_deref()), (Relevance::Positive, Some("Yes")));
        assert_eq!((pairs[1].relevance, pairs[1].answer.as_deref()), (Relevance::Positive, Some("No")));
        assert_eq!((pairs[2].relevance, pairs[2].answer.as_deref()), (Relevance::Negative, None));
        assert_eq!(pairs[0].question_id, pairs[1].question_id);
        assert_eq!(ds.questions().len(), 2);
    }

    #[test]
    fn premise_without_period() {
        assert_eq!(premise_to_question(" Pada śnieg "), "Czy Pada śnieg?");
        assert_eq!(premise_to_question("Koniec..."), "Czy Koniec..?");
    }

    #[test]
    fn unknown_label_rejected() {
        let err = convert_nli(&[NliRecord::new("A.", "B.", "maybe")]).unwrap_err();
        assert!(err.to_string().contains("record 1"), "{err}");
    }

    #[test]
    fn repeated_record_is_a_duplicate_pair() {
        let r = NliRecord::new("A.", "B.", "neutral");
        assert!(matches!(convert_nli(&[r.clone(), r]), Err(Error::DuplicatePair { .. })));
    }
}
