use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::write_jsonl;
use crate::model::{Dataset, Relevance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPassage {
    pub id: String,
    pub title: Option<String>,
    pub text: String,
}

/// One trainer-ready example: a question with its positive and negative passages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub question_id: String,
    pub question: String,
    pub positives: Vec<TrainingPassage>,
    pub negatives: Vec<TrainingPassage>,
}

/// Groups pairs by question; questions without a positive are dropped.
/// Records are ordered by question id and passages by passage id.
pub fn training_records(ds: &Dataset) -> Result<Vec<TrainingRecord>> {
    let mut grouped: BTreeMap<&str, (Vec<&str>, Vec<&str>)> = BTreeMap::new();
    for pair in ds.pairs() {
        let entry = grouped.entry(&pair.question_id).or_default();
        match pair.relevance {
            Relevance::Positive => entry.0.push(&pair.passage_id),
            Relevance::Negative => entry.1.push(&pair.passage_id),
        }
    }
    let passage = |id: &str| -> Result<TrainingPassage> {
        let text = ds.passage_text(id)?;
        Ok(TrainingPassage {
            id: id.to_string(),
            title: ds.passage(id).and_then(|p| p.title.clone()),
            text: text.to_string(),
        })
    };
    let mut out = Vec::new();
    for (qid, (mut pos, mut neg)) in grouped {
        if pos.is_empty() {
            continue;
        }
        pos.sort_unstable();
        neg.sort_unstable();
        out.push(TrainingRecord {
            question_id: qid.to_string(),
            question: ds.question_text(qid)?.to_string(),
            positives: pos.into_iter().map(passage).collect::<Result<_>>()?,
            negatives: neg.into_iter().map(passage).collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

/// Writes [`training_records`] as JSONL.
pub fn export_training(ds: &Dataset, path: impl AsRef<Path>) -> Result<usize> {
    let records = training_records(ds)?;
    write_jsonl(path.as_ref(), &records)?;
    Ok(records.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LabeledPair, Passage, Question};

    fn ds(rows: &[(&str, &str, bool)]) -> Dataset {
        let mut ds = Dataset::new();
        for (q, p, rel) in rows {
            ds.add_question(Question::new(*q, format!("pytanie {q}"))).unwrap();
            ds.add_passage(Passage::new(*p, None, format!("tekst {p}"))).unwrap();
            ds.add_pair(LabeledPair::new(*q, *p, Relevance::from_flag(*rel))).unwrap();
        }
        ds
    }

    #[test]
    fn grouping_and_drop_rule() {
        let d = ds(&[("q1", "n2", false), ("q1", "p1", true), ("q1", "n1", false), ("q2", "n3", false)]);
        let recs = training_records(&d).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].positives.len(), 1);
        let neg: Vec<_> = recs[0].negatives.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(neg, ["n1", "n2"]);
    }

    #[test]
    fn empty_dataset_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.jsonl");
        assert_eq!(export_training(&Dataset::new(), &path).unwrap(), 0);
        assert_eq!(std::fs::read(&path).unwrap().len(), 0);
    }
}
