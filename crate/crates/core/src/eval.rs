//! Accuracy@k and NDCG@k with binary relevance.
//!
//! Questions whose relevant set is empty are skipped. Questions present in
//! the qrels but absent from the runs are scored as misses.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{load_pairs, PairFormat};
use crate::model::{Dataset, LabeledPair, RunList};

pub const DEFAULT_K: usize = 10;

/// Per-question sets of relevant passage ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    relevant: BTreeMap<String, BTreeSet<String>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a question, possibly with no relevant passages.
    pub fn add_question(&mut self, question_id: &str) {
        self.relevant.entry(question_id.to_string()).or_default();
    }

    pub fn add_relevant(&mut self, question_id: &str, passage_id: &str) -> Result<()> {
        if passage_id.is_empty() {
            return Err(Error::invalid(format!("empty relevant id for {question_id}")));
        }
        self.relevant
            .entry(question_id.to_string())
            .or_default()
            .insert(passage_id.to_string());
        Ok(())
    }

    pub fn from_pairs(pairs: &[LabeledPair]) -> Result<Self> {
        let mut q = Qrels::new();
        for pair in pairs {
            if pair.relevance.is_positive() {
                q.add_relevant(&pair.question_id, &pair.passage_id)?;
            } else {
                q.add_question(&pair.question_id);
            }
        }
        Ok(q)
    }

    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        let mut q = Self::from_pairs(ds.pairs())?;
        for question in ds.questions() {
            q.add_question(&question.id);
        }
        Ok(q)
    }

    /// TREC qrels or pairs JSONL, chosen by file extension.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_dataset(&load_pairs(path, PairFormat::from_path(path))?)
    }

    pub fn len(&self) -> usize {
        self.relevant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relevant.is_empty()
    }

    pub fn relevant(&self, question_id: &str) -> Option<&BTreeSet<String>> {
        self.relevant.get(question_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.relevant.iter().map(|(q, r)| (q.as_str(), r))
    }
}

/// Whether any of the first `min(k, |run|)` hits is relevant.
pub fn accuracy_at_k(run: &RunList, relevant: &BTreeSet<String>, k: usize) -> bool {
    run.hits()
        .iter()
        .take(k)
        .any(|h| relevant.contains(&h.passage_id))
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// Binary-gain NDCG@k with `log2(rank + 1)` discount. The ideal list is
/// truncated at `min(|relevant|, k)`. Returns 0 for an empty relevant set.
pub fn ndcg_at_k(run: &RunList, relevant: &BTreeSet<String>, k: usize) -> f64 {
    let ideal = relevant.len().min(k);
    if ideal == 0 {
        return 0.0;
    }
    let dcg: f64 = run
        .hits()
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, h)| relevant.contains(&h.passage_id))
        .map(|(i, _)| discount(i + 1))
        .sum();
    let idcg: f64 = (1..=ideal).map(discount).sum();
    dcg / idcg
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionScore {
    pub question_id: String,
    pub hit: bool,
    pub ndcg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub accuracy: f64,
    pub ndcg: f64,
    pub n_evaluated: usize,
    pub n_skipped: usize,
    /// Runs whose question is not in the qrels; ignored by the means.
    pub n_unmatched_runs: usize,
    pub per_question: Vec<QuestionScore>,
}

/// Scores `runs` against `qrels`. Per-question rows are ordered by question id.
pub fn evaluate(runs: &[RunList], qrels: &Qrels, k: usize) -> Result<EvalReport> {
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    let mut by_question: HashMap<&str, &RunList> = HashMap::with_capacity(runs.len());
    for run in runs {
        if by_question.insert(run.question_id(), run).is_some() {
            return Err(Error::invalid(format!(
                "more than one run for question {}",
                run.question_id()
            )));
        }
    }
    let n_unmatched_runs = by_question
        .keys()
        .filter(|q| qrels.relevant(q).is_none())
        .count();

    let empty = RunList::empty("-");
    let mut per_question = Vec::new();
    let mut n_skipped = 0;
    for (qid, relevant) in qrels.iter() {
        if relevant.is_empty() {
            n_skipped += 1;
            continue;
        }
        let run = by_question.get(qid).copied().unwrap_or(&empty);
        per_question.push(QuestionScore {
            question_id: qid.to_string(),
            hit: accuracy_at_k(run, relevant, k),
            ndcg: ndcg_at_k(run, relevant, k),
        });
    }

    let n = per_question.len();
    let (accuracy, ndcg) = if n == 0 {
        (0.0, 0.0)
    } else {
        let hits = per_question.iter().filter(|q| q.hit).count();
        let ndcg_sum: f64 = per_question.iter().map(|q| q.ndcg).sum();
        (hits as f64 / n as f64, ndcg_sum / n as f64)
    };
    Ok(EvalReport {
        k,
        accuracy,
        ndcg,
        n_evaluated: n,
        n_skipped,
        n_unmatched_runs,
        per_question,
    })
}

/// Plain-text table with one row per named report and Acc / NDCG columns in
/// percent with two decimals.
pub fn format_table(rows: &[(&str, &EvalReport)]) -> String {
    let width = rows
        .iter()
        .map(|(name, _)| name.chars().count())
        .max()
        .unwrap_or(0)
        .max(5);
    let k = rows.first().map_or(DEFAULT_K, |(_, r)| r.k);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$} | {:>8} | {:>8}",
        "Model",
        format!("Acc@{k}"),
        format!("NDCG@{k}")
    );
    let _ = writeln!(out, "{}-+-{}-+-{}", "-".repeat(width), "-".repeat(8), "-".repeat(8));
    for (name, report) in rows {
        let _ = writeln!(
            out,
            "{:<width$} | {:>8.2} | {:>8.2}",
            name,
            report.accuracy * 100.0,
            report.ndcg * 100.0
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Hit;

    fn run(ids: &[&str]) -> RunList {
        let n = ids.len();
        RunList::new(
            "q",
            ids.iter()
                .enumerate()
                .map(|(i, id)| Hit::new(*id, (n - i) as f64))
                .collect(),
        )
        .unwrap()
    }

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    fn ranked(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("d{i:02}")).collect()
    }

    #[test]
    fn accuracy_boundary() {
        let ids = ranked(11);
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        assert!(accuracy_at_k(&run(&refs), &set(&["d10"]), 10));
        assert!(!accuracy_at_k(&run(&refs), &set(&["d11"]), 10));
        assert!(!accuracy_at_k(&run(&[]), &set(&["d1"]), 10));
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_k(&run(&["a", "b", "c"]), &set(&["a", "b"]), 10), 1.0);
        let v = ndcg_at_k(&run(&["a", "x", "y", "b"]), &set(&["a", "b"]), 10);
        assert!((v - 0.8772).abs() < 1e-4, "{v}");
        let expected = (1.0 + 1.0 / 5f64.log2()) / (1.0 + 1.0 / 3f64.log2());
        assert!((v - expected).abs() < 1e-15);
        assert_eq!(ndcg_at_k(&run(&["x", "y"]), &set(&["a"]), 10), 0.0);
    }

    #[test]
    fn ideal_truncated_at_k() {
        let many: Vec<String> = (0..30).map(|i| format!("r{i:02}")).collect();
        let refs: Vec<&str> = many.iter().map(String::as_str).collect();
        let relevant: BTreeSet<String> = many.iter().cloned().collect();
        assert_eq!(ndcg_at_k(&run(&refs[..10]), &relevant, 10), 1.0);
    }

    #[test]
    fn evaluate_examples() {
        let mut qrels = Qrels::new();
        qrels.add_relevant("q1", "a").unwrap();
        let perfect = RunList::new("q1", vec![Hit::new("a", 1.0)]).unwrap();
        let r = evaluate(std::slice::from_ref(&perfect), &qrels, 10).unwrap();
        assert_eq!((r.accuracy, r.ndcg), (1.0, 1.0));

        qrels.add_relevant("q2", "b").unwrap();
        let r = evaluate(&[perfect.clone(), RunList::empty("q2")], &qrels, 10).unwrap();
        assert_eq!(r.accuracy, 0.5);
        let r = evaluate(std::slice::from_ref(&perfect), &qrels, 10).unwrap();
        assert_eq!((r.accuracy, r.n_evaluated), (0.5, 2));

        qrels.add_question("q3");
        let r = evaluate(std::slice::from_ref(&perfect), &qrels, 10).unwrap();
        assert_eq!((r.n_evaluated, r.n_skipped), (2, 1));
        assert_eq!(r.n_evaluated + r.n_skipped, qrels.len());
    }

    #[test]
    fn duplicate_runs_rejected() {
        let mut qrels = Qrels::new();
        qrels.add_relevant("q", "a").unwrap();
        assert!(evaluate(&[run(&["a"]), run(&["b"])], &qrels, 10).is_err());
    }

    #[test]
    fn unmatched_runs_counted() {
        let mut qrels = Qrels::new();
        qrels.add_relevant("q1", "a").unwrap();
        let other = RunList::new("zz", vec![Hit::new("a", 1.0)]).unwrap();
        let r = evaluate(&[other], &qrels, 10).unwrap();
        assert_eq!((r.n_unmatched_runs, r.accuracy), (1, 0.0));
    }

    #[test]
    fn table_layout() {
        let mut qrels = Qrels::new();
        qrels.add_relevant("q", "a").unwrap();
        let r = evaluate(&[run(&["a"])], &qrels, 10).unwrap();
        let table = format_table(&[("bm25", &r)]);
        assert!(table.contains("Acc@10"));
        assert!(table.lines().nth(2).unwrap().ends_with("100.00 |   100.00"));
    }
}
