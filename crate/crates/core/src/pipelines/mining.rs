use std::collections::HashSet;

use rayon::prelude::*;

use super::config::MineConfig;
use crate::bm25::InvertedIndex;
use crate::error::{Error, Result};
use crate::model::{canonical_pair_order, Corpus, Dataset, LabeledPair, Relevance};
use crate::scoring::{ScoreRequest, Scorer};

/// Mines hard negatives for every question of `ds`.
///
/// Per question: BM25 retrieves `bm25_top` passages from `corpus`, passages
/// already positive for the question are dropped, the rest are scored and
/// those scoring below `negative_threshold` are emitted as negatives carrying
/// their score.
pub fn mine_hard_negatives(
    ds: &Dataset,
    corpus: &Corpus,
    index: &InvertedIndex,
    scorer: &Scorer,
    cfg: &MineConfig,
) -> Result<Vec<LabeledPair>> {
    cfg.validate()?;
    let positives: HashSet<(&str, &str)> = ds
        .pairs()
        .iter()
        .filter(|p| p.relevance.is_positive())
        .map(LabeledPair::key)
        .collect();

    let mut questions: Vec<_> = ds.questions().iter().collect();
    questions.sort_by(|a, b| a.id.cmp(&b.id));

    let candidates: Vec<Vec<String>> = questions
        .par_iter()
        .map(|q| {
            let run = index.search(&q.id, &index.analyze_query(&q.text), cfg.bm25_top);
            run.hits()
                .iter()
                .filter(|h| !positives.contains(&(q.id.as_str(), h.passage_id.as_str())))
                .map(|h| h.passage_id.clone())
                .collect()
        })
        .collect();

    let mut texts = Vec::new();
    for pids in &candidates {
        for pid in pids {
            let p = corpus
                .get(pid)
                .ok_or_else(|| Error::invalid(format!("index passage {pid} missing from corpus")))?;
            texts.push(corpus.indexed_text(p));
        }
    }
    let mut requests = Vec::with_capacity(texts.len());
    let mut t = texts.iter();
    for (q, pids) in questions.iter().zip(&candidates) {
        for pid in pids {
            requests.push(ScoreRequest {
                question_id: &q.id,
                question: &q.text,
                passage_id: pid,
                passage: t.next().expect("one text per candidate"),
            });
        }
    }
    let scores = scorer.score_pairs(&requests)?;

    let mut out: Vec<LabeledPair> = requests
        .iter()
        .zip(scores)
        .filter(|(_, s)| *s < cfg.negative_threshold)
        .map(|(r, s)| LabeledPair::new(r.question_id, r.passage_id, Relevance::Negative).with_score(s))
        .collect();
    out.sort_by(canonical_pair_order);
    Ok(out)
}
