use rayon::prelude::*;

use super::config::MatchConfig;
use crate::bm25::InvertedIndex;
use crate::error::{Error, Result};
use crate::model::{canonical_pair_order, Corpus, Hit, LabeledPair, Question, Relevance, RunList};
use crate::scoring::{ScoreRequest, Scorer};

/// Matches questions to corpus passages.
///
/// Per question: BM25 retrieves `bm25_top` candidates, `scorer` re-ranks them,
/// and the best `rerank_top` go to `verifier`. Candidates the verifier scores
/// at or above `verify_threshold` become positives, the rest negatives. The
/// recorded score is the verifier's.
pub fn match_questions(
    questions: &[Question],
    corpus: &Corpus,
    index: &InvertedIndex,
    scorer: &Scorer,
    verifier: &Scorer,
    cfg: &MatchConfig,
) -> Result<Vec<LabeledPair>> {
    cfg.validate()?;
    let retrieved: Vec<RunList> = questions
        .par_iter()
        .map(|q| index.search(&q.id, &index.analyze_query(&q.text), cfg.bm25_top))
        .collect();

    let texts = |run: &RunList| -> Result<Vec<String>> {
        run.hits()
            .iter()
            .map(|h| {
                corpus
                    .get(&h.passage_id)
                    .map(|p| corpus.indexed_text(p))
                    .ok_or_else(|| {
                        Error::invalid(format!("index passage {} missing from corpus", h.passage_id))
                    })
            })
            .collect()
    };
    let candidate_texts: Vec<Vec<String>> = retrieved.iter().map(texts).collect::<Result<_>>()?;

    let mut requests = Vec::new();
    for ((q, run), ptexts) in questions.iter().zip(&retrieved).zip(&candidate_texts) {
        for (hit, ptext) in run.hits().iter().zip(ptexts) {
            requests.push(ScoreRequest {
                question_id: &q.id,
                question: &q.text,
                passage_id: &hit.passage_id,
                passage: ptext,
            });
        }
    }
    let rerank_scores = scorer.score_pairs(&requests)?;

    let mut selected = Vec::new();
    let mut offset = 0;
    for run in &retrieved {
        let n = run.len();
        let reranked = RunList::from_unsorted(
            run.question_id(),
            run.hits()
                .iter()
                .zip(&rerank_scores[offset..offset + n])
                .map(|(h, &s)| Hit::new(h.passage_id.clone(), s))
                .collect(),
        )?;
        let picked: Vec<usize> = reranked
            .hits()
            .iter()
            .take(cfg.rerank_top)
            .map(|h| {
                offset
                    + run
                        .hits()
                        .iter()
                        .position(|orig| orig.passage_id == h.passage_id)
                        .expect("reranked hit comes from the run")
            })
            .collect();
        selected.extend(picked);
        offset += n;
    }

    let verify_requests: Vec<ScoreRequest<'_>> = selected.iter().map(|&i| requests[i]).collect();
    let verdicts = verifier.score_pairs(&verify_requests)?;

    let mut pairs: Vec<LabeledPair> = verify_requests
        .iter()
        .zip(verdicts)
        .map(|(r, score)| {
            let relevance = Relevance::from_flag(score >= cfg.verify_threshold);
            LabeledPair::new(r.question_id, r.passage_id, relevance).with_score(score)
        })
        .collect();
    pairs.sort_by(canonical_pair_order);
    Ok(pairs)
}
