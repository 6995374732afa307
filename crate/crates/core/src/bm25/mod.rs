//! Inverted index with exact top-k BM25 retrieval.
//!
//! Scoring uses the non-negative IDF variant
//!
//! ```text
//! idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
//! score(q, d) = Σ_t∈q idf(t) · tf·(k1 + 1) / (tf + k1·(1 - b + b·|d|/avgdl))
//! ```
//!
//! A query term repeated `m` times contributes `m` times. Retrieval walks the
//! union of the query postings document-at-a-time and keeps the best `k` in a
//! bounded heap, so results are exact.

mod store;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Corpus, Hit, RunList};
use crate::text::{AnalyzedMode, Analyzer, Lexicon, Vocabulary};

pub use store::{FORMAT_VERSION, INDEX_FILE, LEXICON_FILE, MANIFEST_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1.is_finite() && self.k1 >= 0.0) {
            return Err(Error::Config(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!("b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone)]
pub struct InvertedIndex {
    vocab: Vocabulary,
    postings: Vec<Vec<Posting>>,
    doc_lengths: Vec<u32>,
    doc_ids: Vec<String>,
    avgdl: f64,
    params: Bm25Params,
    analyzer: Analyzer,
    use_title: bool,
}

/// Analyzed query: distinct in-vocabulary terms in first-occurrence order.
struct QueryPlan {
    terms: Vec<PlanTerm>,
}

struct PlanTerm {
    term: u32,
    multiplicity: u32,
    idf: f64,
}

impl InvertedIndex {
    pub fn build(corpus: &Corpus, analyzer: Analyzer, params: Bm25Params) -> Result<Self> {
        params.validate()?;
        if corpus.is_empty() {
            return Err(Error::invalid("cannot index an empty corpus"));
        }
        let streams: Vec<Vec<String>> = corpus
            .passages()
            .par_iter()
            .map(|p| analyzer.analyze(&corpus.indexed_text(p)))
            .collect();

        let mut vocab = Vocabulary::new();
        let mut postings: Vec<Vec<Posting>> = Vec::new();
        let mut doc_lengths = Vec::with_capacity(streams.len());
        let mut counts: Vec<(u32, u32)> = Vec::new();
        for (doc, tokens) in streams.iter().enumerate() {
            counts.clear();
            for token in tokens {
                let id = vocab.intern(token);
                if id as usize == postings.len() {
                    postings.push(Vec::new());
                }
                counts.push((id, 1));
            }
            counts.sort_unstable_by_key(|&(id, _)| id);
            counts.dedup_by(|next, acc| {
                if next.0 == acc.0 {
                    acc.1 += 1;
                    true
                } else {
                    false
                }
            });
            for &(id, tf) in &counts {
                postings[id as usize].push(Posting {
                    doc: doc as u32,
                    tf,
                });
            }
            doc_lengths.push(tokens.len() as u32);
        }

        let doc_ids = corpus.passages().iter().map(|p| p.id.clone()).collect();
        Self::from_parts(
            vocab,
            postings,
            doc_lengths,
            doc_ids,
            params,
            analyzer,
            corpus.use_title,
        )
    }

    pub(crate) fn from_parts(
        vocab: Vocabulary,
        postings: Vec<Vec<Posting>>,
        doc_lengths: Vec<u32>,
        doc_ids: Vec<String>,
        params: Bm25Params,
        analyzer: Analyzer,
        use_title: bool,
    ) -> Result<Self> {
        let n = doc_lengths.len();
        if n == 0 || doc_ids.len() != n || postings.len() != vocab.len() {
            return Err(Error::invalid("inconsistent index components"));
        }
        for list in &postings {
            if list.windows(2).any(|w| w[0].doc >= w[1].doc)
                || list.iter().any(|p| p.doc as usize >= n || p.tf == 0)
            {
                return Err(Error::invalid("postings not sorted by document"));
            }
        }
        let total: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
        let avgdl = total as f64 / n as f64;
        Ok(InvertedIndex {
            vocab,
            postings,
            doc_lengths,
            doc_ids,
            avgdl,
            params,
            analyzer,
            use_title,
        })
    }

    pub fn num_docs(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn analyzed(&self) -> AnalyzedMode {
        self.analyzer.mode()
    }

    pub fn analyzer(&self) -> &Analyzer {
        &self.analyzer
    }

    pub fn lexicon(&self) -> &Arc<Lexicon> {
        self.analyzer.lexicon()
    }

    pub fn use_title(&self) -> bool {
        self.use_title
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn doc_id(&self, ordinal: usize) -> &str {
        &self.doc_ids[ordinal]
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        match self.vocab.id(term) {
            Some(id) => &self.postings[id as usize],
            None => &[],
        }
    }

    pub fn all_postings(&self) -> &[Vec<Posting>] {
        &self.postings
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn idf(&self, df: usize) -> f64 {
        let n = self.num_docs() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Query tokens through the same analysis as the indexed documents.
    pub fn analyze_query(&self, text: &str) -> Vec<String> {
        self.analyzer.analyze(text)
    }

    fn plan<S: AsRef<str>>(&self, query: &[S]) -> QueryPlan {
        let mut terms: Vec<PlanTerm> = Vec::new();
        for token in query {
            let Some(term) = self.vocab.id(token.as_ref()) else {
                continue;
            };
            match terms.iter_mut().find(|t| t.term == term) {
                Some(t) => t.multiplicity += 1,
                None => terms.push(PlanTerm {
                    term,
                    multiplicity: 1,
                    idf: self.idf(self.postings[term as usize].len()),
                }),
            }
        }
        QueryPlan { terms }
    }

    #[inline]
    fn term_weight(&self, term: &PlanTerm, tf: u32, doc: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = f64::from(tf);
        let dl = f64::from(self.doc_lengths[doc]);
        let norm = k1 * (1.0 - b + b * dl / self.avgdl);
        term.idf * (tf * (k1 + 1.0)) / (tf + norm) * f64::from(term.multiplicity)
    }

    /// Sums term weights in plan order; `tfs[i]` is the frequency of plan term `i`.
    #[inline]
    fn combine(&self, plan: &QueryPlan, tfs: &[u32], doc: usize) -> f64 {
        plan.terms
            .iter()
            .zip(tfs)
            .filter(|(_, &tf)| tf > 0)
            .map(|(term, &tf)| self.term_weight(term, tf, doc))
            .sum()
    }

    /// BM25 score of a single document.
    ///
    /// # Panics
    ///
    /// If `doc >= num_docs()`.
    pub fn score<S: AsRef<str>>(&self, query: &[S], doc: usize) -> f64 {
        assert!(doc < self.num_docs(), "document ordinal {doc} out of range");
        let plan = self.plan(query);
        let tfs: Vec<u32> = plan
            .terms
            .iter()
            .map(|t| {
                let list = &self.postings[t.term as usize];
                list.binary_search_by_key(&(doc as u32), |p| p.doc)
                    .map(|i| list[i].tf)
                    .unwrap_or(0)
            })
            .collect();
        self.combine(&plan, &tfs, doc)
    }

    /// Exact top-`k` documents with positive score. `k == 0` yields an empty run.
    pub fn search<S: AsRef<str>>(&self, question_id: &str, query: &[S], k: usize) -> RunList {
        let plan = self.plan(query);
        if plan.terms.is_empty() || k == 0 {
            return RunList::empty(question_id);
        }
        let lists: Vec<&[Posting]> = plan
            .terms
            .iter()
            .map(|t| self.postings[t.term as usize].as_slice())
            .collect();
        let mut cursors = vec![0usize; lists.len()];
        let mut frontier: BinaryHeap<std::cmp::Reverse<(u32, usize)>> = lists
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.is_empty())
            .map(|(i, l)| std::cmp::Reverse((l[0].doc, i)))
            .collect();

        let mut top: BinaryHeap<Candidate<'_>> = BinaryHeap::with_capacity(k + 1);
        let mut tfs = vec![0u32; lists.len()];
        while let Some(&std::cmp::Reverse((doc, _))) = frontier.peek() {
            tfs.iter_mut().for_each(|tf| *tf = 0);
            while let Some(&std::cmp::Reverse((d, i))) = frontier.peek() {
                if d != doc {
                    break;
                }
                frontier.pop();
                tfs[i] = lists[i][cursors[i]].tf;
                cursors[i] += 1;
                if let Some(next) = lists[i].get(cursors[i]) {
                    frontier.push(std::cmp::Reverse((next.doc, i)));
                }
            }
            let doc = doc as usize;
            let score = self.combine(&plan, &tfs, doc);
            if score <= 0.0 {
                continue;
            }
            let candidate = Candidate {
                score,
                id: &self.doc_ids[doc],
            };
            if top.len() < k {
                top.push(candidate);
            } else if let Some(worst) = top.peek() {
                if candidate < *worst {
                    top.pop();
                    top.push(candidate);
                }
            }
        }

        let hits = top
            .into_sorted_vec()
            .into_iter()
            .map(|c| Hit::new(c.id, c.score))
            .collect();
        RunList::new(question_id, hits).expect("heap output is in rank order")
    }

    /// Analyzes and searches many questions in parallel; output order follows input.
    pub fn search_batch(&self, queries: &[(String, String)], k: usize) -> Vec<RunList> {
        queries
            .par_iter()
            .map(|(qid, text)| self.search(qid, &self.analyze_query(text), k))
            .collect()
    }
}

/// Heap entry ordered so that the greatest element is the worst-ranked one.
struct Candidate<'a> {
    score: f64,
    id: &'a str,
}

impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.id.cmp(other.id))
    }
}

impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate<'_> {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Passage;
    use proptest::prelude::*;

    fn corpus(texts: &[&str]) -> Corpus {
        let passages = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Passage::new(format!("doc{}", i + 1), None, *t))
            .collect();
        Corpus::new(passages, false).unwrap()
    }

    fn three() -> InvertedIndex {
        InvertedIndex::build(
            &corpus(&["kot pies", "kot kot ryba", "ryba"]),
            Analyzer::surface(),
            Bm25Params::default(),
        )
        .unwrap()
    }

    /// Literal BM25 formula over raw token lists.
    fn oracle(docs: &[Vec<String>], query: &[String], doc: usize, k1: f64, b: f64) -> f64 {
        let n = docs.len() as f64;
        let avgdl = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
        query
            .iter()
            .map(|t| {
                let df = docs.iter().filter(|d| d.contains(t)).count() as f64;
                let tf = docs[doc].iter().filter(|x| *x == t).count() as f64;
                if tf == 0.0 {
                    return 0.0;
                }
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * docs[doc].len() as f64 / avgdl))
            })
            .sum()
    }

    #[test]
    fn three_doc_statistics() {
        let idx = three();
        assert_eq!(idx.num_docs(), 3);
        assert!((idx.avgdl() - 2.0).abs() < 1e-12);
        assert_eq!(idx.df("kot"), 2);
        assert_eq!(idx.postings("kot"), [Posting { doc: 0, tf: 1 }, Posting { doc: 1, tf: 2 }]);
    }

    #[test]
    fn three_doc_hand_scores() {
        let idx = three();
        let q = ["kot"];
        assert!((idx.score(&q, 1) - 0.5666).abs() < 1e-4, "{}", idx.score(&q, 1));
        assert!((idx.score(&q, 0) - 1.6f64.ln()).abs() < 1e-12);
        assert!((idx.score(&q, 0) - 0.4700).abs() < 1e-4);
        assert_eq!(idx.score(&q, 2), 0.0);
    }

    #[test]
    fn three_doc_search() {
        let idx = three();
        let run = idx.search("q", &["kot"], 10);
        let ids: Vec<_> = run.hits().iter().map(|h| h.passage_id.as_str()).collect();
        assert_eq!(ids, ["doc2", "doc1"]);
        let top1 = idx.search("q", &["kot"], 1);
        assert_eq!(top1.hits()[0].passage_id, "doc2");
        assert_eq!(top1.len(), 1);
        assert!(idx.search("q", &["słoń"], 10).is_empty());
    }

    #[test]
    fn single_doc_avgdl() {
        let idx = InvertedIndex::build(&corpus(&["a b c"]), Analyzer::surface(), Bm25Params::default())
            .unwrap();
        assert_eq!(idx.avgdl(), 3.0);
    }

    #[test]
    fn empty_corpus_rejected() {
        let err = InvertedIndex::build(&Corpus::default(), Analyzer::surface(), Bm25Params::default());
        assert!(err.is_err());
    }

    #[test]
    fn lemma_mode_indexes_lemmas() {
        let lex = Arc::new(Lexicon::from_pairs([("koty", "kot")]));
        let idx = InvertedIndex::build(
            &corpus(&["koty"]),
            Analyzer::new(AnalyzedMode::Lemma, lex),
            Bm25Params::default(),
        )
        .unwrap();
        assert_eq!(idx.df("kot"), 1);
        assert_eq!(idx.df("koty"), 0);
        assert_eq!(idx.analyze_query("Koty"), ["kot"]);
    }

    #[test]
    fn repeated_query_terms_count_per_occurrence() {
        let idx = three();
        let once = idx.score(&["kot"], 1);
        let twice = idx.score(&["kot", "kot"], 1);
        assert!((twice - 2.0 * once).abs() < 1e-12);
    }

    #[test]
    fn ties_break_by_passage_id() {
        let idx = InvertedIndex::build(
            &corpus(&["x y", "x y", "x y"]),
            Analyzer::surface(),
            Bm25Params::default(),
        )
        .unwrap();
        let run = idx.search("q", &["x"], 2);
        let ids: Vec<_> = run.hits().iter().map(|h| h.passage_id.as_str()).collect();
        assert_eq!(ids, ["doc1", "doc2"]);
    }

    fn arb_corpus() -> impl Strategy<Value = Vec<Vec<String>>> {
        proptest::collection::vec(
            proptest::collection::vec(prop_oneof!["a", "b", "c", "d", "e", "f"], 0..8),
            1..30,
        )
        .prop_map(|docs| {
            docs.into_iter()
                .map(|d| d.into_iter().map(|s| s.to_string()).collect())
                .collect()
        })
    }

    fn build_raw(docs: &[Vec<String>], ids: &[String]) -> InvertedIndex {
        let passages = docs
            .iter()
            .zip(ids)
            .map(|(d, id)| Passage::new(id.clone(), None, format!("- {}", d.join(" "))))
            .collect();
        InvertedIndex::build(
            &Corpus::new(passages, false).unwrap(),
            Analyzer::surface(),
            Bm25Params::default(),
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn scores_match_literal_formula(docs in arb_corpus(), query in proptest::collection::vec(prop_oneof!["a", "b", "c", "z"], 1..5)) {
            let ids: Vec<String> = (0..docs.len()).map(|i| format!("d{i:03}")).collect();
            let idx = build_raw(&docs, &ids);
            let query: Vec<String> = query.into_iter().collect();
            for d in 0..docs.len() {
                let got = idx.score(&query, d);
                prop_assert!(got >= 0.0);
                prop_assert!((got - oracle(&docs, &query, d, 1.2, 0.75)).abs() < 1e-9);
            }
        }

        #[test]
        fn score_invariant_under_corpus_permutation(docs in arb_corpus(), rot in 0usize..30) {
            let ids: Vec<String> = (0..docs.len()).map(|i| format!("d{i:03}")).collect();
            let idx = build_raw(&docs, &ids);
            let r = rot % docs.len();
            let mut docs2 = docs.clone();
            let mut ids2 = ids.clone();
            docs2.rotate_left(r);
            ids2.rotate_left(r);
            let idx2 = build_raw(&docs2, &ids2);
            let query = ["a", "c", "f"];
            for (d, id) in ids.iter().enumerate() {
                let d2 = ids2.iter().position(|x| x == id).unwrap();
                prop_assert!((idx.score(&query, d) - idx2.score(&query, d2)).abs() < 1e-12);
            }
        }
    }
}
