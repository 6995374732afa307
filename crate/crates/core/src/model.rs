//! Domain types shared by every stage: passages, questions, labeled pairs,
//! corpora, datasets and ranked runs.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A retrievable unit of text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    #[serde(default)]
    pub title: Option<String>,
    pub text: String,
    /// Lemma stream, filled in by [`Corpus::analyze`].
    #[serde(skip)]
    pub lemmas: Option<Vec<String>>,
}

impl Passage {
    pub fn new(id: impl Into<String>, title: Option<String>, text: impl Into<String>) -> Self {
        Passage {
            id: id.into(),
            title,
            text: text.into(),
            lemmas: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::invalid("passage with empty id"));
        }
        if self.text.trim().is_empty() {
            return Err(Error::invalid(format!("passage {} has empty text", self.id)));
        }
        Ok(())
    }

    /// Text as seen by the index: `title + " " + text` when titles are used.
    pub fn indexed_text(&self, use_title: bool) -> String {
        match (&self.title, use_title) {
            (Some(title), true) if !title.is_empty() => format!("{title} {}", self.text),
            _ => self.text.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    #[serde(skip)]
    pub lemmas: Option<Vec<String>>,
}

impl Question {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Question {
            id: id.into(),
            text: text.into(),
            lemmas: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relevance {
    Positive,
    Negative,
}

impl Relevance {
    pub fn from_flag(relevant: bool) -> Self {
        if relevant {
            Relevance::Positive
        } else {
            Relevance::Negative
        }
    }

    pub fn is_positive(self) -> bool {
        self == Relevance::Positive
    }
}

/// One row of a question-passage dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub question_id: String,
    pub passage_id: String,
    pub relevance: Relevance,
    pub answer: Option<String>,
    pub score: Option<f64>,
}

impl LabeledPair {
    pub fn new(
        question_id: impl Into<String>,
        passage_id: impl Into<String>,
        relevance: Relevance,
    ) -> Self {
        LabeledPair {
            question_id: question_id.into(),
            passage_id: passage_id.into(),
            relevance,
            answer: None,
            score: None,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    pub fn with_answer(mut self, answer: impl Into<String>) -> Self {
        self.answer = Some(answer.into());
        self
    }

    pub fn key(&self) -> (&str, &str) {
        (&self.question_id, &self.passage_id)
    }

    pub fn validate(&self) -> Result<()> {
        if self.question_id.is_empty() || self.passage_id.is_empty() {
            return Err(Error::invalid("pair with empty question or passage id"));
        }
        if let Some(score) = self.score {
            if !(0.0..=1.0).contains(&score) {
                return Err(Error::invalid(format!(
                    "pair ({}, {}) has score {score} outside [0, 1]",
                    self.question_id, self.passage_id
                )));
            }
        }
        Ok(())
    }
}

/// Canonical pair order: question id, then passage id.
pub fn canonical_pair_order(a: &LabeledPair, b: &LabeledPair) -> Ordering {
    a.key().cmp(&b.key())
}

/// Ordered, id-unique collection of passages.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    passages: Vec<Passage>,
    by_id: HashMap<String, usize>,
    pub use_title: bool,
}

impl Corpus {
    pub fn new(passages: Vec<Passage>, use_title: bool) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(passages.len());
        for (ordinal, passage) in passages.iter().enumerate() {
            passage.validate()?;
            if by_id.insert(passage.id.clone(), ordinal).is_some() {
                return Err(Error::invalid(format!("duplicate passage id {}", passage.id)));
            }
        }
        Ok(Corpus {
            passages,
            by_id,
            use_title,
        })
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn get(&self, id: &str) -> Option<&Passage> {
        self.by_id.get(id).map(|&i| &self.passages[i])
    }

    pub fn indexed_text(&self, passage: &Passage) -> String {
        passage.indexed_text(self.use_title)
    }

    /// Caches the lemma stream of every passage.
    pub fn analyze(&mut self, analyzer: &crate::text::Analyzer) {
        let use_title = self.use_title;
        for passage in &mut self.passages {
            passage.lemmas = Some(analyzer.lemmas(&passage.indexed_text(use_title)));
        }
    }
}

/// A labeled question-passage dataset together with its question and passage
/// side tables. Insertion order is preserved everywhere.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    questions: Vec<Question>,
    question_index: HashMap<String, usize>,
    passages: Vec<Passage>,
    passage_index: HashMap<String, usize>,
    pairs: Vec<LabeledPair>,
    pair_keys: HashSet<(String, String)>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a question. Re-registering an id with different text fails.
    pub fn add_question(&mut self, question: Question) -> Result<()> {
        if question.id.is_empty() {
            return Err(Error::invalid("question with empty id"));
        }
        match self.question_index.get(&question.id) {
            Some(&i) if self.questions[i].text != question.text => Err(Error::invalid(format!(
                "conflicting text for question {}",
                question.id
            ))),
            Some(_) => Ok(()),
            None => {
                self.question_index
                    .insert(question.id.clone(), self.questions.len());
                self.questions.push(question);
                Ok(())
            }
        }
    }

    pub fn add_passage(&mut self, passage: Passage) -> Result<()> {
        passage.validate()?;
        match self.passage_index.get(&passage.id) {
            Some(&i) => {
                let known = &self.passages[i];
                if known.text != passage.text || known.title != passage.title {
                    return Err(Error::invalid(format!(
                        "conflicting content for passage {}",
                        passage.id
                    )));
                }
                Ok(())
            }
            None => {
                self.passage_index
                    .insert(passage.id.clone(), self.passages.len());
                self.passages.push(passage);
                Ok(())
            }
        }
    }

    /// Adds a pair. Side-table entries are optional: pairs read from TREC
    /// qrels carry ids only, and stages that need text check for it.
    pub fn add_pair(&mut self, pair: LabeledPair) -> Result<()> {
        pair.validate()?;
        let key = (pair.question_id.clone(), pair.passage_id.clone());
        if !self.pair_keys.insert(key) {
            return Err(Error::DuplicatePair {
                question_id: pair.question_id,
                passage_id: pair.passage_id,
            });
        }
        self.pairs.push(pair);
        Ok(())
    }

    /// Builds a dataset holding `pairs`, copying the side-table entries they
    /// reference from `source`. Questions of `source` without pairs are kept
    /// only when `keep_all_questions` is set.
    pub fn derive(source: &Dataset, pairs: Vec<LabeledPair>, keep_all_questions: bool) -> Result<Self> {
        let mut out = Dataset::new();
        if keep_all_questions {
            for q in &source.questions {
                out.add_question(q.clone())?;
            }
        }
        for pair in pairs {
            if let Some(q) = source.question(&pair.question_id) {
                out.add_question(q.clone())?;
            }
            if let Some(p) = source.passage(&pair.passage_id) {
                out.add_passage(p.clone())?;
            }
            out.add_pair(pair)?;
        }
        Ok(out)
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn pairs(&self) -> &[LabeledPair] {
        &self.pairs
    }

    pub fn question(&self, id: &str) -> Option<&Question> {
        self.question_index.get(id).map(|&i| &self.questions[i])
    }

    pub fn passage(&self, id: &str) -> Option<&Passage> {
        self.passage_index.get(id).map(|&i| &self.passages[i])
    }

    pub fn contains_pair(&self, question_id: &str, passage_id: &str) -> bool {
        self.pair_keys
            .contains(&(question_id.to_string(), passage_id.to_string()))
    }

    pub fn question_text(&self, id: &str) -> Result<&str> {
        self.question(id)
            .map(|q| q.text.as_str())
            .ok_or_else(|| Error::invalid(format!("no text for question {id}")))
    }

    pub fn passage_text(&self, id: &str) -> Result<&str> {
        self.passage(id)
            .map(|p| p.text.as_str())
            .ok_or_else(|| Error::invalid(format!("no text for passage {id}")))
    }

    pub fn stats(&self) -> DatasetStats {
        DatasetStats::from_pairs(self.questions.len(), &self.pairs)
    }
}

/// Question and pair counts in the layout of a dataset statistics table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub questions_with_positive: usize,
    pub questions_with_negative: usize,
    pub questions_total: usize,
    pub passages_positive: usize,
    pub passages_negative: usize,
    pub passages_total: usize,
}

impl DatasetStats {
    /// `questions_total` counts every known question, including those with no
    /// pair rows; passage counts are pair-row counts per relevance.
    pub fn from_pairs(questions_total: usize, pairs: &[LabeledPair]) -> Self {
        let mut with_positive = HashSet::new();
        let mut with_negative = HashSet::new();
        let mut all = HashSet::new();
        let mut positive = 0;
        for pair in pairs {
            all.insert(pair.question_id.as_str());
            if pair.relevance.is_positive() {
                positive += 1;
                with_positive.insert(pair.question_id.as_str());
            } else {
                with_negative.insert(pair.question_id.as_str());
            }
        }
        DatasetStats {
            questions_with_positive: with_positive.len(),
            questions_with_negative: with_negative.len(),
            questions_total: questions_total.max(all.len()),
            passages_positive: positive,
            passages_negative: pairs.len() - positive,
            passages_total: pairs.len(),
        }
    }
}

fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

impl fmt::Display for DatasetStats {
    /// Six comma-grouped counts: questions positive/negative/total, then
    /// passages positive/negative/total.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
            thousands(self.questions_with_positive),
            thousands(self.questions_with_negative),
            thousands(self.questions_total),
            thousands(self.passages_positive),
            thousands(self.passages_negative),
            thousands(self.passages_total),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub passage_id: String,
    pub score: f64,
}

impl Hit {
    pub fn new(passage_id: impl Into<String>, score: f64) -> Self {
        Hit {
            passage_id: passage_id.into(),
            score,
        }
    }
}

/// Rank order used by every ranked list: descending score, ties broken by
/// ascending passage id. Signed zeros compare equal.
pub fn rank_order(a: &Hit, b: &Hit) -> Ordering {
    (b.score + 0.0)
        .total_cmp(&(a.score + 0.0))
        .then_with(|| a.passage_id.cmp(&b.passage_id))
}

/// A ranked list of hits for one question.
///
/// Construction enforces: finite scores, non-increasing scores, ties in
/// ascending passage id order, and no repeated passage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunList {
    question_id: String,
    hits: Vec<Hit>,
}

impl RunList {
    /// Wraps hits that are already in rank order.
    pub fn new(question_id: impl Into<String>, hits: Vec<Hit>) -> Result<Self> {
        let question_id = question_id.into();
        check_hits(&question_id, &hits)?;
        for w in hits.windows(2) {
            if rank_order(&w[0], &w[1]) != Ordering::Less {
                return Err(Error::invalid(format!(
                    "run {question_id}: hits {} and {} out of rank order",
                    w[0].passage_id, w[1].passage_id
                )));
            }
        }
        Ok(RunList { question_id, hits })
    }

    /// Sorts hits into rank order.
    pub fn from_unsorted(question_id: impl Into<String>, mut hits: Vec<Hit>) -> Result<Self> {
        let question_id = question_id.into();
        check_hits(&question_id, &hits)?;
        hits.sort_by(rank_order);
        Ok(RunList { question_id, hits })
    }

    pub fn empty(question_id: impl Into<String>) -> Self {
        RunList {
            question_id: question_id.into(),
            hits: Vec::new(),
        }
    }

    pub fn question_id(&self) -> &str {
        &self.question_id
    }

    pub fn hits(&self) -> &[Hit] {
        &self.hits
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn truncate(&mut self, k: usize) {
        self.hits.truncate(k);
    }
}

fn check_hits(question_id: &str, hits: &[Hit]) -> Result<()> {
    if question_id.is_empty() {
        return Err(Error::invalid("run with empty question id"));
    }
    let mut seen = HashSet::with_capacity(hits.len());
    for hit in hits {
        if !hit.score.is_finite() {
            return Err(Error::invalid(format!(
                "run {question_id}: non-finite score for {}",
                hit.passage_id
            )));
        }
        if !seen.insert(hit.passage_id.as_str()) {
            return Err(Error::invalid(format!(
                "run {question_id}: passage {} listed twice",
                hit.passage_id
            )));
        }
    }
    Ok(())
}
