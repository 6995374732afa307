//! Relevance scorers mapping a (question, passage) pair to a score in `[0, 1]`.
//!
//! Three backends sit behind one interface:
//!
//! - `oracle`: Jaccard similarity of the two lemma sets.
//! - `file:PATH`: replay of previously computed scores, keyed by
//!   `(question_id, passage_id)` in JSONL rows `{"question_id", "passage_id", "score"}`.
//! - `remote:URL`: HTTP service answering `POST /score` with
//!   `{"pairs": [[q, p], ...]}` → `{"scores": [...]}`.
//!
//! Whatever the backend, every score is checked to lie in `[0, 1]`.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_jsonl;
use crate::text::Analyzer;

pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_WINDOW: usize = 4;
pub const DEFAULT_RETRIES: usize = 3;
pub const DEFAULT_BACKOFF: Duration = Duration::from_millis(200);

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteOptions {
    pub batch_size: usize,
    /// Maximum number of batches in flight at once.
    pub window: usize,
    pub retries: usize,
    /// Delay before the first retry; doubled for each further retry.
    pub backoff: Duration,
    pub timeout: Duration,
}

impl Default for RemoteOptions {
    fn default() -> Self {
        RemoteOptions {
            batch_size: DEFAULT_BATCH_SIZE,
            window: DEFAULT_WINDOW,
            retries: DEFAULT_RETRIES,
            backoff: DEFAULT_BACKOFF,
            timeout: Duration::from_secs(120),
        }
    }
}

/// Which scorer to use and where its inputs live.
#[derive(Debug, Clone, PartialEq)]
pub enum ScorerSpec {
    OverlapOracle,
    FileScores { path: PathBuf },
    Remote { endpoint: String, options: RemoteOptions },
}

impl std::str::FromStr for ScorerSpec {
    type Err = Error;

    /// `oracle` | `overlap_oracle` | `file:PATH` | `remote:URL`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "oracle" || s == "overlap_oracle" {
            return Ok(ScorerSpec::OverlapOracle);
        }
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err(Error::Config("file scorer needs a path".into()));
            }
            return Ok(ScorerSpec::FileScores { path: path.into() });
        }
        if let Some(url) = s.strip_prefix("remote:") {
            if !(url.starts_with("http://") || url.starts_with("https://")) {
                return Err(Error::Config(format!("remote scorer needs an http(s) URL, got {url:?}")));
            }
            return Ok(ScorerSpec::Remote {
                endpoint: url.to_string(),
                options: RemoteOptions::default(),
            });
        }
        Err(Error::Config(format!(
            "unknown scorer {s:?} (expected oracle, file:PATH or remote:URL)"
        )))
    }
}

impl ScorerSpec {
    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        if let ScorerSpec::Remote { options, .. } = &mut self {
            options.batch_size = batch_size.max(1);
        }
        self
    }
}

/// One pair to score. Text drives the oracle and remote backends, ids drive
/// replayed score files.
#[derive(Debug, Clone, Copy)]
pub struct ScoreRequest<'a> {
    pub question_id: &'a str,
    pub question: &'a str,
    pub passage_id: &'a str,
    pub passage: &'a str,
}

#[derive(Debug)]
enum Backend {
    Oracle(Analyzer),
    File(HashMap<(String, String), f64>),
    Remote(RemoteClient),
}

#[derive(Debug)]
pub struct Scorer {
    backend: Backend,
}

#[derive(Deserialize)]
struct ScoreRow {
    question_id: String,
    passage_id: String,
    score: f64,
}

impl Scorer {
    /// `analyzer` supplies the lemmas for the oracle backend.
    pub fn from_spec(spec: &ScorerSpec, analyzer: Analyzer) -> Result<Self> {
        let backend = match spec {
            ScorerSpec::OverlapOracle => Backend::Oracle(analyzer),
            ScorerSpec::FileScores { path } => Backend::File(load_score_file(path)?),
            ScorerSpec::Remote { endpoint, options } => {
                Backend::Remote(RemoteClient::new(endpoint, options.clone())?)
            }
        };
        Ok(Scorer { backend })
    }

    pub fn oracle(analyzer: Analyzer) -> Self {
        Scorer {
            backend: Backend::Oracle(analyzer),
        }
    }

    /// One score per request, in request order.
    pub fn score_pairs(&self, requests: &[ScoreRequest<'_>]) -> Result<Vec<f64>> {
        if requests.is_empty() {
            return Ok(Vec::new());
        }
        let scores = match &self.backend {
            Backend::Oracle(analyzer) => requests
                .par_iter()
                .map(|r| jaccard(&analyzer.lemmas(r.question), &analyzer.lemmas(r.passage)))
                .collect(),
            Backend::File(table) => requests
                .iter()
                .map(|r| {
                    table
                        .get(&(r.question_id.to_string(), r.passage_id.to_string()))
                        .copied()
                        .ok_or_else(|| {
                            Error::invalid(format!(
                                "score file has no entry for ({}, {})",
                                r.question_id, r.passage_id
                            ))
                        })
                })
                .collect::<Result<Vec<_>>>()?,
            Backend::Remote(client) => client.score(requests)?,
        };
        for (r, &s) in requests.iter().zip(&scores) {
            check_score(s, r)?;
        }
        Ok(scores)
    }
}

fn check_score(score: f64, r: &ScoreRequest<'_>) -> Result<()> {
    if (0.0..=1.0).contains(&score) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "score {score} for ({}, {}) outside [0, 1]",
            r.question_id, r.passage_id
        )))
    }
}

fn load_score_file(path: &Path) -> Result<HashMap<(String, String), f64>> {
    let mut table = HashMap::new();
    read_jsonl(path, |line, row: ScoreRow| {
        if !(0.0..=1.0).contains(&row.score) {
            return Err(Error::parse(path, line, format!("score {} outside [0, 1]", row.score)));
        }
        if table
            .insert((row.question_id.clone(), row.passage_id.clone()), row.score)
            .is_some()
        {
            return Err(Error::parse(
                path,
                line,
                format!("duplicate score for ({}, {})", row.question_id, row.passage_id),
            ));
        }
        Ok(())
    })?;
    Ok(table)
}

/// Writes `{"question_id", "passage_id", "score"}` rows readable by `file:` scorers.
pub fn write_score_file(path: impl AsRef<Path>, rows: &[(String, String, f64)]) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        question_id: &'a str,
        passage_id: &'a str,
        score: f64,
    }
    let rows: Vec<Row<'_>> = rows
        .iter()
        .map(|(q, p, s)| Row {
            question_id: q,
            passage_id: p,
            score: *s,
        })
        .collect();
    crate::io::write_jsonl(path.as_ref(), &rows)
}

/// `|A ∩ B| / |A ∪ B|` over the distinct tokens of each side; 0 when both are empty.
pub fn jaccard<S: AsRef<str>>(a: &[S], b: &[S]) -> f64 {
    let a: HashSet<&str> = a.iter().map(AsRef::as_ref).collect();
    let b: HashSet<&str> = b.iter().map(AsRef::as_ref).collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

#[derive(Serialize)]
struct ScoreRequestBody<'a> {
    pairs: Vec<[&'a str; 2]>,
}

#[derive(Deserialize)]
struct ScoreResponseBody {
    scores: Vec<f64>,
}

#[derive(Debug)]
struct RemoteClient {
    url: String,
    options: RemoteOptions,
    agent: ureq::Agent,
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

impl RemoteClient {
    fn new(endpoint: &str, options: RemoteOptions) -> Result<Self> {
        if options.batch_size == 0 || options.window == 0 {
            return Err(Error::Config("remote batch size and window must be >= 1".into()));
        }
        let base = endpoint.trim_end_matches('/');
        let url = if base.ends_with("/score") {
            base.to_string()
        } else {
            format!("{base}/score")
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(options.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteClient {
            url,
            options,
            agent,
        })
    }

    fn score(&self, requests: &[ScoreRequest<'_>]) -> Result<Vec<f64>> {
        let batches: Vec<&[ScoreRequest<'_>]> = requests.chunks(self.options.batch_size).collect();
        let results: Mutex<Vec<Option<Vec<f64>>>> = Mutex::new(vec![None; batches.len()]);
        let failure: Mutex<Option<Error>> = Mutex::new(None);
        let next = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);

        std::thread::scope(|scope| {
            for _ in 0..self.options.window.min(batches.len()) {
                scope.spawn(|| loop {
                    if abort.load(Ordering::Relaxed) {
                        return;
                    }
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(batch) = batches.get(i) else {
                        return;
                    };
                    match self.score_batch(batch) {
                        Ok(scores) => results.lock().unwrap()[i] = Some(scores),
                        Err(e) => {
                            abort.store(true, Ordering::Relaxed);
                            failure.lock().unwrap().get_or_insert(e);
                            return;
                        }
                    }
                });
            }
        });

        if let Some(e) = failure.into_inner().unwrap() {
            return Err(e);
        }
        Ok(results
            .into_inner()
            .unwrap()
            .into_iter()
            .flat_map(|r| r.expect("every batch scored"))
            .collect())
    }

    fn score_batch(&self, batch: &[ScoreRequest<'_>]) -> Result<Vec<f64>> {
        let body = ScoreRequestBody {
            pairs: batch.iter().map(|r| [r.question, r.passage]).collect(),
        };
        let attempts = self.options.retries + 1;
        let mut delay = self.options.backoff;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.attempt(&body, batch.len()) {
                Ok(scores) => return Ok(scores),
                Err(Attempt::Fatal(message)) => {
                    return Err(Error::Remote {
                        attempts: attempt,
                        message,
                    })
                }
                Err(Attempt::Retry(message)) => last = message,
            }
            if attempt < attempts {
                std::thread::sleep(delay);
                delay *= 2;
            }
        }
        Err(Error::Remote {
            attempts,
            message: format!("{}: {last}", self.url),
        })
    }

    fn attempt(&self, body: &ScoreRequestBody<'_>, expected: usize) -> Result<Vec<f64>, Attempt> {
        let mut response = self
            .agent
            .post(&self.url)
            .send_json(body)
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if status != 200 {
            return Err(Attempt::Fatal(format!("{}: HTTP {status}", self.url)));
        }
        let parsed: ScoreResponseBody = response
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Fatal(format!("{}: malformed response: {e}", self.url)))?;
        if parsed.scores.len() != expected {
            return Err(Attempt::Fatal(format!(
                "{}: sent {expected} pairs, received {} scores",
                self.url,
                parsed.scores.len()
            )));
        }
        Ok(parsed.scores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn req<'a>(q: &'a str, p: &'a str) -> ScoreRequest<'a> {
        ScoreRequest {
            question_id: "q",
            question: q,
            passage_id: "p",
            passage: p,
        }
    }

    #[test]
    fn oracle_examples() {
        let s = Scorer::oracle(Analyzer::surface());
        let scores = s
            .score_pairs(&[req("kot pies", "kot pies"), req("kot", "ryba"), req("a b", "b c d")])
            .unwrap();
        assert_eq!(scores, [1.0, 0.0, 0.25]);
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("oracle".parse::<ScorerSpec>().unwrap(), ScorerSpec::OverlapOracle);
        assert!(matches!(
            "file:s.jsonl".parse::<ScorerSpec>().unwrap(),
            ScorerSpec::FileScores { .. }
        ));
        let remote = "remote:http://localhost:9000".parse::<ScorerSpec>().unwrap();
        assert!(matches!(remote, ScorerSpec::Remote { ref endpoint, .. } if endpoint == "http://localhost:9000"));
        assert!("remote:localhost".parse::<ScorerSpec>().is_err());
        assert!("cross-encoder".parse::<ScorerSpec>().is_err());
    }

    #[test]
    fn file_scores_replay_and_missing_pair() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        write_score_file(&path, &[("q1".into(), "p1".into(), 0.7)]).unwrap();
        let s = Scorer::from_spec(&ScorerSpec::FileScores { path }, Analyzer::surface()).unwrap();
        let hit = ScoreRequest {
            question_id: "q1",
            question: "",
            passage_id: "p1",
            passage: "",
        };
        assert_eq!(s.score_pairs(&[hit]).unwrap(), [0.7]);
        let miss = ScoreRequest {
            passage_id: "p2",
            ..hit
        };
        let err = s.score_pairs(&[hit, miss]).unwrap_err();
        assert!(err.to_string().contains("(q1, p2)"), "{err}");
    }

    #[test]
    fn file_scores_out_of_range_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        std::fs::write(&path, "{\"question_id\":\"q\",\"passage_id\":\"p\",\"score\":1.5}\n").unwrap();
        assert!(Scorer::from_spec(&ScorerSpec::FileScores { path }, Analyzer::surface()).is_err());
    }

    proptest! {
        #[test]
        fn jaccard_symmetric_and_order_free(
            a in proptest::collection::vec("[a-e]", 0..8),
            b in proptest::collection::vec("[a-e]", 0..8),
        ) {
            let s = jaccard(&a, &b);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, jaccard(&b, &a));
            let mut a2 = a.clone();
            a2.reverse();
            a2.extend(a.iter().cloned());
            prop_assert_eq!(s, jaccard(&a2, &b));
        }

        #[test]
        fn oracle_permutation_equivariant(texts in proptest::collection::vec(("[a-d ]{0,10}", "[a-d ]{0,10}"), 1..10)) {
            let s = Scorer::oracle(Analyzer::surface());
            let reqs: Vec<_> = texts.iter().map(|(q, p)| req(q, p)).collect();
            let forward = s.score_pairs(&reqs).unwrap();
            let rev: Vec<_> = reqs.iter().rev().copied().collect();
            let mut backward = s.score_pairs(&rev).unwrap();
            backward.reverse();
            prop_assert_eq!(forward.len(), reqs.len());
            prop_assert_eq!(forward, backward);
        }
    }
}
