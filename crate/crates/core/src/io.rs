//! File formats: pairs / corpus / question JSONL, TREC qrels and TREC runs.
//!
//! ```text
//! pairs JSONL   {"question_id", "question", "passage_id", "passage_title",
//!                "passage_text", "relevant", "answer", "score"}
//! corpus JSONL  {"id", "title", "text"}
//! TREC qrels    qid 0 pid rel
//! TREC run      qid Q0 pid rank score tag
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Corpus, Dataset, Hit, LabeledPair, Passage, Question, Relevance, RunList};

/// Tag written in the last column of TREC run files.
pub const DEFAULT_RUN_TAG: &str = "sieve";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairFormat {
    Jsonl,
    TrecQrels,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunFormat {
    Jsonl,
    Trec,
}

fn is_jsonl(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("jsonl" | "json" | "ndjson")
    )
}

impl PairFormat {
    /// JSONL for `.jsonl`/`.json`/`.ndjson`, TREC qrels otherwise.
    pub fn from_path(path: &Path) -> Self {
        if is_jsonl(path) {
            PairFormat::Jsonl
        } else {
            PairFormat::TrecQrels
        }
    }
}

impl RunFormat {
    pub fn from_path(path: &Path) -> Self {
        if is_jsonl(path) {
            RunFormat::Jsonl
        } else {
            RunFormat::Trec
        }
    }
}

impl std::str::FromStr for RunFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(RunFormat::Jsonl),
            "trec" | "trec_run" => Ok(RunFormat::Trec),
            other => Err(Error::Config(format!("unknown run format {other:?}"))),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses one JSON value per non-blank line; `f` receives the 1-based line number.
pub fn read_jsonl<T, F>(path: &Path, mut f: F) -> Result<()>
where
    T: DeserializeOwned,
    F: FnMut(usize, T) -> Result<()>,
{
    let content = read_text(path)?;
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: T =
            serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        f(i + 1, value)?;
    }
    Ok(())
}

/// Writes one JSON value per line.
pub fn write_jsonl<'a, T, I>(path: &Path, rows: I) -> Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut out, row)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for line in lines {
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct PairRow {
    question_id: String,
    question: String,
    passage_id: String,
    #[serde(default)]
    passage_title: Option<String>,
    passage_text: String,
    relevant: bool,
    #[serde(default)]
    answer: Option<String>,
    #[serde(default)]
    score: Option<f64>,
}

/// Loads a pair dataset. TREC qrels rows with `rel > 0` become positives,
/// the rest negatives; they carry no question or passage text.
pub fn load_pairs(path: impl AsRef<Path>, format: PairFormat) -> Result<Dataset> {
    let path = path.as_ref();
    let mut ds = Dataset::new();
    match format {
        PairFormat::Jsonl => read_jsonl(path, |line, row: PairRow| {
            let at = |e: Error| match e {
                Error::DuplicatePair { .. } => e,
                other => Error::parse(path, line, other.to_string()),
            };
            ds.add_question(Question::new(row.question_id.clone(), row.question))
                .map_err(at)?;
            ds.add_passage(Passage::new(
                row.passage_id.clone(),
                row.passage_title,
                row.passage_text,
            ))
            .map_err(at)?;
            ds.add_pair(LabeledPair {
                question_id: row.question_id,
                passage_id: row.passage_id,
                relevance: Relevance::from_flag(row.relevant),
                answer: row.answer,
                score: row.score,
            })
            .map_err(at)
        })?,
        PairFormat::TrecQrels => {
            for (i, line) in read_text(path)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let (qid, pid, rel) = parse_qrels_line(line)
                    .map_err(|m| Error::parse(path, i + 1, m))?;
                ds.add_pair(LabeledPair::new(qid, pid, Relevance::from_flag(rel > 0)))?;
            }
        }
    }
    Ok(ds)
}

/// `qid iter pid rel`; the iteration column is ignored.
pub fn parse_qrels_line(line: &str) -> std::result::Result<(&str, &str, i64), String> {
    let cols: Vec<&str> = line.split_whitespace().collect();
    if cols.len() != 4 {
        return Err(format!("expected 4 qrels columns, found {}", cols.len()));
    }
    let rel = cols[3]
        .parse::<i64>()
        .map_err(|_| format!("relevance {:?} is not an integer", cols[3]))?;
    Ok((cols[0], cols[2], rel))
}

/// Writes pairs JSONL. Every pair must have question and passage text.
pub fn write_pairs(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let mut rows = Vec::with_capacity(ds.pairs().len());
    for pair in ds.pairs() {
        let passage = ds
            .passage(&pair.passage_id)
            .ok_or_else(|| Error::invalid(format!("no text for passage {}", pair.passage_id)))?;
        rows.push(PairRow {
            question_id: pair.question_id.clone(),
            question: ds.question_text(&pair.question_id)?.to_string(),
            passage_id: pair.passage_id.clone(),
            passage_title: passage.title.clone(),
            passage_text: passage.text.clone(),
            relevant: pair.relevance.is_positive(),
            answer: pair.answer.clone(),
            score: pair.score,
        });
    }
    write_jsonl(path.as_ref(), &rows)
}

/// Writes pairs as TREC qrels (`rel` is 1 or 0).
pub fn write_qrels(path: impl AsRef<Path>, pairs: &[LabeledPair]) -> Result<()> {
    write_lines(
        path.as_ref(),
        pairs.iter().map(|p| {
            format!(
                "{} 0 {} {}",
                p.question_id,
                p.passage_id,
                u8::from(p.relevance.is_positive())
            )
        }),
    )
}

pub fn load_corpus(path: impl AsRef<Path>, use_title: bool) -> Result<Corpus> {
    let path = path.as_ref();
    let mut passages = Vec::new();
    read_jsonl(path, |line, p: Passage| {
        p.validate()
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
        passages.push(p);
        Ok(())
    })?;
    Corpus::new(passages, use_title)
}

pub fn write_corpus(path: impl AsRef<Path>, corpus: &Corpus) -> Result<()> {
    write_jsonl(path.as_ref(), corpus.passages())
}

#[derive(Deserialize)]
struct QuestionRow {
    #[serde(alias = "question_id")]
    id: String,
    #[serde(alias = "question")]
    text: String,
}

/// Reads questions JSONL (`{"id", "text"}`; `question_id`/`question` accepted).
pub fn load_questions(path: impl AsRef<Path>) -> Result<Vec<Question>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    let mut seen = HashMap::new();
    read_jsonl(path, |line, row: QuestionRow| {
        if row.id.is_empty() {
            return Err(Error::parse(path, line, "empty question id"));
        }
        if seen.insert(row.id.clone(), line).is_some() {
            return Err(Error::parse(path, line, format!("duplicate question id {}", row.id)));
        }
        out.push(Question::new(row.id, row.text));
        Ok(())
    })?;
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct RunRow {
    question_id: String,
    hits: Vec<Hit>,
}

pub fn write_runs(path: impl AsRef<Path>, runs: &[RunList], format: RunFormat) -> Result<()> {
    let path = path.as_ref();
    match format {
        RunFormat::Jsonl => write_jsonl(path, runs),
        RunFormat::Trec => write_lines(path, trec_run_lines(runs, DEFAULT_RUN_TAG)),
    }
}

pub fn trec_run_lines<'a>(runs: &'a [RunList], tag: &'a str) -> impl Iterator<Item = String> + 'a {
    runs.iter().flat_map(move |run| {
        run.hits().iter().enumerate().map(move |(i, hit)| {
            format!(
                "{} Q0 {} {} {} {}",
                run.question_id(),
                hit.passage_id,
                i + 1,
                hit.score,
                tag
            )
        })
    })
}

/// Loads runs. TREC rows are grouped by question id (first-appearance order)
/// and re-sorted into rank order; the rank column is ignored.
pub fn load_runs(path: impl AsRef<Path>, format: RunFormat) -> Result<Vec<RunList>> {
    let path = path.as_ref();
    match format {
        RunFormat::Jsonl => {
            let mut runs = Vec::new();
            read_jsonl(path, |line, row: RunRow| {
                let run = RunList::from_unsorted(row.question_id, row.hits)
                    .map_err(|e| Error::parse(path, line, e.to_string()))?;
                runs.push(run);
                Ok(())
            })?;
            Ok(runs)
        }
        RunFormat::Trec => {
            let mut order = Vec::new();
            let mut grouped: HashMap<String, Vec<Hit>> = HashMap::new();
            for (i, line) in read_text(path)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let cols: Vec<&str> = line.split_whitespace().collect();
                if cols.len() != 6 {
                    return Err(Error::parse(
                        path,
                        i + 1,
                        format!("expected 6 run columns, found {}", cols.len()),
                    ));
                }
                let score = cols[4].parse::<f64>().map_err(|_| {
                    Error::parse(path, i + 1, format!("score {:?} is not a number", cols[4]))
                })?;
                let hits = grouped.entry(cols[0].to_string()).or_insert_with(|| {
                    order.push(cols[0].to_string());
                    Vec::new()
                });
                hits.push(Hit::new(cols[2], score));
            }
            order
                .into_iter()
                .map(|qid| {
                    let hits = grouped.remove(&qid).unwrap_or_default();
                    RunList::from_unsorted(qid, hits)
                })
                .collect()
        }
    }
}

/// Group of pairs per question id, ordered by question id.
pub fn pairs_by_question(pairs: &[LabeledPair]) -> BTreeMap<&str, Vec<&LabeledPair>> {
    let mut out: BTreeMap<&str, Vec<&LabeledPair>> = BTreeMap::new();
    for pair in pairs {
        out.entry(pair.question_id.as_str()).or_default().push(pair);
    }
    out
}
