//! Lexical and dense passage retrieval, a training-data refinery for
//! question-passage datasets, and a retrieval evaluation harness.
//!
//! The crate is organised by stage:
//!
//! - [`model`] and [`io`]: passages, questions, labeled pairs, runs and their
//!   JSONL / TREC serializations.
//! - [`text`]: tokenization and dictionary lemmatization.
//! - [`bm25`]: inverted index with exact top-k BM25 retrieval.
//! - [`dense`]: embedding matrices and exact inner-product search.
//! - [`scoring`]: the `[0, 1]` relevance scorer abstraction (Jaccard oracle,
//!   replayed score files, remote HTTP scorer).
//! - [`pipelines`]: question matching, hard-negative mining, denoising, NLI
//!   conversion and training-file export.
//! - [`eval`]: Accuracy@k and NDCG@k.

pub mod bm25;
pub mod dense;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod pipelines;
pub mod scoring;
pub mod text;

pub use bm25::{Bm25Params, InvertedIndex};
pub use dense::EmbeddingMatrix;
pub use error::{Error, Result};
pub use eval::{evaluate, EvalReport, Qrels};
pub use model::{
    Corpus, Dataset, DatasetStats, Hit, LabeledPair, Passage, Question, Relevance, RunList,
};
pub use scoring::{Scorer, ScorerSpec};
pub use text::{Analyzer, AnalyzedMode, Lexicon};
