//! Dataset construction and refinement: question-passage matching, hard-negative
//! mining, denoising, NLI conversion and trainer-ready export.
//!
//! Every pipeline returns pairs in canonical order (question id, then passage
//! id), so results do not depend on how work was split across threads.

mod config;
mod denoise;
mod export;
mod matching;
mod mining;
mod nli;

pub use config::{normalize_question, DenoiseConfig, MatchConfig, MineConfig, PipelineConfig};
pub use denoise::{denoise, is_blacklisted_question, DenoiseReport, Filter, Rejection};
pub use export::{export_training, training_records, TrainingPassage, TrainingRecord};
pub use matching::match_questions;
pub use mining::mine_hard_negatives;
pub use nli::{convert_nli, load_nli, NliLabel, NliRecord};

use crate::error::{Error, Result};
use crate::model::{canonical_pair_order, Corpus, Dataset, LabeledPair, Question};

/// Wraps pipeline output pairs into a dataset, pulling question text from
/// `questions` and passage text from `corpus`.
pub fn assemble<'a>(
    mut pairs: Vec<LabeledPair>,
    questions: impl Fn(&str) -> Option<&'a Question>,
    corpus: &Corpus,
) -> Result<Dataset> {
    pairs.sort_by(canonical_pair_order);
    let mut ds = Dataset::new();
    for pair in pairs {
        let q = questions(&pair.question_id)
            .ok_or_else(|| Error::invalid(format!("unknown question {}", pair.question_id)))?;
        let p = corpus
            .get(&pair.passage_id)
            .ok_or_else(|| Error::invalid(format!("passage {} not in corpus", pair.passage_id)))?;
        ds.add_question(q.clone())?;
        ds.add_passage(p.clone())?;
        ds.add_pair(pair)?;
    }
    Ok(ds)
}
