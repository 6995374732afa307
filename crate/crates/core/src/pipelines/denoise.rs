use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{normalize_question, DenoiseConfig};
use crate::error::Result;
use crate::model::{Dataset, LabeledPair, Relevance};
use crate::scoring::{jaccard, ScoreRequest, Scorer};
use crate::text::{tokenize, Analyzer};

/// Denoising filters, in the order they are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Filter {
    QuestionLength,
    PassageLength,
    Fanout,
    Overlap,
    QuestionBlacklist,
    WordBlacklist,
    PositiveScoreFloor,
    NegativeScoreCeiling,
}

impl Filter {
    pub const ALL: [Filter; 8] = [
        Filter::QuestionLength,
        Filter::PassageLength,
        Filter::Fanout,
        Filter::Overlap,
        Filter::QuestionBlacklist,
        Filter::WordBlacklist,
        Filter::PositiveScoreFloor,
        Filter::NegativeScoreCeiling,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub question_id: String,
    pub passage_id: String,
    pub relevance: Relevance,
    pub filter: Filter,
    /// Scorer output, present only for the score filters.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseReport {
    pub input: usize,
    pub kept: usize,
    pub rejected: usize,
    pub positives_in: usize,
    pub positives_rejected: usize,
    /// Share of positive pairs discarded.
    pub positive_rejected_fraction: f64,
    pub rejected_fraction: f64,
    pub per_filter: BTreeMap<Filter, usize>,
    pub rejections: Vec<Rejection>,
}

/// Splits the pairs of `ds` into kept pairs and rejections.
///
/// Filters run in [`Filter::ALL`] order and each rejected pair records the
/// first filter that fired. Kept pairs are returned unchanged and in input
/// order. Fan-out is measured on the positives that pass the length filters;
/// the scorer only sees pairs that pass every earlier filter.
pub fn denoise(
    ds: &Dataset,
    scorer: &Scorer,
    analyzer: &Analyzer,
    cfg: &DenoiseConfig,
) -> Result<(Vec<LabeledPair>, DenoiseReport)> {
    cfg.validate()?;
    let pairs = ds.pairs();
    let mut verdict: Vec<Option<Filter>> = vec![None; pairs.len()];

    let question_tokens: HashMap<&str, Vec<String>> = pairs
        .iter()
        .map(|p| p.question_id.as_str())
        .collect::<HashSet<_>>()
        .into_par_iter()
        .map(|q| Ok((q, tokenize(ds.question_text(q)?))))
        .collect::<Result<_>>()?;
    let passage_lengths: HashMap<&str, usize> = pairs
        .iter()
        .map(|p| p.passage_id.as_str())
        .collect::<HashSet<_>>()
        .into_par_iter()
        .map(|p| Ok((p, tokenize(ds.passage_text(p)?).len())))
        .collect::<Result<_>>()?;

    for (pair, v) in pairs.iter().zip(verdict.iter_mut()) {
        let q_len = question_tokens[pair.question_id.as_str()].len();
        let p_len = passage_lengths[pair.passage_id.as_str()];
        if !(cfg.min_q_tokens..=cfg.max_q_tokens).contains(&q_len) {
            *v = Some(Filter::QuestionLength);
        } else if !(cfg.min_p_tokens..=cfg.max_p_tokens).contains(&p_len) {
            *v = Some(Filter::PassageLength);
        }
    }

    let mut fanout: HashMap<&str, HashSet<&str>> = HashMap::new();
    for (pair, v) in pairs.iter().zip(&verdict) {
        if v.is_none() && pair.relevance.is_positive() {
            fanout
                .entry(&pair.passage_id)
                .or_default()
                .insert(&pair.question_id);
        }
    }
    for (pair, v) in pairs.iter().zip(verdict.iter_mut()) {
        if v.is_none()
            && pair.relevance.is_positive()
            && fanout[pair.passage_id.as_str()].len() > cfg.max_fanout
        {
            *v = Some(Filter::Fanout);
        }
    }

    let overlaps: Vec<Option<f64>> = pairs
        .par_iter()
        .zip(&verdict)
        .map(|(pair, v)| {
            if v.is_some() {
                return Ok(None);
            }
            let q = analyzer.lemmas(ds.question_text(&pair.question_id)?);
            let p = analyzer.lemmas(ds.passage_text(&pair.passage_id)?);
            Ok(Some(jaccard(&q, &p)))
        })
        .collect::<Result<_>>()?;
    for (v, overlap) in verdict.iter_mut().zip(overlaps) {
        if matches!(overlap, Some(o) if o > cfg.max_overlap) {
            *v = Some(Filter::Overlap);
        }
    }

    for (pair, v) in pairs.iter().zip(verdict.iter_mut()) {
        if v.is_some() {
            continue;
        }
        let tokens = &question_tokens[pair.question_id.as_str()];
        if cfg.question_blacklist.contains(&tokens.join(" ")) {
            *v = Some(Filter::QuestionBlacklist);
        } else if tokens.iter().any(|t| cfg.word_blacklist.contains(t)) {
            *v = Some(Filter::WordBlacklist);
        }
    }

    let pending: Vec<usize> = (0..pairs.len()).filter(|&i| verdict[i].is_none()).collect();
    let requests = pending
        .iter()
        .map(|&i| {
            let pair = &pairs[i];
            Ok(ScoreRequest {
                question_id: &pair.question_id,
                question: ds.question_text(&pair.question_id)?,
                passage_id: &pair.passage_id,
                passage: ds.passage_text(&pair.passage_id)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let scores = scorer.score_pairs(&requests)?;
    let mut score_of: Vec<Option<f64>> = vec![None; pairs.len()];
    for (&i, &s) in pending.iter().zip(&scores) {
        score_of[i] = Some(s);
        verdict[i] = match pairs[i].relevance {
            Relevance::Positive if s < cfg.pos_floor => Some(Filter::PositiveScoreFloor),
            Relevance::Negative if s > cfg.neg_ceiling => Some(Filter::NegativeScoreCeiling),
            _ => None,
        };
    }

    let mut kept = Vec::new();
    let mut rejections = Vec::new();
    let mut per_filter: BTreeMap<Filter, usize> = Filter::ALL.iter().map(|&f| (f, 0)).collect();
    for ((pair, v), score) in pairs.iter().zip(verdict).zip(score_of) {
        match v {
            None => kept.push(pair.clone()),
            Some(filter) => {
                *per_filter.get_mut(&filter).unwrap() += 1;
                rejections.push(Rejection {
                    question_id: pair.question_id.clone(),
                    passage_id: pair.passage_id.clone(),
                    relevance: pair.relevance,
                    filter,
                    score: score.filter(|_| {
                        matches!(filter, Filter::PositiveScoreFloor | Filter::NegativeScoreCeiling)
                    }),
                });
            }
        }
    }

    let positives_in = pairs.iter().filter(|p| p.relevance.is_positive()).count();
    let positives_rejected = rejections
        .iter()
        .filter(|r| r.relevance.is_positive())
        .count();
    let fraction = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let report = DenoiseReport {
        input: pairs.len(),
        kept: kept.len(),
        rejected: rejections.len(),
        positives_in,
        positives_rejected,
        positive_rejected_fraction: fraction(positives_rejected, positives_in),
        rejected_fraction: fraction(rejections.len(), pairs.len()),
        per_filter,
        rejections,
    };
    Ok((kept, report))
}

/// Whether a question would be caught by the question blacklist.
pub fn is_blacklisted_question(cfg: &DenoiseConfig, question: &str) -> bool {
    cfg.question_blacklist.contains(&normalize_question(question))
}
