//! Pipeline configuration, readable from one TOML file:
//!
//! ```toml
//! [match]
//! bm25_top = 100
//! rerank_top = 5
//! verify_threshold = 0.5
//!
//! [mine]
//! bm25_top = 10
//! negative_threshold = 0.5
//!
//! [denoise]
//! min_q_tokens = 3
//! max_q_tokens = 64
//! min_p_tokens = 10
//! max_p_tokens = 512
//! max_fanout = 10
//! max_overlap = 0.9
//! pos_floor = 0.10
//! neg_ceiling = 0.90
//! question_blacklist_file = "questions.txt"   # relative to the config file
//! word_blacklist_file = "words.txt"
//! ```
//!
//! Every key is optional; missing keys take the defaults shown.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::tokenize;

fn unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be in [0, 1], got {v}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub bm25_top: usize,
    pub rerank_top: usize,
    pub verify_threshold: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            bm25_top: 100,
            rerank_top: 5,
            verify_threshold: 0.5,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rerank_top == 0 || self.rerank_top > self.bm25_top {
            return Err(Error::Config(format!(
                "need 1 <= rerank_top <= bm25_top, got {} and {}",
                self.rerank_top, self.bm25_top
            )));
        }
        unit("verify_threshold", self.verify_threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MineConfig {
    pub bm25_top: usize,
    pub negative_threshold: f64,
}

impl Default for MineConfig {
    fn default() -> Self {
        MineConfig {
            bm25_top: 10,
            negative_threshold: 0.5,
        }
    }
}

impl MineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bm25_top == 0 {
            return Err(Error::Config("bm25_top must be >= 1".into()));
        }
        unit("negative_threshold", self.negative_threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiseConfig {
    pub min_q_tokens: usize,
    pub max_q_tokens: usize,
    pub min_p_tokens: usize,
    pub max_p_tokens: usize,
    /// Maximum number of questions a passage may be positive for.
    pub max_fanout: usize,
    /// Maximum Jaccard similarity of question and passage lemma sets.
    pub max_overlap: f64,
    pub pos_floor: f64,
    pub neg_ceiling: f64,
    pub question_blacklist_file: Option<PathBuf>,
    pub word_blacklist_file: Option<PathBuf>,
    /// Normalized blacklisted questions (tokens joined by single spaces).
    #[serde(skip)]
    pub question_blacklist: BTreeSet<String>,
    /// Lower-cased blacklisted words.
    #[serde(skip)]
    pub word_blacklist: BTreeSet<String>,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            min_q_tokens: 3,
            max_q_tokens: 64,
            min_p_tokens: 10,
            max_p_tokens: 512,
            max_fanout: 10,
            max_overlap: 0.9,
            pos_floor: 0.10,
            neg_ceiling: 0.90,
            question_blacklist_file: None,
            word_blacklist_file: None,
            question_blacklist: BTreeSet::new(),
            word_blacklist: BTreeSet::new(),
        }
    }
}

/// Canonical form used to compare questions with the question blacklist.
pub fn normalize_question(text: &str) -> String {
    tokenize(text).join(" ")
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

impl DenoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_q_tokens > self.max_q_tokens || self.min_p_tokens > self.max_p_tokens {
            return Err(Error::Config("length minimum exceeds maximum".into()));
        }
        unit("max_overlap", self.max_overlap)?;
        unit("pos_floor", self.pos_floor)?;
        unit("neg_ceiling", self.neg_ceiling)?;
        if self.pos_floor >= self.neg_ceiling {
            return Err(Error::Config(format!(
                "pos_floor ({}) must be below neg_ceiling ({})",
                self.pos_floor, self.neg_ceiling
            )));
        }
        Ok(())
    }

    pub fn add_blacklisted_questions<I: IntoIterator<Item = S>, S: AsRef<str>>(&mut self, items: I) {
        self.question_blacklist.extend(
            items
                .into_iter()
                .map(|q| normalize_question(q.as_ref()))
                .filter(|q| !q.is_empty()),
        );
    }

    pub fn add_blacklisted_words<I: IntoIterator<Item = S>, S: AsRef<str>>(&mut self, items: I) {
        self.word_blacklist.extend(
            items
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty()),
        );
    }

    /// Reads the newline-delimited blacklist files named in the config.
    pub fn load_blacklists(&mut self, base: &Path) -> Result<()> {
        if let Some(file) = &self.question_blacklist_file {
            let lines = read_lines(&base.join(file))?;
            self.add_blacklisted_questions(lines);
        }
        if let Some(file) = &self.word_blacklist_file {
            let lines = read_lines(&base.join(file))?;
            self.add_blacklisted_words(lines);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(rename = "match")]
    pub matching: MatchConfig,
    pub mine: MineConfig,
    pub denoise: DenoiseConfig,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses the file and loads blacklists relative to its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.denoise.load_blacklists(base)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.matching.validate()?;
        self.mine.validate()?;
        self.denoise.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_pipeline_constants() {
        let cfg = PipelineConfig::default();
        assert_eq!((cfg.matching.bm25_top, cfg.matching.rerank_top), (100, 5));
        assert_eq!(cfg.mine.bm25_top, 10);
        assert_eq!((cfg.denoise.pos_floor, cfg.denoise.neg_ceiling), (0.10, 0.90));
        assert_eq!((cfg.denoise.min_q_tokens, cfg.denoise.max_q_tokens), (3, 64));
        assert_eq!((cfg.denoise.min_p_tokens, cfg.denoise.max_p_tokens), (10, 512));
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_file_and_blacklists() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("words.txt"), "Głupie\n\nbrzydkie\n").unwrap();
        fs::write(dir.path().join("qs.txt"), "Jak się masz?\n").unwrap();
        let path = dir.path().join("cfg.toml");
        fs::write(
            &path,
            "[mine]\nnegative_threshold = 0.3\n[denoise]\nmax_fanout = 2\nword_blacklist_file = \"words.txt\"\nquestion_blacklist_file = \"qs.txt\"\n",
        )
        .unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.mine.negative_threshold, 0.3);
        assert_eq!(cfg.mine.bm25_top, 10);
        assert_eq!(cfg.denoise.max_fanout, 2);
        assert!(cfg.denoise.word_blacklist.contains("głupie"));
        assert!(cfg.denoise.question_blacklist.contains("jak się masz"));
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(PipelineConfig::parse("[mine]\nbogus = 1\n").is_err());
        let d = DenoiseConfig {
            pos_floor: 0.95,
            ..DenoiseConfig::default()
        };
        assert!(d.validate().is_err());
        let m = MatchConfig {
            bm25_top: 3,
            rerank_top: 5,
            verify_threshold: 0.5,
        };
        assert!(m.validate().is_err());
        assert!(MineConfig { bm25_top: 0, negative_threshold: 0.5 }.validate().is_err());
    }
}
