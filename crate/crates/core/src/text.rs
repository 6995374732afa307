//! Tokenization and dictionary lemmatization.
//!
//! Tokens are maximal runs of alphanumeric characters of the lower-cased input.
//! Lemmatization is a per-token dictionary lookup; unknown tokens map to
//! themselves.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Splits `text` into lower-cased alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Surface-form to lemma dictionary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    lemmas: HashMap<String, String>,
}

impl Lexicon {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, S, T>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let mut lemmas = HashMap::new();
        for (surface, lemma) in pairs {
            lemmas.insert(
                surface.as_ref().to_lowercase(),
                lemma.as_ref().to_lowercase(),
            );
        }
        Lexicon { lemmas }
    }

    /// Reads a `surface<TAB>lemma` file. Blank lines are skipped; a later entry
    /// for the same surface form overrides an earlier one.
    pub fn load_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&content, path)
    }

    pub(crate) fn parse_tsv(content: &str, path: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in content.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (surface, lemma) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected surface<TAB>lemma"))?;
            if surface.is_empty() || lemma.is_empty() {
                return Err(Error::parse(path, i + 1, "empty surface form or lemma"));
            }
            rows.push((surface, lemma));
        }
        Ok(Self::from_pairs(rows))
    }

    /// Serializes back to the TSV form, sorted by surface form.
    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<_> = self.lemmas.iter().collect();
        rows.sort();
        rows.into_iter()
            .map(|(s, l)| format!("{s}\t{l}\n"))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.lemmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lemmas.is_empty()
    }

    /// Total lookup: dictionary lemma, or the lower-cased surface form.
    pub fn lemma(&self, token: &str) -> String {
        let folded = token.to_lowercase();
        match self.lemmas.get(&folded) {
            Some(lemma) => lemma.clone(),
            None => folded,
        }
    }
}

/// Maps each token to its lemma. Output length always equals input length.
pub fn lemmatize<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> Vec<String> {
    tokens.iter().map(|t| lexicon.lemma(t.as_ref())).collect()
}

/// Which token stream an index or filter operates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AnalyzedMode {
    #[default]
    Surface,
    Lemma,
}

impl std::str::FromStr for AnalyzedMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "surface" => Ok(AnalyzedMode::Surface),
            "lemma" => Ok(AnalyzedMode::Lemma),
            other => Err(Error::Config(format!(
                "unknown analyzed mode {other:?} (expected surface or lemma)"
            ))),
        }
    }
}

impl std::fmt::Display for AnalyzedMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AnalyzedMode::Surface => "surface",
            AnalyzedMode::Lemma => "lemma",
        })
    }
}

/// Tokenizer plus optional lemmatizer, shared across threads.
#[derive(Debug, Clone, Default)]
pub struct Analyzer {
    mode: AnalyzedMode,
    lexicon: Arc<Lexicon>,
}

impl Analyzer {
    pub fn new(mode: AnalyzedMode, lexicon: Arc<Lexicon>) -> Self {
        Analyzer { mode, lexicon }
    }

    pub fn surface() -> Self {
        Self::default()
    }

    pub fn mode(&self) -> AnalyzedMode {
        self.mode
    }

    pub fn lexicon(&self) -> &Arc<Lexicon> {
        &self.lexicon
    }

    /// Token stream in this analyzer's mode.
    pub fn analyze(&self, text: &str) -> Vec<String> {
        match self.mode {
            AnalyzedMode::Surface => tokenize(text),
            AnalyzedMode::Lemma => self.lemmas(text),
        }
    }

    /// Lemma stream regardless of mode.
    pub fn lemmas(&self, text: &str) -> Vec<String> {
        lemmatize(&tokenize(text), &self.lexicon)
    }
}

/// Dense token-string to id interner.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    ids: HashMap<String, u32>,
    terms: Vec<String>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, term: &str) -> u32 {
        if let Some(&id) = self.ids.get(term) {
            return id;
        }
        let id = self.terms.len() as u32;
        self.ids.insert(term.to_string(), id);
        self.terms.push(term.to_string());
        id
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.ids.get(term).copied()
    }

    pub fn term(&self, id: u32) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}
