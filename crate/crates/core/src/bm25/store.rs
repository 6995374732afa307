//! On-disk index directory.
//!
//! ```text
//! <dir>/manifest.json   {"format": "sieve-bm25", "version": 1, "k1", "b",
//!                        "analyzed", "use_title", "n_docs", "avgdl",
//!                        "n_terms", "n_postings"}
//! <dir>/index.bin       little-endian:
//!                         magic  b"SVBM"
//!                         u32    version
//!                         u64    n_docs
//!                         n_docs × u32              document lengths
//!                         n_docs × (u32 len, bytes) passage ids (UTF-8)
//!                         u64    n_terms
//!                         n_terms × { u32 len, bytes term,
//!                                     u32 n, n × (u32 doc, u32 tf) }
//! <dir>/lexicon.tsv     lemma dictionary used at build time (may be empty)
//! ```
//!
//! Term order in `index.bin` is term-id order, so ids survive a round trip.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Bm25Params, InvertedIndex, Posting};
use crate::error::{Error, Result};
use crate::text::{AnalyzedMode, Analyzer, Lexicon, Vocabulary};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const INDEX_FILE: &str = "index.bin";
pub const LEXICON_FILE: &str = "lexicon.tsv";

const MAGIC: &[u8; 4] = b"SVBM";
const FORMAT_NAME: &str = "sieve-bm25";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    k1: f64,
    b: f64,
    analyzed: AnalyzedMode,
    use_title: bool,
    n_docs: usize,
    avgdl: f64,
    n_terms: usize,
    n_postings: usize,
}

impl InvertedIndex {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let manifest = Manifest {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            k1: self.params.k1,
            b: self.params.b,
            analyzed: self.analyzed(),
            use_title: self.use_title,
            n_docs: self.num_docs(),
            avgdl: self.avgdl,
            n_terms: self.vocab.len(),
            n_postings: self.postings.iter().map(Vec::len).sum(),
        };
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;

        let path = dir.join(LEXICON_FILE);
        fs::write(&path, self.lexicon().to_tsv()).map_err(|e| Error::io(&path, e))?;

        let path = dir.join(INDEX_FILE);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        self.write_binary(&mut w).map_err(|e| Error::io(&path, e))?;
        w.flush().map_err(|e| Error::io(&path, e))
    }

    fn write_binary(&self, w: &mut impl Write) -> std::io::Result<()> {
        fn bytes(w: &mut impl Write, b: &[u8]) -> std::io::Result<()> {
            w.write_all(&(b.len() as u32).to_le_bytes())?;
            w.write_all(b)
        }
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.num_docs() as u64).to_le_bytes())?;
        for len in &self.doc_lengths {
            w.write_all(&len.to_le_bytes())?;
        }
        for id in &self.doc_ids {
            bytes(w, id.as_bytes())?;
        }
        w.write_all(&(self.vocab.len() as u64).to_le_bytes())?;
        for (term, list) in self.vocab.terms().iter().zip(&self.postings) {
            bytes(w, term.as_bytes())?;
            w.write_all(&(list.len() as u32).to_le_bytes())?;
            for p in list {
                w.write_all(&p.doc.to_le_bytes())?;
                w.write_all(&p.tf.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::parse(&path, 1, e.to_string()))?;
        if manifest.format != FORMAT_NAME || manifest.version != FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "{}: unsupported index format {} v{}",
                path.display(),
                manifest.format,
                manifest.version
            )));
        }

        let lex_path = dir.join(LEXICON_FILE);
        let lexicon = if lex_path.exists() {
            Lexicon::load_tsv(&lex_path)?
        } else {
            Lexicon::empty()
        };

        let path = dir.join(INDEX_FILE);
        let data = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let corrupt = |what: &str| Error::invalid(format!("{}: {what}", path.display()));
        let mut r = Reader { data: &data, pos: 0 };
        if r.take(4).ok_or_else(|| corrupt("truncated header"))? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = r.u32().ok_or_else(|| corrupt("truncated header"))?;
        if version != FORMAT_VERSION {
            return Err(corrupt("unsupported version"));
        }
        let n_docs = r.u64().ok_or_else(|| corrupt("truncated header"))? as usize;
        if n_docs != manifest.n_docs {
            return Err(corrupt("document count disagrees with manifest"));
        }
        let mut doc_lengths = Vec::with_capacity(n_docs.min(data.len() / 4));
        for _ in 0..n_docs {
            doc_lengths.push(r.u32().ok_or_else(|| corrupt("truncated lengths"))?);
        }
        let mut doc_ids = Vec::with_capacity(n_docs.min(data.len() / 4));
        for _ in 0..n_docs {
            doc_ids.push(r.string().ok_or_else(|| corrupt("bad passage id"))?);
        }
        let n_terms = r.u64().ok_or_else(|| corrupt("truncated vocabulary"))? as usize;
        let mut vocab = Vocabulary::new();
        let mut postings = Vec::with_capacity(n_terms.min(data.len() / 8));
        for _ in 0..n_terms {
            let term = r.string().ok_or_else(|| corrupt("bad term"))?;
            if vocab.intern(&term) as usize != postings.len() {
                return Err(corrupt("duplicate term"));
            }
            let n = r.u32().ok_or_else(|| corrupt("truncated postings"))? as usize;
            let mut list = Vec::with_capacity(n.min(data.len() / 8));
            for _ in 0..n {
                let doc = r.u32().ok_or_else(|| corrupt("truncated postings"))?;
                let tf = r.u32().ok_or_else(|| corrupt("truncated postings"))?;
                list.push(Posting { doc, tf });
            }
            postings.push(list);
        }
        if r.pos != data.len() {
            return Err(corrupt("trailing bytes"));
        }

        let analyzer = Analyzer::new(manifest.analyzed, Arc::new(lexicon));
        let params = Bm25Params {
            k1: manifest.k1,
            b: manifest.b,
        };
        let index = InvertedIndex::from_parts(
            vocab,
            postings,
            doc_lengths,
            doc_ids,
            params,
            analyzer,
            manifest.use_title,
        )?;
        if (index.avgdl - manifest.avgdl).abs() > 1e-9 {
            return Err(corrupt("avgdl disagrees with manifest"));
        }
        Ok(index)
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.data.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn string(&mut self) -> Option<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).ok()
    }
}
