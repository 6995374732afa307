//! Embedding matrices and exact inner-product top-k search.
//!
//! Vector file layout (little-endian):
//!
//! ```text
//! magic    b"SVEC"
//! u32      format version (1)
//! u32      dim
//! u64      count
//! count × dim × f32   row-major payload
//! ```
//!
//! Row ids live in a parallel UTF-8 file, one id per line.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Hit, RunList};

pub const MAGIC: &[u8; 4] = b"SVEC";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

const QUERY_BLOCK: usize = 8;
const ROW_BLOCK: usize = 512;

/// Tolerance on the unit-norm invariant of normalized matrices.
pub const NORM_TOLERANCE: f32 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f32>,
    normalized: bool,
}

impl EmbeddingMatrix {
    /// Validates shape, id uniqueness and finiteness; L2-normalizes rows when asked.
    pub fn new(ids: Vec<String>, dim: usize, mut data: Vec<f32>, normalize: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::invalid(format!(
                "{} ids but {} values for dimension {dim}",
                ids.len(),
                data.len()
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if id.is_empty() {
                return Err(Error::invalid("empty embedding id"));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid(format!("duplicate embedding id {id}")));
            }
        }
        for (row, values) in data.chunks_exact(dim).enumerate() {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "row {row} ({}) contains NaN or infinite values",
                    ids[row]
                )));
            }
        }
        if normalize {
            for (row, values) in data.chunks_exact_mut(dim).enumerate() {
                let norm = dot(values, values).sqrt();
                if norm == 0.0 {
                    return Err(Error::invalid(format!(
                        "row {row} ({}) is zero and cannot be normalized",
                        ids[row]
                    )));
                }
                values.iter_mut().for_each(|v| *v /= norm);
            }
        }
        Ok(EmbeddingMatrix {
            ids,
            dim,
            data,
            normalized: normalize,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    /// Row-wise concatenation; ids must stay unique.
    pub fn concat(&self, other: &EmbeddingMatrix) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        let ids = self.ids.iter().chain(&other.ids).cloned().collect();
        let data = self.data.iter().chain(&other.data).copied().collect();
        let mut out = Self::new(ids, self.dim, data, false)?;
        out.normalized = self.normalized && other.normalized;
        Ok(out)
    }

    /// Id file path conventionally paired with a vector file: `x.vec` → `x.ids`.
    pub fn default_ids_path(vectors: &Path) -> PathBuf {
        vectors.with_extension("ids")
    }

    pub fn load(vectors: impl AsRef<Path>, ids: impl AsRef<Path>, normalize: bool) -> Result<Self> {
        let (vpath, ipath) = (vectors.as_ref(), ids.as_ref());
        let bytes = fs::read(vpath).map_err(|e| Error::io(vpath, e))?;
        let bad = |m: String| Error::invalid(format!("{}: {m}", vpath.display()));
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(bad("not a vector file (bad magic or short header)".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let expected = count
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| bad("header size overflows".into()))?;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != expected {
            return Err(bad(format!(
                "header declares {count}×{dim} floats ({expected} bytes), payload has {} bytes",
                payload.len()
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();

        let id_text = fs::read_to_string(ipath).map_err(|e| Error::io(ipath, e))?;
        let id_list: Vec<String> = id_text.lines().map(str::to_string).collect();
        if id_list.len() != count {
            return Err(Error::invalid(format!(
                "{}: {} ids for {count} vectors",
                ipath.display(),
                id_list.len()
            )));
        }
        Self::new(id_list, dim, data, normalize)
    }

    pub fn write(&self, vectors: impl AsRef<Path>, ids: impl AsRef<Path>) -> Result<()> {
        let (vpath, ipath) = (vectors.as_ref(), ids.as_ref());
        let file = File::create(vpath).map_err(|e| Error::io(vpath, e))?;
        let mut w = BufWriter::new(file);
        let mut header = Vec::with_capacity(HEADER_LEN);
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        header.extend_from_slice(&(self.dim as u32).to_le_bytes());
        header.extend_from_slice(&(self.len() as u64).to_le_bytes());
        w.write_all(&header).map_err(|e| Error::io(vpath, e))?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(vpath, e))?;
        }
        w.flush().map_err(|e| Error::io(vpath, e))?;

        let mut text = String::new();
        for id in &self.ids {
            text.push_str(id);
            text.push('\n');
        }
        fs::write(ipath, text).map_err(|e| Error::io(ipath, e))
    }

    /// Exact top-`k` rows by inner product with `query`.
    pub fn search(&self, question_id: &str, query: &[f32], k: usize) -> Result<RunList> {
        self.check_query(query)?;
        let mut heaps = vec![BinaryHeap::with_capacity(k + 1)];
        self.scan_block(&[query], k, &mut heaps);
        Ok(finish(question_id, heaps.pop().unwrap()))
    }

    /// Searches every row of `queries`, in parallel over blocks of queries.
    /// Output order follows `queries`.
    pub fn search_batch(&self, queries: &EmbeddingMatrix, k: usize) -> Result<Vec<RunList>> {
        if queries.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: queries.dim,
            });
        }
        let qrows: Vec<&[f32]> = queries.rows().collect();
        let runs = qrows
            .par_chunks(QUERY_BLOCK)
            .enumerate()
            .flat_map_iter(|(block, chunk)| {
                let mut heaps = vec![BinaryHeap::with_capacity(k + 1); chunk.len()];
                self.scan_block(chunk, k, &mut heaps);
                let base = block * QUERY_BLOCK;
                heaps
                    .into_iter()
                    .enumerate()
                    .map(move |(i, heap)| finish(&queries.ids[base + i], heap))
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(runs)
    }

    fn check_query(&self, query: &[f32]) -> Result<()> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        if query.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("query vector contains NaN or infinite values"));
        }
        Ok(())
    }

    /// Row blocks outer, queries inner, so each row block stays cache-resident
    /// while every query in the block visits it.
    fn scan_block<'a>(&'a self, queries: &[&[f32]], k: usize, heaps: &mut [BinaryHeap<Candidate<'a>>]) {
        if k == 0 {
            return;
        }
        for start in (0..self.len()).step_by(ROW_BLOCK) {
            let end = (start + ROW_BLOCK).min(self.len());
            for (query, heap) in queries.iter().zip(heaps.iter_mut()) {
                for row in start..end {
                    let candidate = Candidate {
                        score: dot(query, self.row(row)),
                        id: &self.ids[row],
                    };
                    if heap.len() < k {
                        heap.push(candidate);
                    } else if candidate < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(candidate);
                    }
                }
            }
        }
    }
}

fn finish(question_id: &str, heap: BinaryHeap<Candidate<'_>>) -> RunList {
    let hits = heap
        .into_sorted_vec()
        .into_iter()
        .map(|c| Hit::new(c.id, f64::from(c.score)))
        .collect();
    RunList::new(question_id, hits).expect("heap output is in rank order")
}

/// Inner product with four independent accumulators.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 4];
    let chunks = a.len() / 4 * 4;
    for (x, y) in a[..chunks].chunks_exact(4).zip(b[..chunks].chunks_exact(4)) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in a[chunks..].iter().zip(&b[chunks..]) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Greatest element = worst ranked (lowest score, then largest id).
#[derive(Clone)]
struct Candidate<'a> {
    score: f32,
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
