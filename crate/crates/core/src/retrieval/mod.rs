//! Exact nearest-neighbour retrieval over unit-normalized embeddings.
//!
//! Queries scan every entry; hits are ordered by cosine similarity
//! descending, ties broken by ascending pair id.
//!
//! Index file layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  "LRMTIDX\0"
//! version u32      1
//! dim     u32
//! count   u64
//! count × { id_len u32, id bytes (UTF-8), dim × f32 }
//! ```
//!
//! The embedding-source descriptor lives next to it in `<file>.meta.json`.

mod embed;

use std::collections::HashSet;
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use embed::{
    embed_batch, fallback_embed, BatchOptions, EmbedError, Embedder, FallbackEmbedder, HttpEmbedder,
    DEFAULT_EMBEDDING_MODEL,
};

/// Number of neighbours retrieved per query unless configured otherwise.
pub const DEFAULT_K: usize = 10;

const MAGIC: &[u8; 8] = b"LRMTIDX\0";
const FORMAT_VERSION: u32 = 1;
const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("dimension mismatch for {id:?}: expected {expected}, got {got}")]
    Dimension { id: String, expected: usize, got: usize },
    #[error("duplicate pair id {0:?}")]
    DuplicateId(String),
    #[error("zero vector for {0:?}")]
    ZeroVector(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RetrievalError + '_ {
    move |source| RetrievalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

/// Cosine similarity of two equal-length, non-zero vectors.
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64, RetrievalError> {
    if a.len() != b.len() {
        return Err(RetrievalError::Dimension {
            id: "<operand>".into(),
            expected: a.len(),
            got: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(RetrievalError::ZeroVector("<operand>".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Scales `v` to unit L2 norm; `None` for the zero vector.
pub fn normalize(v: &[f32]) -> Option<Vec<f32>> {
    let n = norm(v);
    (n > 0.0 && n.is_finite()).then(|| v.iter().map(|&x| (x as f64 / n) as f32).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub pair_id: String,
    pub values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn new(pair_id: impl Into<String>, values: Vec<f32>) -> Self {
        EmbeddingVector {
            pair_id: pair_id.into(),
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexMeta {
    pub model: String,
    /// Seconds since the Unix epoch.
    pub built_at: u64,
}

impl IndexMeta {
    /// Stamped with `SOURCE_DATE_EPOCH` when set, else the current time.
    pub fn now(model: impl Into<String>) -> Self {
        let built_at = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or_else(|| {
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            });
        IndexMeta {
            model: model.into(),
            built_at,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit<'a> {
    pub pair_id: &'a str,
    pub score: f64,
}

/// Immutable flat store of unit vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingIndex {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    meta: IndexMeta,
}

pub fn build_index(vectors: Vec<EmbeddingVector>, meta: IndexMeta) -> Result<EmbeddingIndex, RetrievalError> {
    let dim = vectors.first().map_or(0, EmbeddingVector::dim);
    let mut seen = HashSet::with_capacity(vectors.len());
    let mut ids = Vec::with_capacity(vectors.len());
    let mut data = Vec::with_capacity(vectors.len() * dim);
    for v in vectors {
        if v.dim() != dim || dim == 0 {
            return Err(RetrievalError::Dimension {
                id: v.pair_id,
                expected: dim,
                got: v.values.len(),
            });
        }
        if !seen.insert(v.pair_id.clone()) {
            return Err(RetrievalError::DuplicateId(v.pair_id));
        }
        let unit = normalize(&v.values).ok_or_else(|| RetrievalError::ZeroVector(v.pair_id.clone()))?;
        data.extend(unit);
        ids.push(v.pair_id);
    }
    Ok(EmbeddingIndex { dim, ids, data, meta })
}

impl EmbeddingIndex {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn meta(&self) -> &IndexMeta {
        &self.meta
    }

    /// Stored (normalized) entries in insertion order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.data.chunks_exact(self.dim.max(1)))
    }

    /// Exact top-`k` by cosine similarity.
    pub fn query_knn(&self, query: &[f32], k: usize) -> Result<Vec<RetrievalHit<'_>>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        if self.is_empty() {
            return Ok(Vec::new());
        }
        if query.len() != self.dim {
            return Err(RetrievalError::Dimension {
                id: "<query>".into(),
                expected: self.dim,
                got: query.len(),
            });
        }
        let qn = norm(query);
        if qn == 0.0 {
            return Err(RetrievalError::ZeroVector("<query>".into()));
        }
        let q: Vec<f64> = query.iter().map(|&x| x as f64 / qn).collect();
        let mut hits: Vec<RetrievalHit<'_>> = self
            .entries()
            .map(|(id, v)| RetrievalHit {
                pair_id: id,
                score: q
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b as f64)
                    .sum::<f64>()
                    .clamp(-1.0, 1.0),
            })
            .collect();
        let order = |a: &RetrievalHit<'_>, b: &RetrievalHit<'_>| {
            b.score.total_cmp(&a.score).then_with(|| a.pair_id.cmp(b.pair_id))
        };
        if k < hits.len() {
            hits.select_nth_unstable_by(k - 1, order);
            hits.truncate(k);
        }
        hits.sort_unstable_by(order);
        Ok(hits)
    }

    pub fn meta_path(path: &Path) -> PathBuf {
        let mut name = path.as_os_str().to_os_string();
        name.push(".meta.json");
        PathBuf::from(name)
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        let mut out = BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
        let mut write = |bytes: &[u8]| out.write_all(bytes);
        (|| -> std::io::Result<()> {
            write(MAGIC)?;
            write(&FORMAT_VERSION.to_le_bytes())?;
            write(&(self.dim as u32).to_le_bytes())?;
            write(&(self.ids.len() as u64).to_le_bytes())?;
            for (id, v) in self.entries() {
                write(&(id.len() as u32).to_le_bytes())?;
                write(id.as_bytes())?;
                for x in v {
                    write(&x.to_le_bytes())?;
                }
            }
            Ok(())
        })()
        .map_err(io_err(path))?;
        out.flush().map_err(io_err(path))?;
        let meta_path = Self::meta_path(path);
        let meta = serde_json::to_string_pretty(&self.meta).expect("meta serializes");
        fs::write(&meta_path, meta).map_err(io_err(&meta_path))
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let bad = |message: String| RetrievalError::Format {
            path: path.to_path_buf(),
            message,
        };
        let mut input = BufReader::new(fs::File::open(path).map_err(io_err(path))?);
        let mut read = |n: usize| -> Result<Vec<u8>, RetrievalError> {
            let mut buf = vec![0u8; n];
            input
                .read_exact(&mut buf)
                .map_err(|e| bad(format!("truncated file: {e}")))?;
            Ok(buf)
        };
        if read(8)?.as_slice() != MAGIC {
            return Err(bad("bad magic bytes".into()));
        }
        let u32_at = |b: Vec<u8>| u32::from_le_bytes(b.try_into().expect("4 bytes"));
        let version = u32_at(read(4)?);
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let dim = u32_at(read(4)?) as usize;
        let count = u64::from_le_bytes(read(8)?.try_into().expect("8 bytes")) as usize;
        let mut vectors = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let id_len = u32_at(read(4)?) as usize;
            let id = String::from_utf8(read(id_len)?).map_err(|e| bad(format!("id is not UTF-8: {e}")))?;
            let values = read(dim * 4)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            vectors.push(EmbeddingVector::new(id, values));
        }
        let meta_path = Self::meta_path(path);
        let meta: IndexMeta = match fs::read_to_string(&meta_path) {
            Ok(s) => serde_json::from_str(&s).map_err(|e| bad(format!("meta: {e}")))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => IndexMeta {
                model: "unknown".into(),
                built_at: 0,
            },
            Err(e) => return Err(io_err(&meta_path)(e)),
        };
        // Stored vectors are already unit length; keep them bit-exact.
        let mut ids = Vec::with_capacity(vectors.len());
        let mut data = Vec::with_capacity(vectors.len() * dim);
        let mut seen = HashSet::new();
        for v in vectors {
            if !seen.insert(v.pair_id.clone()) {
                return Err(RetrievalError::DuplicateId(v.pair_id));
            }
            if (norm(&v.values) - 1.0).abs() > NORM_TOLERANCE * 10.0 {
                return Err(bad(format!("entry {:?} is not unit length", v.pair_id)));
            }
            data.extend(v.values);
            ids.push(v.pair_id);
        }
        Ok(EmbeddingIndex { dim, ids, data, meta })
    }
}
