//! Dense leg: a deterministic hash-projection embedder and an exact-scan
//! cosine index.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexical::InvertedIndex;

pub const VECTORS_FILE: &str = "vectors.bin";
pub const VECTOR_IDS_FILE: &str = "vectors.ids";
pub const VECTOR_MAGIC: &[u8; 8] = b"QRAGVEC1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f64>,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyTokens);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("<embedding>".into()));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    #[default]
    HashProjection,
    ExternalFile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderSpec {
    pub kind: EmbedderKind,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        Self {
            kind: EmbedderKind::HashProjection,
            dim: 256,
            path: None,
        }
    }
}

impl EmbedderSpec {
    pub fn hash_projection(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            EmbedderKind::HashProjection => {
                if self.dim < 2 || !self.dim.is_power_of_two() {
                    return Err(Error::Config("embedder.dim must be a power of two >= 2".into()));
                }
            }
            EmbedderKind::ExternalFile => {
                if self.path.is_none() {
                    return Err(Error::Config("embedder.path is required for external_file".into()));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

struct SplitMix64(u64);

impl SplitMix64 {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [-1, 1) from the top 53 bits.
    fn next_signed(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64) * (1.0 / (1u64 << 53) as f64) * 2.0 - 1.0
    }
}

/// Unit vector seeded by the FNV-1a hash of the token.
pub fn token_vector(token: &str, dim: usize) -> Embedding {
    let mut rng = SplitMix64(fnv1a64(token.as_bytes()));
    let mut values: Vec<f64> = (0..dim).map(|_| rng.next_signed()).collect();
    let norm = l2_norm(&values);
    values.iter_mut().for_each(|v| *v /= norm);
    Embedding { values }
}

/// Per-term weights for the bag-of-tokens embedder.
pub trait TermWeights {
    fn weight(&self, term: &str) -> f64;
}

/// Uniform weight of 1.
pub struct Unweighted;

impl TermWeights for Unweighted {
    fn weight(&self, _term: &str) -> f64 {
        1.0
    }
}

/// Explicit weights; missing terms weigh 1.
impl TermWeights for HashMap<String, f64> {
    fn weight(&self, term: &str) -> f64 {
        self.get(term).copied().unwrap_or(1.0)
    }
}

/// IDF weights straight from the lexical index.
impl TermWeights for InvertedIndex {
    fn weight(&self, term: &str) -> f64 {
        self.idf(term)
    }
}

/// Hash-projection embedder with a token-vector cache.
#[derive(Debug, Default)]
pub struct HashEmbedder {
    dim: usize,
    cache: HashMap<String, Vec<f64>>,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            cache: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Normalized weighted sum of token vectors. Repeated tokens are summed
    /// once with their multiplicity, in first-occurrence order.
    pub fn embed<S: AsRef<str>>(&mut self, tokens: &[S], weights: &dyn TermWeights) -> Result<Embedding> {
        if tokens.is_empty() {
            return Err(Error::EmptyTokens);
        }
        let mut order: Vec<&str> = Vec::new();
        let mut counts: HashMap<&str, f64> = HashMap::new();
        for t in tokens {
            let t = t.as_ref();
            let c = counts.entry(t).or_insert_with(|| {
                order.push(t);
                0.0
            });
            *c += 1.0;
        }
        let dim = self.dim;
        let mut sum = vec![0.0; dim];
        for t in order {
            let w = counts[t] * weights.weight(t);
            if w == 0.0 {
                continue;
            }
            let v = self
                .cache
                .entry(t.to_string())
                .or_insert_with(|| token_vector(t, dim).values);
            for (s, x) in sum.iter_mut().zip(v.iter()) {
                *s += w * x;
            }
        }
        normalized(sum)
    }
}

fn normalized(mut values: Vec<f64>) -> Result<Embedding> {
    let norm = l2_norm(&values);
    if !(norm > 1e-12) || !norm.is_finite() {
        return Err(Error::DegenerateEmbedding);
    }
    values.iter_mut().for_each(|v| *v /= norm);
    Ok(Embedding { values })
}

/// One-shot embedding for a token list under `spec`.
pub fn embed<S: AsRef<str>>(tokens: &[S], spec: &EmbedderSpec, weights: Option<&dyn TermWeights>) -> Result<Embedding> {
    match spec.kind {
        EmbedderKind::HashProjection => HashEmbedder::new(spec.dim).embed(tokens, weights.unwrap_or(&Unweighted)),
        EmbedderKind::ExternalFile => Err(Error::Config(
            "external_file embeddings are looked up by id; embed queries with hash_projection or supply a vector".into(),
        )),
    }
}

pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(&a.values, &b.values) / (na * nb)).clamp(-1.0, 1.0))
}

/// Flat exact-scan index. Rows are unit-normalized and stored as f32 so
/// the in-memory and on-disk representations agree bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dim: usize,
    ids: Vec<String>,
    matrix: Vec<f32>,
    row_norms: Vec<f64>,
    position: HashMap<String, usize>,
}

impl VectorIndex {
    pub fn new(dim: usize, ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::format("vector index", "ids and rows differ in length"));
        }
        let mut matrix = Vec::with_capacity(rows.len() * dim);
        for (id, row) in ids.iter().zip(&rows) {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(id.clone()));
            }
            let norm = l2_norm(row);
            if norm == 0.0 {
                return Err(Error::ZeroVector);
            }
            matrix.extend(row.iter().map(|v| (v / norm) as f32));
        }
        Self::from_f32(dim, ids, matrix)
    }

    fn from_f32(dim: usize, ids: Vec<String>, matrix: Vec<f32>) -> Result<Self> {
        if dim == 0 || matrix.len() != ids.len() * dim {
            return Err(Error::format("vector index", "matrix shape does not match ids"));
        }
        let row_norms: Vec<f64> = matrix
            .chunks_exact(dim)
            .map(|r| r.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt())
            .collect();
        let mut position = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if position.insert(id.clone(), i).is_some() {
                return Err(Error::format("vector index", format!("duplicate id {id}")));
            }
        }
        Ok(Self {
            dim,
            ids,
            matrix,
            row_norms,
            position,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    /// Stored row as an f64 embedding.
    pub fn embedding_of(&self, id: &str) -> Option<Embedding> {
        self.position.get(id).map(|&i| Embedding {
            values: self.row(i).iter().map(|&x| x as f64).collect(),
        })
    }

    fn row_cosine(&self, i: usize, q: &[f64], q_norm: f64) -> f64 {
        let d: f64 = self.row(i).iter().zip(q).map(|(&x, y)| x as f64 * y).sum();
        (d / (self.row_norms[i] * q_norm)).clamp(-1.0, 1.0)
    }

    /// Cosine between `q` and the stored row for `id`.
    pub fn cosine_to(&self, id: &str, q: &Embedding) -> Result<f64> {
        let &i = self.position.get(id).ok_or_else(|| Error::UnknownChunk(id.to_string()))?;
        self.check_query(q)?;
        Ok(self.row_cosine(i, &q.values, q.norm()))
    }

    fn check_query(&self, q: &Embedding) -> Result<f64> {
        if q.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: q.dim(),
            });
        }
        let n = q.norm();
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(n)
    }

    /// Full scan; top-`k` by cosine, ties by id ascending.
    pub fn search_exact(&self, q: &Embedding, k: usize) -> Result<Vec<(String, f64)>> {
        if self.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let q_norm = self.check_query(q)?;
        let mut scored: Vec<(usize, f64)> = (0..self.len()).map(|i| (i, self.row_cosine(i, &q.values, q_norm))).collect();
        let by_rank = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then_with(|| self.ids[a.0].cmp(&self.ids[b.0]));
        if k < scored.len() {
            scored.select_nth_unstable_by(k, by_rank);
            scored.truncate(k);
        }
        scored.sort_by(by_rank);
        Ok(scored.into_iter().map(|(i, s)| (self.ids[i].clone(), s)).collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.matrix.len() * 4);
        out.extend_from_slice(VECTOR_MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.ids.len() as u64).to_le_bytes());
        for v in &self.matrix {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], ids: Vec<String>) -> Result<Self> {
        let bad = |d: &str| Error::format(VECTORS_FILE, d);
        if bytes.len() < 20 || &bytes[..8] != VECTOR_MAGIC {
            return Err(bad("bad magic"));
        }
        let dim = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let n = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = &bytes[20..];
        if body.len() != n * dim * 4 {
            return Err(bad("payload length does not match header"));
        }
        if ids.len() != n {
            return Err(bad("row count does not match vectors.ids"));
        }
        let matrix: Vec<f32> = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        if let Some(pos) = matrix.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(ids[pos / dim.max(1)].clone()));
        }
        Self::from_f32(dim, ids, matrix)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let path = dir.join(VECTORS_FILE);
        std::fs::write(&path, self.to_bytes()).map_err(|e| Error::io(&path, e))?;
        let path = dir.join(VECTOR_IDS_FILE);
        let mut f = std::io::BufWriter::new(std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?);
        for id in &self.ids {
            writeln!(f, "{id}").map_err(|e| Error::io(&path, e))?;
        }
        f.flush().map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(VECTOR_IDS_FILE);
        let ids = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let ids: Vec<String> = ids.lines().map(str::to_string).collect();
        let path = dir.join(VECTORS_FILE);
        let mut bytes = Vec::new();
        std::fs::File::open(&path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(&path, e))?;
        Self::from_bytes(&bytes, ids)
    }
}

#[derive(Deserialize)]
struct ExternalRow {
    id: String,
    vector: Vec<f64>,
}

/// Loads `{"id", "vector"}` JSONL rows in the order of `ids`.
pub fn load_external_embeddings(path: impl AsRef<Path>, ids: &[String]) -> Result<VectorIndex> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows: HashMap<String, Vec<f64>> = HashMap::new();
    let mut dim = None;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ExternalRow = serde_json::from_str(&line).map_err(|e| Error::format("external embeddings", e))?;
        match dim {
            None => dim = Some(row.vector.len()),
            Some(d) if d != row.vector.len() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.vector.len(),
                })
            }
            _ => {}
        }
        if row.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(row.id));
        }
        rows.insert(row.id, row.vector);
    }
    let dim = dim.ok_or(Error::EmptyIndex)?;
    let ordered = ids
        .iter()
        .map(|id| rows.remove(id).ok_or_else(|| Error::MissingEmbedding(id.clone())))
        .collect::<Result<Vec<_>>>()?;
    VectorIndex::new(dim, ids.to_vec(), ordered)
}
