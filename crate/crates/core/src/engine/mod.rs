//! End-to-end orchestration: corpus preparation, index build, hybrid
//! retrieval with context assembly, and on-disk persistence.

mod context;
mod store;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{self, Chunk, CleaningConfig, CorpusStats, RawDocument};
use crate::error::{Error, Result, StageExt};
use crate::lexical::{self, Bm25Params, InvertedIndex};
use crate::quantum::{self, rank_candidates, CandidateScore, FusionConfig, FusionMode};
use crate::semantic::{self, EmbedderKind, EmbedderSpec, Embedding, HashEmbedder, VectorIndex};
use crate::tokenizer::{train_bpe, TokenizerModel};

pub use context::{context_tokens, format_context, PASSAGE_DELIMITER};
pub use store::{
    load_index, read_chunks, save_index, write_chunks, IndexManifest, CHUNKS_FILE, CONFIG_FILE, INDEX_FORMAT_VERSION,
    MANIFEST_FILE, STATS_FILE, TOKENIZER_FILE,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub cleaning: CleaningConfig,
    pub bm25: Bm25Params,
    pub embedder: EmbedderSpec,
    pub fusion: FusionConfig,
    pub vocab_size: usize,
    pub context_budget_tokens: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            cleaning: CleaningConfig::default(),
            bm25: Bm25Params::default(),
            embedder: EmbedderSpec::default(),
            fusion: FusionConfig::default(),
            vocab_size: 32_000,
            context_budget_tokens: 1024,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.cleaning.validate()?;
        self.bm25.validate()?;
        self.embedder.validate()?;
        self.fusion.validate()?;
        if self.context_budget_tokens < self.cleaning.chunk_size_tokens {
            return Err(Error::Config(format!(
                "context_budget_tokens ({}) must be >= chunk_size_tokens ({})",
                self.context_budget_tokens, self.cleaning.chunk_size_tokens
            )));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Tokenizer and chunks produced from a raw corpus, before any index exists.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub tokenizer: TokenizerModel,
    pub chunks: Vec<Chunk>,
    pub stats: CorpusStats,
    pub config: EngineConfig,
}

impl Prepared {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.tokenizer.save(dir.join(TOKENIZER_FILE))?;
        write_chunks(dir.join(CHUNKS_FILE), &self.chunks)?;
        store::write_json(dir.join(STATS_FILE), &self.stats)?;
        store::write_json(dir.join(CONFIG_FILE), &self.config)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Ok(Self {
            tokenizer: TokenizerModel::load(dir.join(TOKENIZER_FILE))?,
            chunks: read_chunks(dir.join(CHUNKS_FILE))?,
            stats: store::read_json(dir.join(STATS_FILE))?,
            config: store::read_json(dir.join(CONFIG_FILE))?,
        })
    }

    fn is_prepared_dir(dir: &Path) -> bool {
        dir.join(TOKENIZER_FILE).is_file() && dir.join(CHUNKS_FILE).is_file()
    }
}

fn corpus_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::MissingFile(path.join("*.jsonl")));
    }
    Ok(files)
}

/// Ingest, clean, deduplicate, filter, train the tokenizer and chunk.
/// `corpus_path` is a JSONL file or a directory of them.
pub fn prepare(corpus_path: impl AsRef<Path>, cfg: &EngineConfig) -> Result<Prepared> {
    cfg.validate().stage("config")?;
    let mut stats = CorpusStats::default();
    let mut docs: Vec<RawDocument> = Vec::new();
    for file in corpus_files(corpus_path.as_ref()).stage("ingest")? {
        let ingested = corpus::ingest_jsonl(&file).stage("ingest")?;
        stats.skipped_lines += ingested.skipped();
        docs.extend(ingested.documents);
    }
    stats.ingested = docs.len();
    prepare_documents(docs, cfg, stats)
}

/// Everything after ingestion, for callers that already hold documents.
pub fn prepare_documents(docs: Vec<RawDocument>, cfg: &EngineConfig, mut stats: CorpusStats) -> Result<Prepared> {
    if stats.ingested == 0 {
        stats.ingested = docs.len();
    }
    let kept = corpus::filter_documents(docs, &cfg.cleaning, &mut stats);
    if kept.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let tokenizer = train_bpe(kept.iter().map(|d| d.text.as_str()), cfg.vocab_size).stage("train_bpe")?;
    let mut chunks = Vec::new();
    for doc in &kept {
        chunks.extend(corpus::chunk(doc, &cfg.cleaning, &tokenizer).stage("chunk")?);
    }
    if chunks.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    stats.chunks = chunks.len();
    Ok(Prepared {
        tokenizer,
        chunks,
        stats,
        config: cfg.clone(),
    })
}

/// Per-call overrides of the configured fusion settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrieveOptions {
    pub mode: Option<FusionMode>,
    pub k: Option<usize>,
    /// Query embedding; required when chunk vectors came from an external file.
    pub query_vector: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub chunk_id: String,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparse_raw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dense_cos: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantum: Option<f64>,
    pub fused: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResponse {
    pub query: String,
    pub mode: FusionMode,
    pub hits: Vec<ScoredHit>,
    pub context: String,
    /// Stage name to wall-clock milliseconds.
    pub timings: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct ResponseBody<'a> {
    query: &'a str,
    mode: FusionMode,
    hits: &'a [ScoredHit],
    context: &'a str,
}

impl RetrievalResponse {
    /// Response JSON without the timings, which is fully determined by the
    /// index and the query.
    pub fn deterministic_json(&self) -> String {
        serde_json::to_string(&ResponseBody {
            query: &self.query,
            mode: self.mode,
            hits: &self.hits,
            context: &self.context,
        })
        .expect("response serializes")
    }
}

/// A loaded, immutable set of indexes. Safe to share across threads.
#[derive(Debug)]
pub struct Engine {
    config: EngineConfig,
    tokenizer: TokenizerModel,
    chunks: Vec<Chunk>,
    chunk_pos: HashMap<String, usize>,
    lexical: InvertedIndex,
    vectors: VectorIndex,
    stats: CorpusStats,
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

impl Engine {
    /// Builds the lexical and dense indexes over prepared chunks.
    pub fn build(prepared: Prepared) -> Result<Self> {
        let Prepared {
            tokenizer,
            chunks,
            stats,
            config,
        } = prepared;
        config.validate().stage("config")?;
        let lexical = lexical::build_index(&chunks, &tokenizer).stage("lexical")?;
        let ids: Vec<String> = chunks.iter().map(|c| c.chunk_id.clone()).collect();
        let vectors = match config.embedder.kind {
            EmbedderKind::HashProjection => {
                let mut embedder = HashEmbedder::new(config.embedder.dim);
                let rows = chunks
                    .iter()
                    .map(|c| {
                        let tokens = tokenizer.tokenize(&c.text);
                        embedder.embed(&tokens, &lexical).map(|e| e.values)
                    })
                    .collect::<Result<Vec<_>>>()
                    .stage("embed")?;
                VectorIndex::new(config.embedder.dim, ids, rows).stage("vectors")?
            }
            EmbedderKind::ExternalFile => {
                let path = config.embedder.path.as_ref().expect("validated");
                semantic::load_external_embeddings(path, &ids).stage("embed")?
            }
        };
        Self::from_parts(config, tokenizer, chunks, lexical, vectors, stats)
    }

    pub(crate) fn from_parts(
        config: EngineConfig,
        tokenizer: TokenizerModel,
        chunks: Vec<Chunk>,
        lexical: InvertedIndex,
        vectors: VectorIndex,
        stats: CorpusStats,
    ) -> Result<Self> {
        if chunks.is_empty() {
            return Err(Error::EmptyChunks);
        }
        let mut chunk_pos = HashMap::with_capacity(chunks.len());
        for (i, c) in chunks.iter().enumerate() {
            if chunk_pos.insert(c.chunk_id.clone(), i).is_some() {
                return Err(Error::format("chunks", format!("duplicate chunk id {}", c.chunk_id)));
            }
        }
        if lexical.n() != chunks.len() || vectors.len() != chunks.len() {
            return Err(Error::format("index", "chunk, lexical and vector counts differ"));
        }
        if let Some(id) = vectors.ids().iter().chain(lexical.chunk_ids()).find(|id| !chunk_pos.contains_key(*id)) {
            return Err(Error::UnknownChunk(id.clone()));
        }
        Ok(Self {
            config,
            tokenizer,
            chunks,
            chunk_pos,
            lexical,
            vectors,
            stats,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn tokenizer(&self) -> &TokenizerModel {
        &self.tokenizer
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn chunk(&self, id: &str) -> Option<&Chunk> {
        self.chunk_pos.get(id).map(|&i| &self.chunks[i])
    }

    pub fn lexical(&self) -> &InvertedIndex {
        &self.lexical
    }

    pub fn vectors(&self) -> &VectorIndex {
        &self.vectors
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    /// Query embedding as the dense leg sees it.
    pub fn embed_query(&self, terms: &[String], opts: &RetrieveOptions) -> Result<Embedding> {
        if let Some(v) = &opts.query_vector {
            return Embedding::new(v.clone());
        }
        match self.config.embedder.kind {
            EmbedderKind::HashProjection => HashEmbedder::new(self.config.embedder.dim).embed(terms, &self.lexical),
            EmbedderKind::ExternalFile => Err(Error::Config(
                "index uses external_file embeddings; supply query_vector".into(),
            )),
        }
    }

    pub fn retrieve(&self, query: &str, opts: &RetrieveOptions) -> Result<RetrievalResponse> {
        let total = Instant::now();
        let mut timings = BTreeMap::new();
        let mut fusion = self.config.fusion.clone();
        if let Some(mode) = opts.mode {
            fusion.mode = mode;
        }
        if let Some(k) = opts.k {
            fusion.k_final = k;
        }
        fusion.validate()?;

        let t = Instant::now();
        let terms = self.tokenizer.tokenize(query);
        if terms.is_empty() {
            return Err(Error::EmptyQuery);
        }
        timings.insert("tokenize".to_string(), elapsed_ms(t));

        let t = Instant::now();
        let sparse = self.lexical.search_terms(&self.config.bm25, &terms, fusion.k_sparse);
        timings.insert("sparse".to_string(), elapsed_ms(t));

        let t = Instant::now();
        let q = self.embed_query(&terms, opts)?;
        let dense = self.vectors.search_exact(&q, fusion.k_dense)?;
        timings.insert("dense".to_string(), elapsed_ms(t));

        let t = Instant::now();
        let cands = self.candidates(&terms, &q, &sparse, &dense, fusion.mode)?;
        let ranked = rank_candidates(cands, &fusion)?;
        let hits: Vec<ScoredHit> = ranked
            .into_iter()
            .enumerate()
            .map(|(i, c)| ScoredHit {
                text: self.chunk(&c.chunk_id).map(|ch| ch.text.clone()).unwrap_or_default(),
                chunk_id: c.chunk_id,
                sparse_raw: c.sparse_raw,
                dense_cos: c.dense_cos,
                quantum: c.quantum,
                fused: c.fused,
                rank: i + 1,
            })
            .collect();
        timings.insert("fusion".to_string(), elapsed_ms(t));

        let t = Instant::now();
        let texts: Vec<&str> = hits.iter().map(|h| h.text.as_str()).collect();
        let context = format_context(&texts, self.config.context_budget_tokens, &self.tokenizer);
        assert!(
            context_tokens(&context, &self.tokenizer) <= self.config.context_budget_tokens,
            "context exceeds budget"
        );
        timings.insert("context".to_string(), elapsed_ms(t));
        timings.insert("total".to_string(), elapsed_ms(total));

        Ok(RetrievalResponse {
            query: query.to_string(),
            mode: fusion.mode,
            hits,
            context,
            timings,
        })
    }

    /// Union of both legs, scored on every signal. Single-leg modes keep only
    /// their own leg so they reproduce that leg's ranking exactly.
    fn candidates(
        &self,
        terms: &[String],
        q: &Embedding,
        sparse: &[(String, f64)],
        dense: &[(String, f64)],
        mode: FusionMode,
    ) -> Result<Vec<CandidateScore>> {
        let sparse_rank: HashMap<&str, usize> = sparse.iter().enumerate().map(|(i, (id, _))| (id.as_str(), i + 1)).collect();
        let dense_rank: HashMap<&str, usize> = dense.iter().enumerate().map(|(i, (id, _))| (id.as_str(), i + 1)).collect();
        let mut seen = HashSet::new();
        let pool: Vec<&str> = match mode {
            FusionMode::SparseOnly => sparse.iter().map(|(id, _)| id.as_str()).collect(),
            FusionMode::DenseOnly => dense.iter().map(|(id, _)| id.as_str()).collect(),
            _ => sparse
                .iter()
                .chain(dense)
                .map(|(id, _)| id.as_str())
                .filter(|id| seen.insert(*id))
                .collect(),
        };
        let q_state = quantum::amplitude_encode(q)?;
        let mut raw: HashMap<&str, f64> = HashMap::with_capacity(pool.len());
        let mut out = Vec::with_capacity(pool.len());
        for &id in &pool {
            let sparse_raw = self.lexical.bm25_score(&self.config.bm25, terms, id)?;
            raw.insert(id, sparse_raw);
            let row = self.vectors.embedding_of(id).ok_or_else(|| Error::UnknownChunk(id.to_string()))?;
            let overlap = quantum::overlap(&q_state, &quantum::amplitude_encode(&row)?)?;
            out.push(CandidateScore {
                chunk_id: id.to_string(),
                sparse_raw: Some(sparse_raw),
                sparse_rank: sparse_rank.get(id).copied(),
                dense_cos: Some(self.vectors.cosine_to(id, q)?),
                dense_rank: dense_rank.get(id).copied(),
                overlap: Some(overlap),
                ..Default::default()
            });
        }
        // no lexical evidence at all means no lexical amplitude, not a uniform one
        let any_lexical = raw.values().any(|&s| s > 0.0);
        let norm = quantum::normalize_lexical(&raw);
        for c in &mut out {
            c.lexical_norm = if any_lexical { norm[c.chunk_id.as_str()] } else { 0.0 };
        }
        Ok(out)
    }
}

/// Full pipeline from a corpus to a persisted index in `out_dir`.
///
/// `corpus_path` may be a JSONL file, a directory of JSONL files, or a
/// directory written by [`Prepared::save`]. In the last case the stored
/// tokenizer and chunks are reused along with the cleaning settings and
/// vocabulary size they were made with.
pub fn build_all(corpus_path: impl AsRef<Path>, cfg: &EngineConfig, out_dir: impl AsRef<Path>) -> Result<IndexManifest> {
    let corpus_path = corpus_path.as_ref();
    let prepared = if corpus_path.is_dir() && Prepared::is_prepared_dir(corpus_path) {
        let mut p = Prepared::load(corpus_path).stage("ingest")?;
        let stored = std::mem::replace(&mut p.config, cfg.clone());
        p.config.cleaning = stored.cleaning;
        p.config.vocab_size = stored.vocab_size;
        p
    } else {
        prepare(corpus_path, cfg)?
    };
    let engine = Engine::build(prepared)?;
    save_index(&engine, out_dir).stage("save")
}

/// Free-function form of [`Engine::retrieve`].
pub fn retrieve(engine: &Engine, query: &str, opts: &RetrieveOptions) -> Result<RetrievalResponse> {
    engine.retrieve(query, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy_docs() -> Vec<RawDocument> {
        let texts = [
            "ਪੰਜਾਬ ਦੀ ਧਰਤੀ ਬਹੁਤ ਉਪਜਾਊ ਹੈ ਅਤੇ ਇੱਥੇ ਕਣਕ ਉਗਾਈ ਜਾਂਦੀ ਹੈ",
            "ਗੁਰੂ ਨਾਨਕ ਦੇਵ ਜੀ ਦਾ ਜਨਮ ਤਲਵੰਡੀ ਵਿੱਚ ਹੋਇਆ ਸੀ ਜੋ ਹੁਣ ਪਾਕਿਸਤਾਨ ਵਿੱਚ ਹੈ",
            "ਅੰਮ੍ਰਿਤਸਰ ਵਿੱਚ ਹਰਿਮੰਦਰ ਸਾਹਿਬ ਸਥਿਤ ਹੈ ਜਿੱਥੇ ਲੱਖਾਂ ਲੋਕ ਆਉਂਦੇ ਹਨ",
            "ਭੰਗੜਾ ਪੰਜਾਬ ਦਾ ਇੱਕ ਪ੍ਰਸਿੱਧ ਲੋਕ ਨਾਚ ਹੈ ਜੋ ਵਿਸਾਖੀ ਤੇ ਨੱਚਿਆ ਜਾਂਦਾ ਹੈ",
            "ਪੰਜ ਦਰਿਆਵਾਂ ਦੀ ਧਰਤੀ ਨੂੰ ਪੰਜਾਬ ਕਿਹਾ ਜਾਂਦਾ ਹੈ ਅਤੇ ਇਹ ਨਾਮ ਫ਼ਾਰਸੀ ਤੋਂ ਆਇਆ",
            "ਲੁਧਿਆਣਾ ਸ਼ਹਿਰ ਆਪਣੇ ਕੱਪੜਾ ਉਦਯੋਗ ਲਈ ਮਸ਼ਹੂਰ ਹੈ ਅਤੇ ਇੱਥੇ ਵੱਡੀ ਮੰਡੀ ਹੈ",
            "ਸਰ੍ਹੋਂ ਦਾ ਸਾਗ ਅਤੇ ਮੱਕੀ ਦੀ ਰੋਟੀ ਪੰਜਾਬੀ ਖਾਣੇ ਦੀ ਪਛਾਣ ਹੈ ਸਰਦੀਆਂ ਵਿੱਚ",
            "ਪੰਜਾਬੀ ਭਾਸ਼ਾ ਗੁਰਮੁਖੀ ਅਤੇ ਸ਼ਾਹਮੁਖੀ ਦੋਵਾਂ ਲਿਪੀਆਂ ਵਿੱਚ ਲਿਖੀ ਜਾਂਦੀ ਹੈ",
            "ਵਿਸਾਖੀ ਦਾ ਤਿਉਹਾਰ ਫ਼ਸਲ ਦੀ ਵਾਢੀ ਦੀ ਖ਼ੁਸ਼ੀ ਵਿੱਚ ਅਪ੍ਰੈਲ ਮਹੀਨੇ ਮਨਾਇਆ ਜਾਂਦਾ ਹੈ",
            "ਜਲ੍ਹਿਆਂਵਾਲਾ ਬਾਗ਼ ਅੰਮ੍ਰਿਤਸਰ ਵਿੱਚ ਇੱਕ ਇਤਿਹਾਸਕ ਥਾਂ ਹੈ ਜਿੱਥੇ ਯਾਦਗਾਰ ਬਣੀ ਹੈ",
        ];
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| RawDocument {
                doc_id: format!("d{i}"),
                text: t.to_string(),
                source: "toy".into(),
                metadata: BTreeMap::new(),
            })
            .collect()
    }

    pub(crate) fn toy_config() -> EngineConfig {
        EngineConfig {
            cleaning: CleaningConfig {
                min_tokens: 3,
                chunk_size_tokens: 32,
                chunk_overlap_tokens: 8,
                ..CleaningConfig::default()
            },
            embedder: EmbedderSpec::hash_projection(64),
            vocab_size: 400,
            context_budget_tokens: 64,
            ..EngineConfig::default()
        }
    }

    pub(crate) fn toy_engine() -> Engine {
        let prepared = prepare_documents(toy_docs(), &toy_config(), CorpusStats::default()).unwrap();
        Engine::build(prepared).unwrap()
    }

    #[test]
    fn config_json_field_names() {
        let v = serde_json::to_value(EngineConfig::default()).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["bm25", "cleaning", "context_budget_tokens", "embedder", "fusion", "vocab_size"]);
        let cfg: EngineConfig = serde_json::from_str(r#"{"fusion":{"mode":"rrf"}}"#).unwrap();
        assert_eq!(cfg.fusion.mode, FusionMode::Rrf);
        assert_eq!(cfg.context_budget_tokens, 1024);
    }

    #[test]
    fn budget_below_chunk_size_rejected() {
        let cfg = EngineConfig {
            context_budget_tokens: 100,
            ..EngineConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn every_doc_filtered_is_empty_corpus() {
        let docs = vec![RawDocument {
            doc_id: "en".into(),
            text: "this is an english sentence with many words in it".into(),
            source: String::new(),
            metadata: BTreeMap::new(),
        }];
        let err = prepare_documents(docs, &toy_config(), CorpusStats::default()).unwrap_err();
        assert_eq!(err.to_string(), "empty corpus");
    }

    #[test]
    fn planted_term_ranks_first_sparse() {
        let e = toy_engine();
        let r = e
            .retrieve("ਤਲਵੰਡੀ", &RetrieveOptions {
                mode: Some(FusionMode::SparseOnly),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(r.hits[0].chunk_id, "d1#0");
        assert_eq!(r.hits[0].rank, 1);
    }

    #[test]
    fn self_match_dense() {
        let e = toy_engine();
        let text = e.chunk("d6#0").unwrap().text.clone();
        let r = e
            .retrieve(&text, &RetrieveOptions {
                mode: Some(FusionMode::DenseOnly),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(r.hits[0].chunk_id, "d6#0");
        assert!((r.hits[0].fused - 1.0).abs() < 1e-6, "{}", r.hits[0].fused);
    }

    #[test]
    fn single_leg_modes_match_legs() {
        let e = toy_engine();
        let cfg = e.config().clone();
        for q in ["ਪੰਜਾਬ ਦੀ ਧਰਤੀ", "ਵਿਸਾਖੀ ਤਿਉਹਾਰ", "ਅੰਮ੍ਰਿਤਸਰ"] {
            let opts = |m| RetrieveOptions {
                mode: Some(m),
                ..Default::default()
            };
            let sparse = e.retrieve(q, &opts(FusionMode::SparseOnly)).unwrap();
            let want = e.lexical().search(&cfg.bm25, q, cfg.fusion.k_final, e.tokenizer());
            let got: Vec<(String, f64)> = sparse.hits.iter().map(|h| (h.chunk_id.clone(), h.fused)).collect();
            assert_eq!(got, want);

            let dense = e.retrieve(q, &opts(FusionMode::DenseOnly)).unwrap();
            let qv = e.embed_query(&e.tokenizer().tokenize(q), &RetrieveOptions::default()).unwrap();
            let want = e.vectors().search_exact(&qv, cfg.fusion.k_final).unwrap();
            let got: Vec<(String, f64)> = dense.hits.iter().map(|h| (h.chunk_id.clone(), h.fused)).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn hits_come_from_some_leg_and_are_ranked() {
        let e = toy_engine();
        let cfg = e.config().clone();
        let q = "ਪੰਜਾਬੀ ਲੋਕ ਨਾਚ";
        let terms = e.tokenizer().tokenize(q);
        let sparse: HashSet<String> = e
            .lexical()
            .search_terms(&cfg.bm25, &terms, cfg.fusion.k_sparse)
            .into_iter()
            .map(|(id, _)| id)
            .collect();
        let qv = e.embed_query(&terms, &RetrieveOptions::default()).unwrap();
        let dense: HashSet<String> = e
            .vectors()
            .search_exact(&qv, cfg.fusion.k_dense)
            .unwrap()
            .into_iter()
            .map(|(id, _)| id)
            .collect();
        for mode in FusionMode::ALL {
            let r = e
                .retrieve(q, &RetrieveOptions {
                    mode: Some(mode),
                    ..Default::default()
                })
                .unwrap();
            assert_eq!(r.mode, mode);
            for (i, h) in r.hits.iter().enumerate() {
                assert_eq!(h.rank, i + 1);
                assert!(sparse.contains(&h.chunk_id) || dense.contains(&h.chunk_id));
            }
            assert!(r.hits.windows(2).all(|w| w[0].fused >= w[1].fused));
            assert!(context_tokens(&r.context, e.tokenizer()) <= cfg.context_budget_tokens);
            assert!(r.timings.contains_key("total"));
        }
    }

    #[test]
    fn quantum_modes_report_kernel() {
        let e = toy_engine();
        let r = e.retrieve("ਗੁਰੂ ਨਾਨਕ ਦੇਵ", &RetrieveOptions::default()).unwrap();
        assert_eq!(r.mode, FusionMode::QuantumInterference);
        let top = &r.hits[0];
        assert_eq!(top.quantum, Some(top.fused));
        assert!(top.sparse_raw.is_some() && top.dense_cos.is_some());
    }

    #[test]
    fn empty_query_rejected() {
        let e = toy_engine();
        assert!(matches!(e.retrieve("   ", &RetrieveOptions::default()), Err(Error::EmptyQuery)));
    }

    #[test]
    fn k_override_and_determinism() {
        let e = toy_engine();
        let opts = RetrieveOptions {
            k: Some(3),
            ..Default::default()
        };
        let a = e.retrieve("ਪੰਜਾਬ", &opts).unwrap();
        let b = e.retrieve("ਪੰਜਾਬ", &opts).unwrap();
        assert_eq!(a.hits.len(), 3);
        assert_eq!(a.deterministic_json(), b.deterministic_json());
        assert!(!a.deterministic_json().contains("timings"));
    }

    #[test]
    fn supplied_query_vector_is_used() {
        let e = toy_engine();
        let row = e.vectors().embedding_of("d3#0").unwrap();
        let r = e
            .retrieve("ਨਾਚ", &RetrieveOptions {
                mode: Some(FusionMode::DenseOnly),
                query_vector: Some(row.values),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(r.hits[0].chunk_id, "d3#0");
    }
}
