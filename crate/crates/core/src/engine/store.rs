//! Index directory layout, manifest and integrity checks.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Engine, EngineConfig};
use crate::corpus::{Chunk, CorpusStats};
use crate::error::{Error, Result};
use crate::lexical::{InvertedIndex, DOCLEN_FILE, LEXICAL_FILE};
use crate::semantic::{EmbedderSpec, VectorIndex, VECTORS_FILE, VECTOR_IDS_FILE};
use crate::tokenizer::TokenizerModel;

pub const INDEX_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOKENIZER_FILE: &str = "tokenizer.json";
pub const CHUNKS_FILE: &str = "chunks.jsonl";
pub const CONFIG_FILE: &str = "config.json";
pub const STATS_FILE: &str = "stats.json";

/// Files covered by the manifest digests, in the order they are written.
const INDEX_FILES: [&str; 8] = [
    TOKENIZER_FILE,
    CHUNKS_FILE,
    LEXICAL_FILE,
    DOCLEN_FILE,
    VECTORS_FILE,
    VECTOR_IDS_FILE,
    CONFIG_FILE,
    STATS_FILE,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub format_version: u32,
    /// RFC 3339, UTC.
    pub created_at: String,
    pub chunk_count: usize,
    pub tokenizer_digest: String,
    pub embedder: EmbedderSpec,
    pub config: EngineConfig,
    /// File name to SHA-256 hex digest.
    pub files: BTreeMap<String, String>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub(crate) fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| Error::format(file_name(path), e))
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn write_chunks(path: impl AsRef<Path>, chunks: &[Chunk]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for c in chunks {
        serde_json::to_writer(&mut w, c)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_chunks(path: impl AsRef<Path>) -> Result<Vec<Chunk>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::format(CHUNKS_FILE, format!("line {i}: {e}")))?);
    }
    Ok(out)
}

/// Writes every index file plus a manifest with their digests.
pub fn save_index(engine: &Engine, dir: impl AsRef<Path>) -> Result<IndexManifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    engine.tokenizer.save(dir.join(TOKENIZER_FILE))?;
    write_chunks(dir.join(CHUNKS_FILE), &engine.chunks)?;
    engine.lexical.save(dir)?;
    engine.vectors.save(dir)?;
    write_json(dir.join(CONFIG_FILE), &engine.config)?;
    write_json(dir.join(STATS_FILE), &engine.stats)?;

    let mut files = BTreeMap::new();
    for name in INDEX_FILES {
        files.insert(name.to_string(), sha256_file(&dir.join(name))?);
    }
    let manifest = IndexManifest {
        format_version: INDEX_FORMAT_VERSION,
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        chunk_count: engine.chunks.len(),
        tokenizer_digest: files[TOKENIZER_FILE].clone(),
        embedder: engine.config.embedder.clone(),
        config: engine.config.clone(),
        files,
    };
    write_json(dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Reads the manifest, checks the format version and every digest, then
/// loads the indexes.
pub fn load_index(dir: impl AsRef<Path>) -> Result<Engine> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let raw: serde_json::Value = read_json(&manifest_path)?;
    // gate on the version before the rest of the schema is trusted
    let version = raw.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0);
    if version != INDEX_FORMAT_VERSION as u64 {
        return Err(Error::UnsupportedVersion(version.min(u32::MAX as u64) as u32));
    }
    let manifest: IndexManifest = serde_json::from_value(raw).map_err(|e| Error::format(MANIFEST_FILE, e))?;
    verify(dir, &manifest)?;

    let engine = Engine::from_parts(
        read_json(dir.join(CONFIG_FILE))?,
        TokenizerModel::load(dir.join(TOKENIZER_FILE))?,
        read_chunks(dir.join(CHUNKS_FILE))?,
        InvertedIndex::load(dir)?,
        VectorIndex::load(dir)?,
        read_json::<CorpusStats>(dir.join(STATS_FILE))?,
    )?;
    if engine.chunks.len() != manifest.chunk_count {
        return Err(Error::format(MANIFEST_FILE, "chunk_count does not match chunks.jsonl"));
    }
    Ok(engine)
}

fn verify(dir: &Path, manifest: &IndexManifest) -> Result<()> {
    for name in INDEX_FILES {
        let want = manifest
            .files
            .get(name)
            .ok_or_else(|| Error::format(MANIFEST_FILE, format!("no digest for {name}")))?;
        if &sha256_file(&dir.join(name))? != want {
            return Err(Error::DigestMismatch(name.to_string()));
        }
    }
    if manifest.tokenizer_digest != manifest.files[TOKENIZER_FILE] {
        return Err(Error::DigestMismatch(TOKENIZER_FILE.to_string()));
    }
    Ok(())
}
