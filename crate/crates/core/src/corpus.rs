//! Document ingestion, cleaning, filtering and chunking.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tokenizer::{self, is_gurmukhi, is_letter_or_mark, is_punctuation, TokenizerModel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub doc_id: String,
    pub text: String,
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanDocument {
    pub doc_id: String,
    pub text: String,
    pub gurmukhi_fraction: f64,
    pub dedup_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub token_offset: usize,
    pub token_count: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningConfig {
    pub min_gurmukhi_fraction: f64,
    pub min_tokens: usize,
    pub max_punct_ratio: f64,
    pub chunk_size_tokens: usize,
    pub chunk_overlap_tokens: usize,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            min_gurmukhi_fraction: 0.5,
            min_tokens: 10,
            max_punct_ratio: 0.5,
            chunk_size_tokens: 256,
            chunk_overlap_tokens: 64,
        }
    }
}

impl CleaningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_gurmukhi_fraction) {
            return Err(Error::Config("min_gurmukhi_fraction must be in [0, 1]".into()));
        }
        if !(self.max_punct_ratio >= 0.0) {
            return Err(Error::Config("max_punct_ratio must be >= 0".into()));
        }
        if self.chunk_size_tokens == 0 {
            return Err(Error::Config("chunk_size_tokens must be > 0".into()));
        }
        if self.chunk_overlap_tokens >= self.chunk_size_tokens {
            return Err(Error::Config("chunk_overlap_tokens must be < chunk_size_tokens".into()));
        }
        Ok(())
    }

    fn stride(&self) -> usize {
        self.chunk_size_tokens - self.chunk_overlap_tokens
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Empty,
    TooShort,
    Punct,
    Language,
    DuplicateId,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Empty => "empty",
            RejectReason::TooShort => "too_short",
            RejectReason::Punct => "punct",
            RejectReason::Language => "language",
            RejectReason::DuplicateId => "duplicate_id",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Reject(RejectReason),
}

// ---------------------------------------------------------------------------
// Ingestion

#[derive(Deserialize)]
struct JsonlRecord {
    id: Option<String>,
    text: String,
    source: Option<String>,
    metadata: Option<BTreeMap<String, serde_json::Value>>,
}

/// Outcome of reading one JSONL line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineOutcome {
    Document(RawDocument),
    Malformed { line: usize, reason: String },
    InvalidUtf8 { line: usize },
}

/// Streams documents from JSONL, one outcome per non-blank line.
///
/// Lines are numbered from 0; a record without `id` gets `line-{n}`.
pub struct JsonlDocuments<R> {
    lines: std::io::Split<R>,
    line: usize,
}

impl<R: BufRead> JsonlDocuments<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.split(b'\n'),
            line: 0,
        }
    }
}

impl<R: BufRead> Iterator for JsonlDocuments<R> {
    type Item = std::io::Result<LineOutcome>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let bytes = match self.lines.next()? {
                Ok(b) => b,
                Err(e) => return Some(Err(e)),
            };
            let line = self.line;
            self.line += 1;
            let Ok(text) = std::str::from_utf8(&bytes) else {
                return Some(Ok(LineOutcome::InvalidUtf8 { line }));
            };
            let text = text.trim();
            if text.is_empty() {
                continue;
            }
            return Some(Ok(parse_record(text, line)));
        }
    }
}

fn parse_record(text: &str, line: usize) -> LineOutcome {
    let rec: JsonlRecord = match serde_json::from_str(text) {
        Ok(r) => r,
        Err(e) => {
            return LineOutcome::Malformed {
                line,
                reason: e.to_string(),
            }
        }
    };
    let doc_id = rec.id.unwrap_or_else(|| format!("line-{line}"));
    if doc_id.is_empty() {
        return LineOutcome::Malformed {
            line,
            reason: "empty id".into(),
        };
    }
    let metadata = rec
        .metadata
        .unwrap_or_default()
        .into_iter()
        .map(|(k, v)| match v {
            serde_json::Value::String(s) => (k, s),
            other => (k, other.to_string()),
        })
        .collect();
    LineOutcome::Document(RawDocument {
        doc_id,
        text: rec.text,
        source: rec.source.unwrap_or_default(),
        metadata,
    })
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub documents: Vec<RawDocument>,
    pub skipped_malformed: usize,
    pub skipped_invalid_utf8: usize,
}

impl Ingested {
    pub fn skipped(&self) -> usize {
        self.skipped_malformed + self.skipped_invalid_utf8
    }
}

pub fn ingest_reader<R: BufRead>(reader: R) -> std::io::Result<Ingested> {
    let mut out = Ingested::default();
    for outcome in JsonlDocuments::new(reader) {
        match outcome? {
            LineOutcome::Document(d) => out.documents.push(d),
            LineOutcome::Malformed { .. } => out.skipped_malformed += 1,
            LineOutcome::InvalidUtf8 { .. } => out.skipped_invalid_utf8 += 1,
        }
    }
    Ok(out)
}

pub fn ingest_jsonl(path: impl AsRef<Path>) -> Result<Ingested> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(BufReader::new(file)).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Cleaning

fn decode_entity(name: &str) -> Option<char> {
    match name {
        "amp" => Some('&'),
        "lt" => Some('<'),
        "gt" => Some('>'),
        "quot" => Some('"'),
        "apos" => Some('\''),
        "nbsp" => Some(' '),
        _ => {
            let num = name.strip_prefix('#')?;
            let value = match num.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok()?,
                None => num.parse().ok()?,
            };
            char::from_u32(value)
        }
    }
}

fn decode_entities(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp + 1..];
        let decoded = tail
            .find(';')
            .filter(|&semi| semi > 0 && semi <= 10)
            .and_then(|semi| decode_entity(&tail[..semi]).map(|c| (c, semi)));
        match decoded {
            Some((c, semi)) => {
                out.push(c);
                rest = &tail[semi + 1..];
            }
            None => {
                out.push('&');
                rest = tail;
            }
        }
    }
    out.push_str(rest);
    out
}

fn starts_tag(c: char) -> bool {
    c.is_ascii_alphabetic() || matches!(c, '/' | '!' | '?')
}

/// Deletes `<...>` spans whose first character looks like a tag name.
fn strip_tags(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(lt) = rest.find('<') {
        out.push_str(&rest[..lt]);
        let tail = &rest[lt + 1..];
        let is_tag = tail.chars().next().is_some_and(starts_tag);
        match tail.find('>').filter(|_| is_tag) {
            Some(gt) if !tail[..gt].contains('<') => {
                out.push(' ');
                rest = &tail[gt + 1..];
            }
            _ => {
                out.push('<');
                rest = tail;
            }
        }
    }
    out.push_str(rest);
    out
}

fn scrub_controls(text: &str) -> String {
    text.chars()
        .filter_map(|c| {
            if c.is_whitespace() {
                Some(if c == '\n' { '\n' } else { ' ' })
            } else if c.is_control() {
                None
            } else {
                Some(c)
            }
        })
        .collect()
}

/// Markup, entity and control-character removal plus normalization.
/// Idempotent.
pub fn clean_str(text: &str) -> String {
    let mut current = scrub_controls(text);
    // Entities can decode into markup and tag removal can splice entities
    // together, so iterate to a fixed point.
    for _ in 0..16 {
        let next = scrub_controls(&strip_tags(&decode_entities(&current)));
        if next == current {
            break;
        }
        current = next;
    }
    tokenizer::normalize(&current)
}

pub fn clean_text(raw: &RawDocument, _cfg: &CleaningConfig) -> std::result::Result<CleanDocument, RejectReason> {
    let text = clean_str(&raw.text);
    if text.is_empty() {
        return Err(RejectReason::Empty);
    }
    Ok(CleanDocument {
        doc_id: raw.doc_id.clone(),
        gurmukhi_fraction: gurmukhi_fraction(&text),
        dedup_digest: dedup_key(&text),
        text,
    })
}

/// Share of letter/mark codepoints that fall in the Gurmukhi block.
pub fn gurmukhi_fraction(text: &str) -> f64 {
    let (mut gurmukhi, mut letters) = (0usize, 0usize);
    for c in text.chars().filter(|&c| is_letter_or_mark(c)) {
        letters += 1;
        if is_gurmukhi(c) {
            gurmukhi += 1;
        }
    }
    if letters == 0 {
        0.0
    } else {
        gurmukhi as f64 / letters as f64
    }
}

/// SHA-256 of the UTF-8 bytes, lowercase hex.
pub fn dedup_key(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Streaming exact-duplicate filter.
#[derive(Debug, Default)]
pub struct Deduplicator {
    seen: HashSet<String>,
}

impl Deduplicator {
    pub fn new() -> Self {
        Self::default()
    }

    /// True the first time a digest is offered.
    pub fn admit(&mut self, doc: &CleanDocument) -> bool {
        self.seen.insert(doc.dedup_digest.clone())
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

pub fn punct_ratio(text: &str) -> f64 {
    let (mut punct, mut total) = (0usize, 0usize);
    for c in text.chars().filter(|c| !c.is_whitespace()) {
        total += 1;
        if is_punctuation(c) {
            punct += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        punct as f64 / total as f64
    }
}

pub fn quality_check(doc: &CleanDocument, cfg: &CleaningConfig) -> Verdict {
    if punct_ratio(&doc.text) > cfg.max_punct_ratio {
        return Verdict::Reject(RejectReason::Punct);
    }
    if doc.text.split_whitespace().count() < cfg.min_tokens {
        return Verdict::Reject(RejectReason::TooShort);
    }
    if doc.gurmukhi_fraction < cfg.min_gurmukhi_fraction {
        return Verdict::Reject(RejectReason::Language);
    }
    Verdict::Keep
}

// ---------------------------------------------------------------------------
// Chunking

/// Token windows `(offset, len)` for a sequence of `n` tokens.
pub fn chunk_spans(n: usize, cfg: &CleaningConfig) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    if n == 0 {
        return spans;
    }
    let size = cfg.chunk_size_tokens;
    let mut offset = 0;
    loop {
        let len = size.min(n - offset);
        if offset == 0 || len >= cfg.min_tokens {
            spans.push((offset, len));
        }
        if offset + size >= n {
            break;
        }
        offset += cfg.stride();
    }
    spans
}

pub fn chunk(doc: &CleanDocument, cfg: &CleaningConfig, tok: &TokenizerModel) -> Result<Vec<Chunk>> {
    let ids = tok.encode_ids(&doc.text);
    chunk_spans(ids.len(), cfg)
        .into_iter()
        .enumerate()
        .map(|(index, (offset, len))| {
            Ok(Chunk {
                chunk_id: format!("{}#{index}", doc.doc_id),
                doc_id: doc.doc_id.clone(),
                token_offset: offset,
                token_count: len,
                text: tok.decode_ids(&ids[offset..offset + len])?,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Pipeline statistics

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub ingested: usize,
    pub skipped_lines: usize,
    pub deduped: usize,
    pub rejected_by_reason: BTreeMap<String, usize>,
    pub kept: usize,
    pub chunks: usize,
}

impl CorpusStats {
    pub fn reject(&mut self, reason: RejectReason) {
        *self.rejected_by_reason.entry(reason.as_str().to_string()).or_default() += 1;
    }
}

/// Clean, deduplicate and filter documents, recording every drop in `stats`.
pub fn filter_documents(
    docs: impl IntoIterator<Item = RawDocument>,
    cfg: &CleaningConfig,
    stats: &mut CorpusStats,
) -> Vec<CleanDocument> {
    let mut dedup = Deduplicator::new();
    let mut ids = HashSet::new();
    let mut kept = Vec::new();
    for raw in docs {
        let doc = match clean_text(&raw, cfg) {
            Ok(d) => d,
            Err(reason) => {
                stats.reject(reason);
                continue;
            }
        };
        if !dedup.admit(&doc) {
            stats.deduped += 1;
            continue;
        }
        if let Verdict::Reject(reason) = quality_check(&doc, cfg) {
            stats.reject(reason);
            continue;
        }
        if !ids.insert(doc.doc_id.clone()) {
            stats.reject(RejectReason::DuplicateId);
            continue;
        }
        kept.push(doc);
    }
    stats.kept = kept.len();
    kept
}
