//! BM25 over an inverted index of subword terms.
//!
//! IDF uses the `ln(1 + (N - df + 0.5) / (df + 0.5))` form, which is
//! positive for every `df <= N`, so all scores are non-negative.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Chunk;
use crate::error::{Error, Result};
use crate::tokenizer::TokenizerModel;

pub const LEXICAL_FILE: &str = "lexical.jsonl";
pub const DOCLEN_FILE: &str = "doclen.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(Error::Config("bm25.k1 must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config("bm25.b must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// IDF with the +1 inside the logarithm.
pub fn idf_value(n: usize, df: usize) -> f64 {
    let (n, df) = (n as f64, df as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// One term's BM25 contribution.
pub fn term_weight(idf: f64, tf: u32, dl: usize, avgdl: f64, p: &Bm25Params) -> f64 {
    let tf = tf as f64;
    let norm = 1.0 - p.b + p.b * dl as f64 / avgdl;
    idf * tf * (p.k1 + 1.0) / (tf + p.k1 * norm)
}

/// Distinct terms in first-occurrence order. Every scorer iterates terms
/// in this order so sums are bitwise reproducible.
pub fn distinct_terms<S: AsRef<str>>(terms: &[S]) -> Vec<&str> {
    let mut seen = HashSet::new();
    terms
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| seen.insert(*t))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    /// Sorted chunk ids; postings refer to positions in this list.
    chunk_ids: Vec<String>,
    ordinal: HashMap<String, u32>,
    doc_len: Vec<usize>,
    avgdl: f64,
    postings: HashMap<String, Vec<(u32, u32)>>,
}

#[derive(Serialize, Deserialize)]
struct LexicalHeader {
    #[serde(rename = "N")]
    n: usize,
    avgdl: f64,
}

#[derive(Serialize, Deserialize)]
struct TermLine {
    term: String,
    postings: Vec<(String, u32)>,
}

#[derive(Serialize, Deserialize)]
struct DocLenLine {
    chunk_id: String,
    len: usize,
}

fn mean_len(lens: &[usize]) -> f64 {
    lens.iter().sum::<usize>() as f64 / lens.len() as f64
}

impl InvertedIndex {
    /// Builds from `(chunk_id, terms)` pairs.
    pub fn from_terms<I, S>(docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<S>)>,
        S: AsRef<str>,
    {
        let mut docs: Vec<(String, Vec<S>)> = docs.into_iter().collect();
        if docs.is_empty() {
            return Err(Error::EmptyChunks);
        }
        docs.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = docs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::format("chunks", format!("duplicate chunk id {}", w[0].0)));
        }

        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        let mut doc_len = Vec::with_capacity(docs.len());
        let mut chunk_ids = Vec::with_capacity(docs.len());
        for (ord, (id, terms)) in docs.into_iter().enumerate() {
            let mut tf: HashMap<&str, u32> = HashMap::new();
            for t in &terms {
                *tf.entry(t.as_ref()).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term.to_string()).or_default().push((ord as u32, count));
            }
            doc_len.push(terms.len());
            chunk_ids.push(id);
        }
        // ordinals were pushed in increasing order per term
        let ordinal = chunk_ids.iter().enumerate().map(|(i, id)| (id.clone(), i as u32)).collect();
        Ok(Self {
            avgdl: mean_len(&doc_len),
            chunk_ids,
            ordinal,
            doc_len,
            postings,
        })
    }

    pub fn n(&self) -> usize {
        self.chunk_ids.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn chunk_ids(&self) -> &[String] {
        &self.chunk_ids
    }

    pub fn doc_len(&self, chunk_id: &str) -> Option<usize> {
        self.ordinal.get(chunk_id).map(|&o| self.doc_len[o as usize])
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    /// Postings of `term` as `(chunk_id, tf)`, sorted by chunk id.
    pub fn postings(&self, term: &str) -> Vec<(&str, u32)> {
        self.postings
            .get(term)
            .map(|p| p.iter().map(|&(o, tf)| (self.chunk_ids[o as usize].as_str(), tf)).collect())
            .unwrap_or_default()
    }

    pub fn idf(&self, term: &str) -> f64 {
        idf_value(self.n(), self.df(term))
    }

    pub fn idf_weights(&self) -> HashMap<String, f64> {
        self.postings
            .keys()
            .map(|t| (t.clone(), self.idf(t)))
            .collect()
    }

    fn tf(&self, term: &str, ord: u32) -> u32 {
        self.postings
            .get(term)
            .and_then(|p| p.binary_search_by_key(&ord, |&(o, _)| o).ok().map(|i| p[i].1))
            .unwrap_or(0)
    }

    pub fn bm25_score<S: AsRef<str>>(&self, p: &Bm25Params, query_terms: &[S], chunk_id: &str) -> Result<f64> {
        let ord = *self
            .ordinal
            .get(chunk_id)
            .ok_or_else(|| Error::UnknownChunk(chunk_id.to_string()))?;
        let dl = self.doc_len[ord as usize];
        let mut score = 0.0;
        for term in distinct_terms(query_terms) {
            let tf = self.tf(term, ord);
            if tf > 0 {
                score += term_weight(self.idf(term), tf, dl, self.avgdl, p);
            }
        }
        Ok(score)
    }

    /// Top-`k` chunks for pre-tokenized query terms.
    pub fn search_terms<S: AsRef<str>>(&self, p: &Bm25Params, query_terms: &[S], k: usize) -> Vec<(String, f64)> {
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for term in distinct_terms(query_terms) {
            let Some(list) = self.postings.get(term) else { continue };
            let idf = self.idf(term);
            for &(ord, tf) in list {
                *acc.entry(ord).or_insert(0.0) += term_weight(idf, tf, self.doc_len[ord as usize], self.avgdl, p);
            }
        }
        let mut hits: Vec<(u32, f64)> = acc.into_iter().collect();
        // ordinals follow chunk-id order, so they break ties directly
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        hits.truncate(k);
        hits.into_iter()
            .map(|(o, s)| (self.chunk_ids[o as usize].clone(), s))
            .collect()
    }

    pub fn search(&self, p: &Bm25Params, query: &str, k: usize, tok: &TokenizerModel) -> Vec<(String, f64)> {
        self.search_terms(p, &tok.tokenize(query), k)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let path = dir.join(LEXICAL_FILE);
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(&path, e);
        writeln!(w, "{}", serde_json::to_string(&LexicalHeader { n: self.n(), avgdl: self.avgdl })?).map_err(io)?;
        let mut terms: Vec<&String> = self.postings.keys().collect();
        terms.sort();
        for term in terms {
            let line = TermLine {
                term: term.clone(),
                postings: self.postings(term).into_iter().map(|(id, tf)| (id.to_string(), tf)).collect(),
            };
            writeln!(w, "{}", serde_json::to_string(&line)?).map_err(io)?;
        }
        w.flush().map_err(io)?;

        let path = dir.join(DOCLEN_FILE);
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(&path, e);
        for (id, &len) in self.chunk_ids.iter().zip(&self.doc_len) {
            let line = DocLenLine { chunk_id: id.clone(), len };
            writeln!(w, "{}", serde_json::to_string(&line)?).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(DOCLEN_FILE);
        let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut chunk_ids = Vec::new();
        let mut doc_len = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            let rec: DocLenLine = serde_json::from_str(&line).map_err(|e| Error::format(DOCLEN_FILE, e))?;
            chunk_ids.push(rec.chunk_id);
            doc_len.push(rec.len);
        }
        if chunk_ids.is_empty() {
            return Err(Error::EmptyChunks);
        }
        if chunk_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::format(DOCLEN_FILE, "chunk ids not strictly sorted"));
        }
        let ordinal: HashMap<String, u32> = chunk_ids.iter().enumerate().map(|(i, id)| (id.clone(), i as u32)).collect();

        let path = dir.join(LEXICAL_FILE);
        let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(LEXICAL_FILE, "missing header"))?
            .map_err(|e| Error::io(&path, e))?;
        let header: LexicalHeader = serde_json::from_str(&header).map_err(|e| Error::format(LEXICAL_FILE, e))?;
        if header.n != chunk_ids.len() {
            return Err(Error::format(LEXICAL_FILE, "N disagrees with doclen.jsonl"));
        }
        let avgdl = mean_len(&doc_len);
        if (avgdl - header.avgdl).abs() > 1e-9 * avgdl.max(1.0) {
            return Err(Error::format(LEXICAL_FILE, "avgdl disagrees with doclen.jsonl"));
        }

        let mut postings = HashMap::new();
        for line in lines {
            let line = line.map_err(|e| Error::io(&path, e))?;
            let rec: TermLine = serde_json::from_str(&line).map_err(|e| Error::format(LEXICAL_FILE, e))?;
            let mut list = Vec::with_capacity(rec.postings.len());
            for (id, tf) in rec.postings {
                let ord = *ordinal.get(&id).ok_or_else(|| Error::UnknownChunk(id.clone()))?;
                if tf == 0 {
                    return Err(Error::format(LEXICAL_FILE, format!("zero tf for {}", rec.term)));
                }
                list.push((ord, tf));
            }
            list.sort_unstable();
            postings.insert(rec.term, list);
        }
        Ok(Self {
            chunk_ids,
            ordinal,
            doc_len,
            avgdl,
            postings,
        })
    }
}

/// Indexes the BPE surface tokens of each chunk.
pub fn build_index(chunks: &[Chunk], tok: &TokenizerModel) -> Result<InvertedIndex> {
    InvertedIndex::from_terms(chunks.iter().map(|c| (c.chunk_id.clone(), tok.tokenize(&c.text))))
}
