//! Retrieval metrics (recall@k, MRR, nDCG@k), ROUGE-L, and a batch runner
//! over TREC-style query/qrels/run files in JSONL.
//!
//! Recall and MRR binarize relevance at `rel >= 1`; nDCG uses graded
//! relevance. Queries without any relevant chunk are left out of macro
//! averages and listed in [`MetricReport::skipped`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::normalize;

/// qid → chunk_id → graded relevance.
pub type QrelSet = BTreeMap<String, BTreeMap<String, u32>>;

/// qid → ranked chunk ids.
pub type Run = BTreeMap<String, Vec<String>>;

fn relevant_set(rels: &BTreeMap<String, u32>) -> HashSet<&str> {
    rels.iter().filter(|(_, &r)| r >= 1).map(|(id, _)| id.as_str()).collect()
}

pub fn recall_at_k<S: AsRef<str>>(ranked: &[S], relevant: &HashSet<&str>, k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut seen = HashSet::new();
    let hits = ranked
        .iter()
        .take(k)
        .map(AsRef::as_ref)
        .filter(|id| relevant.contains(id) && seen.insert(*id))
        .count();
    hits as f64 / relevant.len() as f64
}

pub fn reciprocal_rank<S: AsRef<str>>(ranked: &[S], relevant: &HashSet<&str>) -> f64 {
    ranked
        .iter()
        .position(|id| relevant.contains(id.as_ref()))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// Mean reciprocal rank over queries with a non-empty relevant set.
pub fn mrr<S: AsRef<str>>(queries: &[(Vec<S>, HashSet<&str>)]) -> Result<f64> {
    let rrs: Vec<f64> = queries
        .iter()
        .filter(|(_, rel)| !rel.is_empty())
        .map(|(ranked, rel)| reciprocal_rank(ranked, rel))
        .collect();
    if rrs.is_empty() {
        return Err(Error::NoEvaluableQueries);
    }
    Ok(rrs.iter().sum::<f64>() / rrs.len() as f64)
}

pub fn ndcg_at_k<S: AsRef<str>>(ranked: &[S], rels: &HashMap<String, u32>, k: usize) -> f64 {
    let mut ideal: Vec<u32> = rels.values().copied().filter(|&r| r > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let discount = |i: usize| ((i + 2) as f64).log2();
    let idcg: f64 = ideal.iter().take(k).enumerate().map(|(i, &r)| r as f64 / discount(i)).sum();
    if idcg == 0.0 {
        return 0.0;
    }
    let mut seen: HashSet<&str> = HashSet::new();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .map(AsRef::as_ref)
        .enumerate()
        .filter(|&(_, id)| seen.insert(id))
        .map(|(i, id)| rels.get(id).copied().unwrap_or(0) as f64 / discount(i))
        .sum();
    dcg / idcg
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct RougeL {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

fn lcs_len(a: &[&str], b: &[&str]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based ROUGE-L with F as the harmonic mean (beta = 1).
pub fn rouge_l(reference: &str, hypothesis: &str) -> RougeL {
    let (r, h) = (normalize(reference), normalize(hypothesis));
    let r: Vec<&str> = r.split(' ').filter(|s| !s.is_empty()).collect();
    let h: Vec<&str> = h.split(' ').filter(|s| !s.is_empty()).collect();
    if r.is_empty() || h.is_empty() {
        return RougeL::default();
    }
    let lcs = lcs_len(&r, &h) as f64;
    let precision = lcs / h.len() as f64;
    let recall = lcs / r.len() as f64;
    let f = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    RougeL { precision, recall, f }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub qid: String,
    pub recall: BTreeMap<usize, f64>,
    pub rr: f64,
    pub ndcg: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MacroMetrics {
    pub recall: BTreeMap<usize, f64>,
    pub mrr: f64,
    pub ndcg: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub evaluated: usize,
    pub skipped: Vec<String>,
    #[serde(rename = "macro")]
    pub macro_avg: MacroMetrics,
    pub per_query: Vec<QueryMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rouge_l: Option<RougeL>,
}

impl MetricReport {
    /// Macro-averaged ROUGE-L over `(reference, hypothesis)` pairs.
    pub fn with_rouge<'a>(mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let scores: Vec<RougeL> = pairs.into_iter().map(|(r, h)| rouge_l(r, h)).collect();
        if !scores.is_empty() {
            let n = scores.len() as f64;
            self.rouge_l = Some(RougeL {
                precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
                recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
                f: scores.iter().map(|s| s.f).sum::<f64>() / n,
            });
        }
        self
    }
}

pub fn evaluate_run(run: &Run, qrels: &QrelSet, ks: &[usize]) -> Result<MetricReport> {
    if run.is_empty() {
        return Err(Error::NoQueries);
    }
    if ks.iter().any(|&k| k == 0) {
        return Err(Error::Config("cutoffs must be >= 1".into()));
    }
    let mut per_query = Vec::new();
    let mut skipped = Vec::new();
    for (qid, ranked) in run {
        let rels = qrels.get(qid).ok_or_else(|| Error::MissingQrels(qid.clone()))?;
        let relevant = relevant_set(rels);
        if relevant.is_empty() {
            skipped.push(qid.clone());
            continue;
        }
        let graded: HashMap<String, u32> = rels.iter().map(|(k, &v)| (k.clone(), v)).collect();
        per_query.push(QueryMetrics {
            qid: qid.clone(),
            recall: ks.iter().map(|&k| (k, recall_at_k(ranked, &relevant, k))).collect(),
            rr: reciprocal_rank(ranked, &relevant),
            ndcg: ks.iter().map(|&k| (k, ndcg_at_k(ranked, &graded, k))).collect(),
        });
    }
    if per_query.is_empty() {
        return Err(Error::NoEvaluableQueries);
    }
    let n = per_query.len() as f64;
    let mean = |f: &dyn Fn(&QueryMetrics) -> f64| per_query.iter().map(f).sum::<f64>() / n;
    let macro_avg = MacroMetrics {
        recall: ks.iter().map(|&k| (k, mean(&|q| q.recall[&k]))).collect(),
        mrr: mean(&|q| q.rr),
        ndcg: ks.iter().map(|&k| (k, mean(&|q| q.ndcg[&k]))).collect(),
    };
    Ok(MetricReport {
        evaluated: per_query.len(),
        skipped,
        macro_avg,
        per_query,
        rouge_l: None,
    })
}

// ---------------------------------------------------------------------------
// Files

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub qid: String,
    pub text: String,
}

#[derive(Serialize, Deserialize)]
struct QrelLine {
    qid: String,
    chunk_id: String,
    rel: u32,
}

#[derive(Serialize, Deserialize)]
struct RunLine {
    qid: String,
    ranking: Vec<String>,
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::format(what, format!("line {n}: {e}")))?);
    }
    Ok(out)
}

pub fn read_queries(path: impl AsRef<Path>) -> Result<Vec<Query>> {
    read_jsonl(path.as_ref(), "queries")
}

pub fn read_qrels(path: impl AsRef<Path>) -> Result<QrelSet> {
    let mut out = QrelSet::new();
    for l in read_jsonl::<QrelLine>(path.as_ref(), "qrels")? {
        out.entry(l.qid).or_default().insert(l.chunk_id, l.rel);
    }
    Ok(out)
}

pub fn read_run(path: impl AsRef<Path>) -> Result<Run> {
    Ok(read_jsonl::<RunLine>(path.as_ref(), "run")?
        .into_iter()
        .map(|l| (l.qid, l.ranking))
        .collect())
}

pub fn write_run(path: impl AsRef<Path>, run: &Run) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for (qid, ranking) in run {
        let line = RunLine {
            qid: qid.clone(),
            ranking: ranking.clone(),
        };
        writeln!(f, "{}", serde_json::to_string(&line)?).map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}
