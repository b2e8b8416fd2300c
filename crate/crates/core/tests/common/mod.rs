//! Seeded synthetic Gurmukhi corpora shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use qrag_core::corpus::RawDocument;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONSONANTS: &[char] = &[
    'ਕ', 'ਖ', 'ਗ', 'ਘ', 'ਙ', 'ਚ', 'ਛ', 'ਜ', 'ਝ', 'ਞ', 'ਟ', 'ਠ', 'ਡ', 'ਢ', 'ਣ', 'ਤ', 'ਥ', 'ਦ', 'ਧ', 'ਨ', 'ਪ', 'ਫ',
    'ਬ', 'ਭ', 'ਮ', 'ਯ', 'ਰ', 'ਲ', 'ਵ', 'ਸ', 'ਹ',
];
const VOWEL_SIGNS: &[&str] = &["", "ਾ", "ਿ", "ੀ", "ੁ", "ੂ", "ੇ", "ੈ", "ੋ", "ੌ"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn syllable(rng: &mut impl Rng) -> String {
    let mut s = String::new();
    s.push(*CONSONANTS.choose(rng).unwrap());
    s.push_str(VOWEL_SIGNS.choose(rng).unwrap());
    s
}

pub fn word(rng: &mut impl Rng, syllables: std::ops::RangeInclusive<usize>) -> String {
    let n = rng.gen_range(syllables);
    (0..n).map(|_| syllable(rng)).collect()
}

pub struct Synthetic {
    pub docs: Vec<RawDocument>,
    /// Term that occurs in exactly one document, per document.
    pub planted: Vec<String>,
    /// Shared-vocabulary words of each document, in order.
    pub words: Vec<Vec<String>>,
}

/// `n_docs` documents of `words_per_doc` shared-vocabulary words plus one
/// unique planted word repeated three times.
pub fn synthetic_corpus(n_docs: usize, words_per_doc: usize, seed: u64) -> Synthetic {
    let mut rng = rng(seed);
    let mut vocab = HashSet::new();
    while vocab.len() < 3000 {
        vocab.insert(word(&mut rng, 2..=3));
    }
    let mut vocab: Vec<String> = vocab.into_iter().collect();
    vocab.sort();
    let mut used: HashSet<String> = vocab.iter().cloned().collect();
    let mut docs = Vec::with_capacity(n_docs);
    let mut planted = Vec::with_capacity(n_docs);
    let mut all_words = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let term = loop {
            let w = word(&mut rng, 5..=6);
            if used.insert(w.clone()) {
                break w;
            }
        };
        let words: Vec<String> = (0..words_per_doc).map(|_| vocab.choose(&mut rng).unwrap().clone()).collect();
        let mut text: Vec<&str> = words.iter().map(String::as_str).collect();
        for _ in 0..3 {
            let at = rng.gen_range(0..=text.len());
            text.insert(at, &term);
        }
        docs.push(RawDocument {
            doc_id: format!("doc{i:05}"),
            text: text.join(" "),
            source: "synthetic".into(),
            metadata: BTreeMap::new(),
        });
        planted.push(term);
        all_words.push(words);
    }
    Synthetic {
        docs,
        planted,
        words: all_words,
    }
}

pub fn write_jsonl(path: &Path, docs: &[RawDocument]) {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    for d in docs {
        let line = serde_json::json!({"id": d.doc_id, "text": d.text, "source": d.source});
        writeln!(f, "{line}").unwrap();
    }
}
