//! BPE merge training over a piece-frequency table.
//!
//! Pair counts are maintained incrementally; a max-heap with lazy
//! invalidation picks the most frequent pair, ties broken by the
//! lexicographically smallest `(left, right)` string pair.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};

use super::{normalize, piece_symbols, pre_tokenize, TokenizerModel, DEFAULT_WORD_END_MARKER, PAD_TOKEN, UNK_TOKEN};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BpeTrainer {
    pub vocab_size: usize,
    pub word_end_marker: String,
}

impl BpeTrainer {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            word_end_marker: DEFAULT_WORD_END_MARKER.to_string(),
        }
    }

    pub fn train<I, S>(&self, corpus: I) -> Result<TokenizerModel>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut piece_counts: HashMap<(String, bool), u64> = HashMap::new();
        for line in corpus {
            let normalized = normalize(line.as_ref());
            for piece in pre_tokenize(&normalized) {
                *piece_counts
                    .entry((piece.text.to_string(), piece.word_final))
                    .or_default() += 1;
            }
        }
        if piece_counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }

        // Sorted iteration keeps symbol ids independent of hash order.
        let mut pieces: Vec<((String, bool), u64)> = piece_counts.into_iter().collect();
        pieces.sort_unstable();

        let mut initial = BTreeSet::new();
        let piece_syms: Vec<Vec<String>> = pieces
            .iter()
            .map(|((text, word_final), _)| {
                let syms = piece_symbols(
                    super::Piece {
                        text,
                        word_final: *word_final,
                    },
                    &self.word_end_marker,
                );
                initial.extend(syms.iter().cloned());
                syms
            })
            .collect();

        let mut tokens: Vec<String> = vec![UNK_TOKEN.to_string(), PAD_TOKEN.to_string()];
        tokens.extend(initial.into_iter().filter(|s| s != UNK_TOKEN && s != PAD_TOKEN));
        let minimum = tokens.len();
        if self.vocab_size < minimum {
            return Err(Error::VocabTooSmall {
                requested: self.vocab_size,
                minimum,
            });
        }
        let mut vocab: HashMap<String, u32> = tokens
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();

        let mut words: Vec<Word> = piece_syms
            .iter()
            .zip(&pieces)
            .map(|(syms, (_, count))| Word {
                symbols: syms.iter().map(|s| vocab[s]).collect(),
                count: *count as i64,
            })
            .collect();

        let mut pair_counts: HashMap<(u32, u32), i64> = HashMap::new();
        let mut occurs: HashMap<(u32, u32), HashSet<usize>> = HashMap::new();
        for (wi, w) in words.iter().enumerate() {
            for p in w.symbols.windows(2) {
                let pair = (p[0], p[1]);
                *pair_counts.entry(pair).or_default() += w.count;
                occurs.entry(pair).or_default().insert(wi);
            }
        }

        let mut heap: BinaryHeap<Candidate> = pair_counts
            .iter()
            .map(|(&pair, &count)| Candidate::new(pair, count, &tokens))
            .collect();

        let mut merges = Vec::new();
        while tokens.len() < self.vocab_size {
            let Some(top) = heap.pop() else { break };
            let current = pair_counts.get(&top.pair).copied().unwrap_or(0);
            if current != top.count {
                if current > 0 && current < top.count {
                    heap.push(Candidate::new(top.pair, current, &tokens));
                }
                continue;
            }
            if current < 2 {
                break;
            }

            let (left, right) = top.pair;
            let merged_str = format!("{}{}", tokens[left as usize], tokens[right as usize]);
            let merged = match vocab.get(&merged_str) {
                Some(&id) => id,
                None => {
                    let id = tokens.len() as u32;
                    tokens.push(merged_str.clone());
                    vocab.insert(merged_str, id);
                    id
                }
            };
            merges.push((top.left, top.right));

            let affected: Vec<usize> = occurs.remove(&top.pair).map(|s| s.into_iter().collect()).unwrap_or_default();
            let mut touched: HashSet<(u32, u32)> = HashSet::new();
            for wi in affected {
                let word = &mut words[wi];
                if !word.contains(top.pair) {
                    continue;
                }
                for p in word.symbols.windows(2) {
                    let pair = (p[0], p[1]);
                    *pair_counts.get_mut(&pair).expect("counted pair") -= word.count;
                    touched.insert(pair);
                }
                word.merge(top.pair, merged);
                for p in word.symbols.windows(2) {
                    let pair = (p[0], p[1]);
                    *pair_counts.entry(pair).or_default() += word.count;
                    occurs.entry(pair).or_default().insert(wi);
                    touched.insert(pair);
                }
            }
            pair_counts.remove(&top.pair);
            for pair in touched {
                match pair_counts.get(&pair).copied() {
                    Some(c) if c > 0 => heap.push(Candidate::new(pair, c, &tokens)),
                    Some(_) => {
                        pair_counts.remove(&pair);
                    }
                    None => {}
                }
            }
        }

        TokenizerModel::from_parts(tokens, merges, self.word_end_marker.clone(), 0, 1)
    }
}

/// Trains a model with the default word-end marker.
pub fn train_bpe<I, S>(corpus: I, vocab_size: usize) -> Result<TokenizerModel>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    BpeTrainer::new(vocab_size).train(corpus)
}

struct Word {
    symbols: Vec<u32>,
    count: i64,
}

impl Word {
    fn contains(&self, pair: (u32, u32)) -> bool {
        self.symbols.windows(2).any(|w| (w[0], w[1]) == pair)
    }

    fn merge(&mut self, pair: (u32, u32), merged: u32) {
        let mut out = Vec::with_capacity(self.symbols.len());
        let mut i = 0;
        while i < self.symbols.len() {
            if i + 1 < self.symbols.len() && (self.symbols[i], self.symbols[i + 1]) == pair {
                out.push(merged);
                i += 2;
            } else {
                out.push(self.symbols[i]);
                i += 1;
            }
        }
        self.symbols = out;
    }
}

struct Candidate {
    count: i64,
    pair: (u32, u32),
    left: String,
    right: String,
}

impl Candidate {
    fn new(pair: (u32, u32), count: i64, tokens: &[String]) -> Self {
        Self {
            count,
            pair,
            left: tokens[pair.0 as usize].clone(),
            right: tokens[pair.1 as usize].clone(),
        }
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| (&other.left, &other.right).cmp(&(&self.left, &self.right)))
    }
}
