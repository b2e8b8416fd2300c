//! Gurmukhi-aware normalization and a byte-pair-encoding subword tokenizer.
//!
//! Words are whitespace-delimited; inside a word, runs of punctuation and
//! non-punctuation form separate pieces that never merge with each other.
//! The word-end marker is fused onto the last codepoint of the last piece
//! of each word, which makes [`TokenizerModel::decode`] unambiguous.

mod bpe;
mod normalize;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bpe::{train_bpe, BpeTrainer};
pub use normalize::{
    collapse_whitespace, is_combining_mark, is_gurmukhi, is_letter_or_mark, is_punctuation,
    normalize, GURMUKHI_BLOCK,
};

pub const DEFAULT_WORD_END_MARKER: &str = "</w>";
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_TOKEN: &str = "<pad>";
pub const TOKENIZER_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    NfcCollapse,
}

/// A run of codepoints that BPE merges never cross.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Piece<'a> {
    pub text: &'a str,
    pub word_final: bool,
}

/// Splits normalized text into merge-isolated pieces.
pub(crate) fn pre_tokenize(normalized: &str) -> Vec<Piece<'_>> {
    let mut pieces = Vec::new();
    for word in normalized.split_whitespace() {
        let start_len = pieces.len();
        let mut start = 0;
        let mut prev_punct: Option<bool> = None;
        for (i, c) in word.char_indices() {
            let punct = if is_combining_mark(c) {
                prev_punct.unwrap_or(false)
            } else {
                is_punctuation(c)
            };
            if let Some(p) = prev_punct {
                if p != punct {
                    pieces.push(Piece {
                        text: &word[start..i],
                        word_final: false,
                    });
                    start = i;
                }
            }
            prev_punct = Some(punct);
        }
        pieces.push(Piece {
            text: &word[start..],
            word_final: true,
        });
        debug_assert!(pieces.len() > start_len);
    }
    pieces
}

/// Initial codepoint symbols of a piece, marker fused to the final one.
pub(crate) fn piece_symbols(piece: Piece<'_>, marker: &str) -> Vec<String> {
    let mut syms: Vec<String> = piece.text.chars().map(String::from).collect();
    if piece.word_final {
        if let Some(last) = syms.last_mut() {
            last.push_str(marker);
        }
    }
    syms
}

/// Encoded token sequence: parallel ids and surface strings.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSeq {
    pub ids: Vec<u32>,
    pub surface: Vec<String>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// A trained BPE model. Immutable once built.
#[derive(Debug, Clone)]
pub struct TokenizerModel {
    tokens: Vec<String>,
    vocab: HashMap<String, u32>,
    merges: Vec<(String, String)>,
    merge_ranks: HashMap<(u32, u32), (u32, u32)>,
    normalization: Normalization,
    word_end_marker: String,
    unk_id: u32,
    pad_id: u32,
}

#[derive(Serialize, Deserialize)]
struct TokenizerFile {
    version: u32,
    normalization: Normalization,
    word_end_marker: String,
    vocab: BTreeMap<String, u32>,
    merges: Vec<(String, String)>,
    special: BTreeMap<String, u32>,
}

impl TokenizerModel {
    /// Assembles a model from an id-ordered token list and an ordered merge list.
    pub fn from_parts(
        tokens: Vec<String>,
        merges: Vec<(String, String)>,
        word_end_marker: impl Into<String>,
        unk_id: u32,
        pad_id: u32,
    ) -> Result<Self> {
        let word_end_marker = word_end_marker.into();
        let mut vocab = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if vocab.insert(tok.clone(), id as u32).is_some() {
                return Err(Error::format("tokenizer", format!("duplicate token {tok:?}")));
            }
        }
        for id in [unk_id, pad_id] {
            if id as usize >= tokens.len() {
                return Err(Error::IdOutOfRange(id));
            }
        }
        let mut merge_ranks = HashMap::with_capacity(merges.len());
        for (rank, (l, r)) in merges.iter().enumerate() {
            let lookup = |s: &str| {
                vocab
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::format("tokenizer", format!("merge symbol {s:?} not in vocab")))
            };
            let left = lookup(l)?;
            let right = lookup(r)?;
            let out = lookup(&format!("{l}{r}"))?;
            merge_ranks.entry((left, right)).or_insert((rank as u32, out));
        }
        Ok(Self {
            tokens,
            vocab,
            merges,
            merge_ranks,
            normalization: Normalization::NfcCollapse,
            word_end_marker,
            unk_id,
            pad_id,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn word_end_marker(&self) -> &str {
        &self.word_end_marker
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn unk_id(&self) -> u32 {
        self.unk_id
    }

    pub fn pad_id(&self) -> u32 {
        self.pad_id
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.vocab.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Same model with only the first `n` merges kept.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let merges = self.merges[..n.min(self.merges.len())].to_vec();
        Self::from_parts(
            self.tokens.clone(),
            merges,
            self.word_end_marker.clone(),
            self.unk_id,
            self.pad_id,
        )
    }

    fn encode_piece(&self, piece: Piece<'_>, out: &mut Vec<u32>) {
        let mut ids: Vec<u32> = piece_symbols(piece, &self.word_end_marker)
            .iter()
            .map(|s| self.vocab.get(s).copied().unwrap_or(self.unk_id))
            .collect();
        loop {
            let best = ids
                .windows(2)
                .filter_map(|w| self.merge_ranks.get(&(w[0], w[1])).map(|&(rank, out)| (rank, w[0], w[1], out)))
                .min_by_key(|&(rank, ..)| rank);
            let Some((_, left, right, merged)) = best else { break };
            let mut next = Vec::with_capacity(ids.len());
            let mut i = 0;
            while i < ids.len() {
                if i + 1 < ids.len() && ids[i] == left && ids[i + 1] == right {
                    next.push(merged);
                    i += 2;
                } else {
                    next.push(ids[i]);
                    i += 1;
                }
            }
            ids = next;
        }
        out.extend_from_slice(&ids);
    }

    /// Token ids of `text` after normalization.
    pub fn encode_ids(&self, text: &str) -> Vec<u32> {
        let normalized = normalize(text);
        let mut ids = Vec::new();
        for piece in pre_tokenize(&normalized) {
            self.encode_piece(piece, &mut ids);
        }
        ids
    }

    pub fn encode(&self, text: &str) -> TokenSeq {
        let ids = self.encode_ids(text);
        let surface = ids.iter().map(|&id| self.tokens[id as usize].clone()).collect();
        TokenSeq { ids, surface }
    }

    /// Surface strings of `text`; the terms used by the lexical index.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        self.encode(text).surface
    }

    pub fn decode_ids(&self, ids: &[u32]) -> Result<String> {
        let mut out = String::new();
        for &id in ids {
            let token = self.token(id).ok_or(Error::IdOutOfRange(id))?;
            match token.strip_suffix(self.word_end_marker.as_str()) {
                Some(stem) if !self.word_end_marker.is_empty() => {
                    out.push_str(stem);
                    out.push(' ');
                }
                _ => out.push_str(token),
            }
        }
        Ok(out.trim_end().to_string())
    }

    pub fn decode(&self, seq: &TokenSeq) -> Result<String> {
        self.decode_ids(&seq.ids)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = TokenizerFile {
            version: TOKENIZER_FORMAT_VERSION,
            normalization: self.normalization,
            word_end_marker: self.word_end_marker.clone(),
            vocab: self.vocab.iter().map(|(k, &v)| (k.clone(), v)).collect(),
            merges: self.merges.clone(),
            special: BTreeMap::from([("pad".to_string(), self.pad_id), ("unk".to_string(), self.unk_id)]),
        };
        let mut s = serde_json::to_string(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: TokenizerFile = serde_json::from_str(s).map_err(|e| Error::format("tokenizer.json", e))?;
        if file.version != TOKENIZER_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(file.version));
        }
        let mut tokens = vec![None; file.vocab.len()];
        for (tok, id) in file.vocab {
            match tokens.get_mut(id as usize) {
                Some(slot @ None) => *slot = Some(tok),
                _ => return Err(Error::format("tokenizer.json", format!("ids are not dense at {id}"))),
            }
        }
        let tokens: Vec<String> = tokens.into_iter().map(|t| t.expect("dense ids checked")).collect();
        let unk = *file
            .special
            .get("unk")
            .ok_or_else(|| Error::format("tokenizer.json", "missing special.unk"))?;
        let pad = file.special.get("pad").copied().unwrap_or(unk);
        Self::from_parts(tokens, file.merges, file.word_end_marker, unk, pad)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
