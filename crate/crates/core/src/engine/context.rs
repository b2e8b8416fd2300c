//! Generation context assembly under a token budget.

use crate::tokenizer::TokenizerModel;

/// Line placed between consecutive passages.
pub const PASSAGE_DELIMITER: &str = "---";

/// Token count of `text` under `tok`, the measure the budget is checked in.
pub fn context_tokens(text: &str, tok: &TokenizerModel) -> usize {
    tok.encode_ids(text).len()
}

/// Joins passage texts in the given order with a delimiter line between
/// them. Whole passages are added while the running token count stays within
/// `budget`; the first passage that does not fit ends the context. When even
/// the first passage is too long, its first `budget` tokens are used instead.
pub fn format_context<S: AsRef<str>>(texts: &[S], budget: usize, tok: &TokenizerModel) -> String {
    let delimiter_cost = context_tokens(PASSAGE_DELIMITER, tok);
    let mut out = String::new();
    let mut used = 0usize;
    for (i, text) in texts.iter().enumerate() {
        let text = text.as_ref();
        let cost = context_tokens(text, tok);
        if cost == 0 {
            continue;
        }
        let extra = if out.is_empty() { cost } else { cost + delimiter_cost };
        if used + extra <= budget {
            if !out.is_empty() {
                out.push('\n');
                out.push_str(PASSAGE_DELIMITER);
                out.push('\n');
            }
            out.push_str(text);
            used += extra;
            continue;
        }
        if i == 0 || out.is_empty() {
            out = truncated_prefix(text, budget, tok);
        }
        break;
    }
    out
}

/// Decoded prefix of `budget` tokens. Decoding can cut a word whose shorter
/// form re-encodes into more pieces, so the prefix shrinks until the
/// re-encoded count fits.
fn truncated_prefix(text: &str, budget: usize, tok: &TokenizerModel) -> String {
    let ids = tok.encode_ids(text);
    let mut take = budget.min(ids.len());
    while take > 0 {
        let prefix = tok.decode_ids(&ids[..take]).unwrap_or_default();
        if context_tokens(&prefix, tok) <= budget {
            return prefix;
        }
        take -= 1;
    }
    String::new()
}
