//! Unicode normalization and character classes shared by the cleaning
//! pipeline and the pre-tokenizer.

use unicode_normalization::UnicodeNormalization;

/// First and last codepoints of the Gurmukhi block.
pub const GURMUKHI_BLOCK: std::ops::RangeInclusive<char> = '\u{0A00}'..='\u{0A7F}';

/// Canonical composition followed by whitespace collapsing and trimming.
///
/// Composition exclusions mean precomposed nukta letters such as U+0A59
/// come out as base + U+0A3C.
pub fn normalize(text: &str) -> String {
    let composed: String = text.nfc().collect();
    collapse_whitespace(&composed)
}

/// Replaces every whitespace run with a single ASCII space and trims.
pub fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

pub fn is_gurmukhi(c: char) -> bool {
    GURMUKHI_BLOCK.contains(&c)
}

pub fn is_combining_mark(c: char) -> bool {
    unicode_normalization::char::is_combining_mark(c)
}

/// Letters and combining marks: the denominator of the script fraction.
pub fn is_letter_or_mark(c: char) -> bool {
    c.is_alphabetic() || is_combining_mark(c)
}

/// Punctuation and symbol codepoints used for pre-tokenization boundaries
/// and the punctuation-ratio quality filter.
pub fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{00A1}'
                | '\u{00A7}'
                | '\u{00AB}'
                | '\u{00B6}'
                | '\u{00B7}'
                | '\u{00BB}'
                | '\u{00BF}'
                | '\u{0964}'
                | '\u{0965}'
                | '\u{0A76}'
                | '\u{2010}'..='\u{2027}'
                | '\u{2030}'..='\u{205E}'
                | '\u{3001}'..='\u{3003}'
        )
}
