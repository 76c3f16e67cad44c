//! Shared tokenizer.
//!
//! Lowercases, splits ASCII punctuation into standalone tokens, then splits on
//! whitespace. Slot annotation, template NLU and every text metric use this
//! one rule so token boundaries agree everywhere.

pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else if ch.is_ascii_punctuation() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            tokens.push(ch.to_string());
        } else {
            current.extend(ch.to_lowercase());
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Finds the first start index where `needle` occurs in `haystack` and
/// `free(start..start + needle.len())` holds.
pub(crate) fn find_span<F>(haystack: &[String], needle: &[String], mut free: F) -> Option<usize>
where
    F: FnMut(std::ops::Range<usize>) -> bool,
{
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    (0..=haystack.len() - needle.len())
        .find(|&s| haystack[s..s + needle.len()] == *needle && free(s..s + needle.len()))
}
