//! The canonical whitespace tokenizer.
//!
//! Text is split on Unicode whitespace, then leading and trailing ASCII
//! punctuation characters are detached from each chunk, one token per
//! character. Interior punctuation stays put, so `Paul's` is a single token
//! while `late.` becomes `late` and `.`.
//!
//! Offsets are counted in Unicode scalar values (not bytes), which is what
//! standoff annotation tools report.

/// A token with its character span `[start, end)` in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with_offsets(text)
        .into_iter()
        .map(|t| t.text)
        .collect()
}

pub fn tokenize_with_offsets(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        split_chunk(&chars, start, i, &mut out);
    }
    out
}

fn split_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<Token>) {
    let mut lo = start;
    let mut hi = end;
    while lo < hi && chars[lo].is_ascii_punctuation() {
        lo += 1;
    }
    // an all-punctuation chunk is fully consumed by the leading pass
    while hi > lo && chars[hi - 1].is_ascii_punctuation() {
        hi -= 1;
    }
    for k in start..lo {
        out.push(single(chars, k));
    }
    if lo < hi {
        out.push(Token {
            text: chars[lo..hi].iter().collect(),
            start: lo,
            end: hi,
        });
    }
    for k in hi..end {
        out.push(single(chars, k));
    }
}

fn single(chars: &[char], k: usize) -> Token {
    Token {
        text: chars[k].to_string(),
        start: k,
        end: k + 1,
    }
}

/// Collapses runs of whitespace to single spaces and trims the ends.
pub fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detaches_edge_punctuation() {
        assert_eq!(
            tokenize("No, but he's always late."),
            vec!["No", ",", "but", "he's", "always", "late", "."]
        );
    }

    #[test]
    fn punctuation_runs_become_single_char_tokens() {
        assert_eq!(tokenize("(hi)...!"), vec!["(", "hi", ")", ".", ".", ".", "!"]);
        assert_eq!(tokenize("..."), vec![".", ".", "."]);
    }

    #[test]
    fn offsets_count_chars() {
        let toks = tokenize_with_offsets("Paul's Café, ok");
        assert_eq!(toks[0].text, "Paul's");
        assert_eq!((toks[1].start, toks[1].end), (7, 11));
        assert_eq!(toks[1].text, "Café");
        assert_eq!(toks[2].text, ",");
        assert_eq!((toks[3].start, toks[3].end), (13, 15));
    }

    #[test]
    fn unicode_whitespace_splits() {
        assert_eq!(tokenize("a\u{00A0}b\u{2003}c\n"), vec!["a", "b", "c"]);
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn non_ascii_punctuation_is_kept() {
        assert_eq!(tokenize("«hola»"), vec!["«hola»"]);
    }
}
