//! Resolves a model-quoted `corresponding_part` to a character span of the
//! email body.
//!
//! Resolution runs three stages in order and stops at the first hit:
//!
//! 1. exact substring search (first occurrence wins),
//! 2. whitespace-normalized search, where every run of whitespace and `<br>`
//!    tokens counts as a single space and the quote is trimmed,
//! 3. longest common substring over the normalized texts, accepted when it
//!    covers at least `threshold` of the normalized quote.
//!
//! Spans from stages 2 and 3 are mapped back to offsets in the original body.

use serde::{Deserialize, Serialize};

use crate::domain::{char_len, AnchorSpan};

pub const DEFAULT_FUZZY_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorMode {
    Exact,
    Normalized,
    Fuzzy,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorResolution {
    pub mode: AnchorMode,
    pub span: Option<AnchorSpan>,
    pub similarity: f64,
    /// How many times the quote occurs in the body at the winning stage.
    pub occurrences: usize,
}

impl AnchorResolution {
    fn failed(similarity: f64) -> Self {
        Self {
            mode: AnchorMode::Failed,
            span: None,
            similarity,
            occurrences: 0,
        }
    }

    pub fn is_ambiguous(&self) -> bool {
        self.occurrences > 1
    }
}

pub fn resolve_anchor(part: &str, body: &str) -> AnchorResolution {
    resolve_anchor_with(part, body, DEFAULT_FUZZY_THRESHOLD)
}

pub fn resolve_anchor_with(part: &str, body: &str, threshold: f64) -> AnchorResolution {
    if part.is_empty() || body.is_empty() {
        return AnchorResolution::failed(0.0);
    }

    if let Some(byte_start) = body.find(part) {
        let start = char_len(&body[..byte_start]);
        let first_char = part.chars().next().map_or(1, char::len_utf8);
        let again = body[byte_start + first_char..].contains(part);
        return AnchorResolution {
            mode: AnchorMode::Exact,
            span: Some(AnchorSpan {
                start,
                length: char_len(part),
            }),
            similarity: 1.0,
            occurrences: if again { 2 } else { 1 },
        };
    }

    let body_norm = Normalized::new(body);
    let part_norm = Normalized::new(part);
    let needle = trim_spaces(&part_norm.chars);
    if needle.is_empty() {
        return AnchorResolution::failed(0.0);
    }

    let hits = find_all(&body_norm.chars, needle, 2);
    if let Some(&first) = hits.first() {
        return AnchorResolution {
            mode: AnchorMode::Normalized,
            span: Some(body_norm.span(first, first + needle.len())),
            similarity: 1.0,
            occurrences: hits.len(),
        };
    }

    let (len, end) = longest_common_substring(&body_norm.chars, needle);
    let mut from = end - len;
    let mut to = end;
    while from < to && body_norm.chars[from] == ' ' {
        from += 1;
    }
    while to > from && body_norm.chars[to - 1] == ' ' {
        to -= 1;
    }
    let similarity = (to - from) as f64 / needle.len() as f64;
    if to > from && similarity >= threshold {
        AnchorResolution {
            mode: AnchorMode::Fuzzy,
            span: Some(body_norm.span(from, to)),
            similarity,
            occurrences: 1,
        }
    } else {
        AnchorResolution::failed(similarity)
    }
}

/// Text with whitespace runs and `<br>` tokens collapsed to one space, plus
/// the original `[start, end)` scalar range behind every normalized char.
struct Normalized {
    chars: Vec<char>,
    origin: Vec<(usize, usize)>,
}

impl Normalized {
    fn new(text: &str) -> Self {
        let source: Vec<char> = text.chars().collect();
        let mut chars = Vec::with_capacity(source.len());
        let mut origin = Vec::with_capacity(source.len());
        let mut i = 0;
        while i < source.len() {
            let run_start = i;
            while i < source.len() {
                if source[i].is_whitespace() {
                    i += 1;
                } else if let Some(n) = break_token_len(&source[i..]) {
                    i += n;
                } else {
                    break;
                }
            }
            if i > run_start {
                chars.push(' ');
                origin.push((run_start, i));
            } else {
                chars.push(source[i]);
                origin.push((i, i + 1));
                i += 1;
            }
        }
        Self { chars, origin }
    }

    fn span(&self, from: usize, to: usize) -> AnchorSpan {
        let start = self.origin[from].0;
        let end = self.origin[to - 1].1;
        AnchorSpan {
            start,
            length: end - start,
        }
    }
}

/// Length of a `<br>`, `<br/>` or `<br />` token (any case) at the head of `s`.
fn break_token_len(s: &[char]) -> Option<usize> {
    if s.len() < 4 || s[0] != '<' || !s[1].eq_ignore_ascii_case(&'b') || !s[2].eq_ignore_ascii_case(&'r') {
        return None;
    }
    let mut i = 3;
    while i < s.len() && s[i] == ' ' {
        i += 1;
    }
    if i < s.len() && s[i] == '/' {
        i += 1;
    }
    (i < s.len() && s[i] == '>').then_some(i + 1)
}

fn trim_spaces(chars: &[char]) -> &[char] {
    let start = chars.iter().position(|&c| c != ' ').unwrap_or(chars.len());
    let end = chars.iter().rposition(|&c| c != ' ').map_or(start, |p| p + 1);
    &chars[start..end]
}

fn find_all(haystack: &[char], needle: &[char], limit: usize) -> Vec<usize> {
    if needle.len() > haystack.len() {
        return Vec::new();
    }
    haystack
        .windows(needle.len())
        .enumerate()
        .filter(|(_, w)| *w == needle)
        .map(|(i, _)| i)
        .take(limit)
        .collect()
}

/// Returns `(length, end)` of the earliest longest common substring, where
/// `end` is an exclusive index into `haystack`.
fn longest_common_substring(haystack: &[char], needle: &[char]) -> (usize, usize) {
    let mut prev = vec![0u32; needle.len() + 1];
    let mut row = vec![0u32; needle.len() + 1];
    let (mut best, mut best_end) = (0u32, 0usize);
    for (i, &h) in haystack.iter().enumerate() {
        for (j, &n) in needle.iter().enumerate() {
            row[j + 1] = if h == n { prev[j] + 1 } else { 0 };
            if row[j + 1] > best {
                best = row[j + 1];
                best_end = i + 1;
            }
        }
        std::mem::swap(&mut prev, &mut row);
    }
    (best as usize, best_end)
}
