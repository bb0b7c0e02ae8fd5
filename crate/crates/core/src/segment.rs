//! Passage segmentation into sentences or word n-grams.
//!
//! All offsets are in Unicode scalar values relative to the passage, so
//! `passage.chars().skip(start).take(end - start)` reproduces a segment's
//! text. Word tokens are maximal runs of non-whitespace with punctuation left
//! attached.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SegmentError {
    #[error("invalid segmentation config: {0}")]
    InvalidConfig(String),
    #[error("segment file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Sentence,
    Ngram,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Sentence => "sentence",
            Level::Ngram => "ngram",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "sentence" => Ok(Level::Sentence),
            "ngram" => Ok(Level::Ngram),
            other => Err(format!(
                "unknown level {other:?} (expected sentence or ngram)"
            )),
        }
    }
}

/// One comparison unit cut from a passage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub index: usize,
    pub level: Level,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
    #[serde(rename = "tokens")]
    pub word_tokens: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentationConfig {
    pub level: Level,
    pub n: usize,
    pub overlap: bool,
    pub keep_remainder: bool,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            level: Level::Ngram,
            n: 5,
            overlap: false,
            keep_remainder: true,
        }
    }
}

impl SegmentationConfig {
    pub fn sentences() -> Self {
        Self {
            level: Level::Sentence,
            ..Self::default()
        }
    }

    pub fn ngrams(n: usize) -> Self {
        Self {
            n,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SegmentError> {
        if self.level == Level::Ngram && self.n < 2 {
            return Err(SegmentError::InvalidConfig(format!(
                "n-gram size must be at least 2, got {}",
                self.n
            )));
        }
        Ok(())
    }
}

/// A word token and its half-open character span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordToken {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

pub fn word_tokenize(text: &str) -> Vec<WordToken> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut pos = 0;
    for c in text.chars() {
        if c.is_whitespace() {
            if !current.is_empty() {
                tokens.push(WordToken {
                    text: std::mem::take(&mut current),
                    char_start: start,
                    char_end: pos,
                });
            }
        } else {
            if current.is_empty() {
                start = pos;
            }
            current.push(c);
        }
        pos += 1;
    }
    if !current.is_empty() {
        tokens.push(WordToken {
            text: current,
            char_start: start,
            char_end: pos,
        });
    }
    tokens
}

/// Abbreviations whose trailing period never ends a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "messrs", "dr", "st", "capt", "col", "gen", "lieut", "gov", "rev", "hon", "esq",
    "jr", "sr", "prof", "vol", "vols", "pp", "p", "ch", "chap", "no", "viz", "vs", "cf", "ib",
    "ibid", "i.e", "e.g", "mt", "ft",
];

const TERMINATORS: [char; 3] = ['.', '!', '?'];
const CLOSERS: [char; 8] = ['"', '\'', '\u{201d}', '\u{2019}', ')', ']', '\u{bb}', '}'];
const OPENERS: [char; 7] = ['"', '\'', '\u{201c}', '\u{2018}', '(', '[', '\u{ab}'];

fn is_abbreviation(word: &str) -> bool {
    let word = word.trim_start_matches(|c| OPENERS.contains(&c));
    if word.is_empty() {
        return false;
    }
    if ABBREVIATIONS.iter().any(|a| word.eq_ignore_ascii_case(a)) {
        return true;
    }
    // Initials: "C", "C.S", "U.S.A". A bare "I" is the pronoun.
    if word == "I" {
        return false;
    }
    let mut parts = word.split('.');
    let first_upper = parts
        .next()
        .map(|p| {
            let mut cs = p.chars();
            matches!((cs.next(), cs.next()), (Some(c), None) if c.is_uppercase())
        })
        .unwrap_or(false);
    first_upper && parts.all(|p| p.chars().count() == 1 && p.chars().all(char::is_alphabetic))
}

fn starts_sentence(c: char) -> bool {
    c.is_uppercase() || c.is_ascii_digit() || OPENERS.contains(&c)
}

/// Character offsets `[start, end)` of every sentence in `text`.
fn sentence_spans(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let len = chars.len();
    let mut spans = Vec::new();
    let skip_ws = |mut i: usize| {
        while i < len && chars[i].is_whitespace() {
            i += 1;
        }
        i
    };
    let mut start = skip_ws(0);
    let mut i = start;
    while i < len {
        if !TERMINATORS.contains(&chars[i]) {
            i += 1;
            continue;
        }
        let term_start = i;
        while i < len && TERMINATORS.contains(&chars[i]) {
            i += 1;
        }
        let single_period = i - term_start == 1 && chars[term_start] == '.';
        while i < len && CLOSERS.contains(&chars[i]) {
            i += 1;
        }
        let end = i;
        let next = skip_ws(end);
        let boundary = if next >= len {
            true
        } else if next == end || !starts_sentence(chars[next]) {
            false
        } else if single_period {
            let word_start = chars[start..term_start]
                .iter()
                .rposition(|c| c.is_whitespace())
                .map(|p| start + p + 1)
                .unwrap_or(start);
            let word: String = chars[word_start..term_start].iter().collect();
            !is_abbreviation(&word)
        } else {
            true
        };
        if boundary {
            spans.push((start, end));
            start = next;
            i = next;
        }
    }
    if start < len {
        let mut end = len;
        while end > start && chars[end - 1].is_whitespace() {
            end -= 1;
        }
        spans.push((start, end));
    }
    spans
}

fn slice_chars(chars: &[char], start: usize, end: usize) -> String {
    chars[start..end].iter().collect()
}

/// Splits normalized text into sentence segments.
pub fn split_sentences(text: &str) -> Vec<Segment> {
    let chars: Vec<char> = text.chars().collect();
    sentence_spans(text)
        .into_iter()
        .enumerate()
        .map(|(index, (start, end))| {
            let text = slice_chars(&chars, start, end);
            let word_tokens = word_tokenize(&text).into_iter().map(|t| t.text).collect();
            Segment {
                index,
                level: Level::Sentence,
                char_start: start,
                char_end: end,
                text,
                word_tokens,
            }
        })
        .collect()
}

/// Splits text into word n-grams: a partition by default, stride-1 windows
/// when `cfg.overlap` is set.
///
/// `keep_remainder` governs the trailing short group in partition mode only.
/// Overlapping mode always yields exactly `max(0, T - n + 1)` windows.
pub fn split_ngrams(text: &str, cfg: &SegmentationConfig) -> Result<Vec<Segment>, SegmentError> {
    if cfg.level != Level::Ngram {
        return Err(SegmentError::InvalidConfig(
            "split_ngrams requires level=ngram".into(),
        ));
    }
    cfg.validate()?;
    let chars: Vec<char> = text.chars().collect();
    let tokens = word_tokenize(text);
    let n = cfg.n;
    let groups: Vec<std::ops::Range<usize>> = if cfg.overlap {
        if tokens.len() < n {
            Vec::new()
        } else {
            (0..=tokens.len() - n).map(|i| i..i + n).collect()
        }
    } else {
        (0..tokens.len())
            .step_by(n)
            .map(|i| i..(i + n).min(tokens.len()))
            .filter(|r| cfg.keep_remainder || r.len() == n)
            .collect()
    };
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(index, range)| {
            let first = &tokens[range.start];
            let last = &tokens[range.end - 1];
            Segment {
                index,
                level: Level::Ngram,
                char_start: first.char_start,
                char_end: last.char_end,
                text: slice_chars(&chars, first.char_start, last.char_end),
                word_tokens: tokens[range].iter().map(|t| t.text.clone()).collect(),
            }
        })
        .collect())
}

/// Segments a passage at the level named in `cfg`.
pub fn segment_passage(text: &str, cfg: &SegmentationConfig) -> Result<Vec<Segment>, SegmentError> {
    cfg.validate()?;
    match cfg.level {
        Level::Sentence => Ok(split_sentences(text)),
        Level::Ngram => split_ngrams(text, cfg),
    }
}

/// Writes segments as JSON Lines.
pub fn write_jsonl<W: Write>(mut out: W, segments: &[Segment]) -> Result<(), SegmentError> {
    for seg in segments {
        serde_json::to_writer(&mut out, seg).map_err(|e| SegmentError::Io(io::Error::other(e)))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<Segment>, SegmentError> {
    let mut segments = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let seg: Segment = serde_json::from_str(&line).map_err(|e| SegmentError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if seg.index != segments.len() {
            return Err(SegmentError::Parse {
                line: i + 1,
                message: format!("expected index {}, found {}", segments.len(), seg.index),
            });
        }
        segments.push(seg);
    }
    Ok(segments)
}
